"""Power-series solution of phi(q^2 s) - 2(1 + q s) phi(q s) + phi(s) = 0.

Equivalently (1 + s) phi(s) = (phi(s/q) + phi(q s)) / 2.  The regular
solution phi = sum c_k s^k has c_0 = 1 and

    c_k (q^k - 1)^2 = 2 q^k c_{k-1},

which is unchanged under q -> 1/q.  Coefficients fall off like
q^{-k^2/2} and leave the double range near k = 45 for q = 2, so they are
stored as (mantissa, binary exponent) pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import AccuracyError, CancellationError, ValidationError

ENVELOPE = 1e-10
CANCELLATION_LIMIT = 1e-4
MAX_TERMS = 1000
_ULP = 2.0**-52


def _ldexp(m: float, e: int) -> float:
    try:
        return math.ldexp(m, e)
    except OverflowError:
        return math.copysign(math.inf, m)


def _normalize(m: float, e: int) -> tuple[float, int]:
    if m == 0.0:
        return 0.0, 0
    m2, e2 = math.frexp(m)
    return m2, e + e2


@dataclass(frozen=True)
class SeriesPoly:
    """Truncated series c_0 + c_1 s + ... + c_K s^K with c_k = mantissas[k] * 2**exponents[k]."""

    q: float
    mantissas: tuple[float, ...]
    exponents: tuple[int, ...]

    def __post_init__(self):
        if not (self.q > 0 and math.isfinite(self.q)) or self.q == 1:
            raise ValidationError("q must be positive, finite and different from 1")
        if len(self.mantissas) != len(self.exponents) or not self.mantissas:
            raise ValidationError("need at least one coefficient")

    @classmethod
    def from_coeffs(cls, q: float, coeffs) -> "SeriesPoly":
        pairs = [math.frexp(float(c)) for c in coeffs]
        return cls(float(q), tuple(m for m, _ in pairs), tuple(e for _, e in pairs))

    @classmethod
    def constant(cls, q: float, K: int = 0) -> "SeriesPoly":
        """The constant solution phi = 1, padded with K zero coefficients."""
        return cls.from_coeffs(q, [1.0] + [0.0] * K)

    @property
    def K(self) -> int:
        return len(self.mantissas) - 1

    @property
    def coeffs(self) -> list[float]:
        """Coefficients as floats; outside the double range they come out as 0 or inf."""
        return [_ldexp(m, e) for m, e in zip(self.mantissas, self.exponents)]

    def log2_coeffs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log2(np.abs(self.mantissas)) + np.asarray(self.exponents, dtype=float)

    def exact(self, k: int) -> Fraction:
        return Fraction(self.mantissas[k]) * Fraction(2) ** self.exponents[k]


def _ratio(q: float, k: int) -> tuple[float, int]:
    """2 q^k / (q^k - 1)^2 = 2p / (1 - p)^2 with p = min(q, 1/q)^k, as (factor, binary exponent)."""
    qm, qe = math.frexp(q)
    sgn = 1 if q < 1 else -1
    pm = qm ** (sgn * k)  # p = pm * 2**(sgn * k * qe)
    d = -math.expm1(-k * abs(math.log1p(q - 1.0)))  # 1 - p without cancellation
    return 2.0 * pm / (d * d), sgn * k * qe


def series_coefficients(q: float, K: int) -> SeriesPoly:
    if not (q > 0 and math.isfinite(q)):
        raise ValidationError("q must be positive and finite")
    if q == 1:
        raise ValidationError("q = 1 makes the recurrence degenerate")
    if not 0 <= K <= MAX_TERMS:
        raise ValidationError(f"K must lie in [0, {MAX_TERMS}]")
    mants, exps = [0.5], [1]  # c_0 = 1
    for k in range(1, K + 1):
        f, shift = _ratio(q, k)
        m, e = _normalize(mants[-1] * f, exps[-1] + shift)
        mants.append(m)
        exps.append(e)
    return SeriesPoly(float(q), tuple(mants), tuple(exps))


def recurrence_residuals(poly: SeriesPoly) -> np.ndarray:
    """|c_k (q^k-1)^2 - 2 q^k c_{k-1}| / (|c_k| (q^k-1)^2) for k = 1..K, computed exactly.

    Entries with c_k = 0 are reported as inf unless the whole equation holds exactly.
    """
    q = Fraction(poly.q)
    out = np.empty(poly.K)
    qk = Fraction(1)
    prev = poly.exact(0)
    for k in range(1, poly.K + 1):
        qk *= q
        ck = poly.exact(k)
        lhs = ck * (qk - 1) ** 2
        num = abs(lhs - 2 * qk * prev)
        if ck == 0:
            out[k - 1] = 0.0 if num == 0 else math.inf
        else:
            out[k - 1] = float(num / abs(lhs))
        prev = ck
    return out


def characteristic(q: float, rho: float) -> tuple[float, float]:
    """q^{2 rho} - 2 q^rho + 1 and its rho-derivative."""
    a = q**rho
    return a * a - 2.0 * a + 1.0, 2.0 * math.log(q) * (a * a - a)


@dataclass(frozen=True)
class PhiValue:
    value: float
    truncation: float
    abs_sum: float

    def __float__(self) -> float:
        return self.value


def _terms(poly: SeriesPoly, s: float) -> list[float]:
    if s == 0.0:
        return [poly.coeffs[0]] + [0.0] * poly.K
    ms, es = math.frexp(abs(s))
    sign = -1.0 if s < 0 else 1.0
    pm, pe = 1.0, 0  # s^k as mantissa, exponent
    out = []
    for k, (m, e) in enumerate(zip(poly.mantissas, poly.exponents)):
        if k:
            pm, pe = _normalize(pm * ms, pe + es)
        t = _ldexp(m * pm, e + pe)
        out.append(t * sign if k % 2 else t)
    return out


def eval_with_error(poly: SeriesPoly, s: float) -> PhiValue:
    terms = _terms(poly, float(s))
    value = math.fsum(terms)
    return PhiValue(value, abs(terms[-1]) * poly.K, math.fsum(abs(t) for t in terms))


def eval_phi(poly: SeriesPoly, s: float) -> float:
    """Partial sum at ``s``; raises AccuracyError outside the truncation envelope."""
    r = eval_with_error(poly, s)
    if not math.isfinite(r.value) or r.truncation > ENVELOPE * abs(r.value):
        raise AccuracyError(
            f"s={s} is outside the series accuracy envelope "
            f"(truncation {r.truncation:.3e} vs |phi| {abs(r.value):.3e}); use continue_phi"
        )
    return r.value


def truncation_estimate(poly: SeriesPoly, s: float) -> float:
    return eval_with_error(poly, s).truncation


def continue_phi(poly: SeriesPoly, s: float, base_radius: float) -> float:
    """phi(s) for s > 0 by series inside ``base_radius`` and phi(rt) = 2(1+t)phi(t) - phi(t/r) outside.

    r = max(q, 1/q).  An absolute error bound is carried through the steps;
    if it exceeds CANCELLATION_LIMIT relative to the value, CancellationError
    reports the step.
    """
    s = float(s)
    if not s > 0:
        raise ValidationError("continue_phi needs s > 0")
    if not base_radius > 0:
        raise ValidationError("base_radius must be positive")
    if s <= base_radius:
        return eval_phi(poly, s)
    r = max(poly.q, 1.0 / poly.q)
    n = math.ceil(math.log(s / base_radius) / math.log(r))
    t = s / r**n
    while t > base_radius:  # guard rounding in the step count
        n += 1
        t /= r
    starts = []
    for x in (t / r, t):
        v = eval_with_error(poly, x)
        if v.truncation > ENVELOPE * abs(v.value):
            raise AccuracyError(f"base_radius={base_radius} lies outside the series accuracy envelope")
        starts.append((v.value, v.truncation + 4 * _ULP * v.abs_sum))
    (prev, e_prev), (cur, e_cur) = starts
    for step in range(1, n + 1):
        a = 2.0 * (1.0 + t)
        nxt = a * cur - prev
        e_nxt = a * e_cur + e_prev + 2 * _ULP * (abs(a * cur) + abs(prev))
        if not math.isfinite(nxt) or e_nxt > CANCELLATION_LIMIT * abs(nxt):
            raise CancellationError(
                f"continuation lost accuracy at step {step} of {n} (t={t * r:.6g}, error bound {e_nxt:.3e}, value {nxt:.3e})",
                step,
            )
        prev, e_prev, cur, e_cur = cur, e_cur, nxt, e_nxt
        t *= r
    return cur


def phi(poly: SeriesPoly, s: float, base_radius: float = 1.0) -> float:
    """Series where it is accurate, continuation otherwise."""
    try:
        return eval_phi(poly, s)
    except AccuracyError:
        if s <= 0:
            raise
        return continue_phi(poly, s, base_radius)


def functional_residual(poly: SeriesPoly, s: float) -> float:
    """|(1+s) phi(s) - phi(s/q)/2 - phi(q s)/2|."""
    q = poly.q
    return abs((1 + s) * phi(poly, s) - 0.5 * phi(poly, s / q) - 0.5 * phi(poly, q * s))


def shifted_residual(poly: SeriesPoly, s: float) -> float:
    """|phi(q^2 s) - 2(1 + q s) phi(q s) + phi(s)|."""
    q = poly.q
    return abs(phi(poly, q * q * s) - 2 * (1 + q * s) * phi(poly, q * s) + phi(poly, s))


@dataclass(frozen=True)
class GrowthTable:
    S: np.ndarray
    M: np.ndarray

    def rows(self):
        for a, b in zip(self.S, self.M):
            yield float(a), float(b)

    def log_ratio(self, rho: float) -> np.ndarray:
        """log M(S) / S^rho (S > 0)."""
        keep = self.S > 0
        return np.log(self.M[keep]) / self.S[keep] ** rho

    def log_log_ratio(self) -> np.ndarray:
        """log M(S) / log S (S > 1)."""
        keep = self.S > 1
        return np.log(self.M[keep]) / np.log(self.S[keep])

    def decreasing_from(self, rho: float) -> float | None:
        """Smallest S beyond which log M / S^rho is non-increasing, or None."""
        return _monotone_from(self.S[self.S > 0], self.log_ratio(rho), -1)

    def increasing_from_loglog(self) -> float | None:
        return _monotone_from(self.S[self.S > 1], self.log_log_ratio(), 1)


def _monotone_from(x: np.ndarray, y: np.ndarray, sign: int) -> float | None:
    d = sign * np.diff(y)
    bad = np.flatnonzero(d < 0)
    if not bad.size:
        return float(x[0]) if len(x) else None
    i = bad[-1] + 1
    return float(x[i]) if i < len(x) - 1 else None


def growth_diagnostic(poly: SeriesPoly, S_max: float, n_points: int = 200, base_radius: float = 1.0) -> GrowthTable:
    """Running maxima M(S) of |phi| on a uniform grid over [0, S_max]."""
    if not S_max > 0:
        raise ValidationError("S_max must be positive")
    if n_points < 2:
        raise ValidationError("n_points must be >= 2")
    S = np.linspace(0.0, S_max, n_points)
    vals = np.array([abs(phi(poly, s, base_radius)) if s > 0 else abs(eval_phi(poly, 0.0)) for s in S])
    return GrowthTable(S, np.maximum.accumulate(vals))
