"""Leading-order WKB numerics for y'(x) + y(x) = (y(qx) + y(x/q))/2 with q = 1 -/+ eps.

With x = u/eps and f(u) ~ A0(u) exp(V(u)/eps), the eikonal equation reads
1 + V' = cosh(u V'); writing w = u V' it becomes u = w / (cosh w - 1).
The amplitude solves

    (ln A0)' = [u^2 V'' cosh w + w e^{branch * w}] / (2 (1 - u sinh w)),

with ``branch = -1`` or ``+1`` selecting the sign of the exponent; the two
signs belong to the two choices q = 1 + eps and q = 1 - eps.  For large u,
w ~ 2/u and ln A0 ~ ln u + 2 branch / u + const.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ConvergenceError, ValidationError

BRANCHES = (-1, 1)


def _g(w: float) -> float:
    """w / (cosh w - 1), with cosh w - 1 written as 2 sinh^2(w/2)."""
    return w / (2.0 * math.sinh(0.5 * w) ** 2)


def _bracket(u: float) -> tuple[float, float]:
    if u >= 1.0:
        guess = 2.0 / u
    elif u < 1 / math.e:
        guess = max(-math.log(u) + math.log(-math.log(u)), 1.0)
    else:
        guess = 1.0
    lo, hi = 0.5 * guess, 2.0 * guess
    while _g(lo) < u:
        lo *= 0.5
    while _g(hi) > u:
        hi *= 2.0
    return lo, hi


def eikonal_w(u: float) -> float:
    """The unique w > 0 with w / (cosh w - 1) = u."""
    u = float(u)
    if not (u > 0 and math.isfinite(u)):
        raise ValidationError(f"eikonal_w needs finite u > 0, got {u}")
    lo, hi = _bracket(u)
    while (hi - lo) > 1e-8 * hi:
        mid = 0.5 * (lo + hi)
        if _g(mid) > u:
            lo = mid
        else:
            hi = mid
    w = 0.5 * (lo + hi)
    # Newton on ln w - ln(cosh w - 1) - ln u, derivative 1/w - coth(w/2)
    log_u = math.log(u)
    for _ in range(2):
        F = math.log(w) - math.log(2.0) - 2.0 * math.log(math.sinh(0.5 * w)) - log_u
        w -= F / (1.0 / w - 1.0 / math.tanh(0.5 * w))
    return w


def eikonal_residual(u, w):
    """|1 + w/u - cosh w| elementwise."""
    u, w = np.asarray(u, float), np.asarray(w, float)
    return np.abs(1.0 + w / u - np.cosh(w))


def _w_prime(u: float, w: float) -> float:
    return 2.0 * math.sinh(0.5 * w) ** 2 / (1.0 - u * math.sinh(w))


def log_amplitude_rate(u: float, branch: int) -> float:
    """d(ln A0)/du at ``u``."""
    if branch not in BRANCHES:
        raise ValidationError("branch must be -1 or +1")
    w = eikonal_w(u)
    denom = 1.0 - u * math.sinh(w)
    u2_v2 = u * _w_prime(u, w) - w
    return 0.5 * (u2_v2 * math.cosh(w) + w * math.exp(branch * w)) / denom


def _cumulative(fn, log_nodes: np.ndarray, anchor: int, what: str) -> np.ndarray:
    """Integrals of ``fn`` (in the variable t = ln u) from node ``anchor`` to every node."""
    pieces = np.zeros(len(log_nodes))
    for i in range(1, len(log_nodes)):
        out = quad(fn, log_nodes[i - 1], log_nodes[i], epsabs=1e-13, epsrel=1e-12, limit=200, full_output=1)
        if len(out) > 3:
            raise ConvergenceError(f"{what}: quadrature failed on [{log_nodes[i - 1]}, {log_nodes[i]}]: {out[3]}")
        pieces[i] = out[0]
    total = np.cumsum(pieces)
    return total - total[anchor]


def _check_grid(u_grid) -> np.ndarray:
    u = np.asarray(u_grid, dtype=float)
    if u.ndim != 1 or len(u) < 1 or np.any(u <= 0) or np.any(np.diff(u) <= 0):
        raise ValidationError("u grid must be positive and strictly increasing")
    return u


def phase_V(u_grid, u_ref: float) -> np.ndarray:
    """V(u) = int_{u_ref}^{u} w(s)/s ds on the grid; ``u_ref`` must be a grid node."""
    u = _check_grid(u_grid)
    hits = np.flatnonzero(u == u_ref)
    if not hits.size:
        raise ValidationError("u_ref must be one of the grid nodes")
    return _cumulative(lambda t: eikonal_w(math.exp(t)), np.log(u), int(hits[0]), "phase_V")


def transport_A0(u_grid, branch: int, A0_ref: float = 1.0) -> np.ndarray:
    """A0 on the grid, anchored at the first node to ``A0_ref``."""
    u = _check_grid(u_grid)
    if not A0_ref > 0:
        raise ValidationError("A0_ref must be positive")
    if branch not in BRANCHES:
        raise ValidationError("branch must be -1 or +1")
    rate = lambda t: math.exp(t) * log_amplitude_rate(math.exp(t), branch)  # noqa: E731
    return A0_ref * np.exp(_cumulative(rate, np.log(u), 0, "transport_A0"))


@dataclass(frozen=True)
class WkbProfile:
    u: np.ndarray
    w: np.ndarray
    V: np.ndarray
    A0_minus: np.ndarray
    A0_plus: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return eikonal_residual(self.u, self.w)

    def u_sinh_w(self) -> np.ndarray:
        return self.u * np.sinh(self.w)

    def log_envelope(self, eps: float, branch: int) -> np.ndarray:
        """ln(A0 e^{V/eps}) for one branch."""
        a0 = self.A0_minus if branch == -1 else self.A0_plus
        return np.log(a0) + self.V / eps

    def rows(self):
        for row in zip(self.u, self.w, self.V, self.A0_minus, self.A0_plus):
            yield tuple(float(v) for v in row)


def build_profile(u_grid, u_ref: float | None = None, A0_ref: float = 1.0) -> WkbProfile:
    u = _check_grid(u_grid)
    u_ref = float(u[0]) if u_ref is None else u_ref
    w = np.array([eikonal_w(x) for x in u])
    return WkbProfile(
        u=u,
        w=w,
        V=phase_V(u, u_ref),
        A0_minus=transport_A0(u, -1, A0_ref),
        A0_plus=transport_A0(u, 1, A0_ref),
    )
