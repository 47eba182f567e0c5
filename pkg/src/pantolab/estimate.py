"""Monte Carlo estimators: ruin probability, escape probability, martingale checks.

Between jumps with ``kappa > 0`` a level crossing is detected from the exact
law of the Brownian-bridge minimum.  For a bridge of duration ``tau`` from
``a`` to ``b`` (both measured above the level) and a uniform ``u``,

    min = (a + b - sqrt((a - b)^2 - 2 kappa^2 tau ln u)) / 2,

and ``min <= 0`` is equivalent to ``4 a b <= -2 kappa^2 tau ln u``, the form
used here because it cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .errors import ValidationError
from .model import ModelSpec
from .parallel import run_chunks
from .simulate import (
    PathSkeleton,
    draw_jumps,
    eta_terms,
    evaluate_between_jumps,
    iterate_positions,
    jumps_from_uniforms,
    DRAWS_PER_JUMP,
)
from .solve import GridFunction
from .streams import RngStream

HIT_LOW, HIT_HIGH, CENSORED = 0, 1, 2

ETA_BATCH = 256
FIRST_BLOCK = 32
MAX_BLOCK = 512


@dataclass(frozen=True)
class EstimateResult:
    value: float
    std_error: float
    n_samples: int
    censored_fraction: float
    upper: float | None = None

    def row(self, x: float) -> tuple:
        return (x, self.value, self.std_error, self.n_samples, self.censored_fraction)


def _proportion(k: int, n: int, censored: int = 0, upper: float | None = None) -> EstimateResult:
    p = k / n
    return EstimateResult(p, math.sqrt(p * (1 - p) / n), n, censored / n, upper)


def bridge_minimum(a, b, duration, kappa: float, u):
    """Inverse-CDF sample of the minimum of a Brownian bridge from ``a`` to ``b``."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    return 0.5 * (a + b - np.sqrt((a - b) ** 2 - 2 * kappa**2 * np.asarray(duration) * np.log(u)))


def bridge_hits_zero(a, b, duration, kappa: float, u):
    """Whether the bridge minimum sampled from ``u`` is <= 0, for a, b > 0."""
    return 4.0 * a * b <= -2.0 * kappa**2 * duration * np.log(u)


def classify_path(model: ModelSpec, x: float, lo: float, hi: float, max_jumps: int, stream: RngStream) -> int:
    """First exit of ``(lo, hi)``: HIT_LOW, HIT_HIGH, or CENSORED after ``max_jumps`` jumps.

    The lower level is monitored continuously; the upper one at the jump
    epochs (pre- and post-jump positions).
    """
    if x <= lo:
        return HIT_LOW
    if x >= hi:
        return HIT_HIGH
    gen = stream.generator()
    start = float(x)
    done = 0
    block = FIRST_BLOCK
    with np.errstate(over="ignore", invalid="ignore"):
        while done < max_jumps:
            m = min(block, max_jumps - done)
            d = draw_jumps(model, gen, m)
            S = np.cumsum(d.xi)
            s_prev = np.zeros(m)
            s_prev[1:] = S[:-1]
            Y = start + np.cumsum(d.zeta * np.exp(-s_prev))
            pre = np.exp(s_prev) * Y
            post = np.exp(S) * Y
            low = pre <= lo
            if model.kappa > 0:
                a = np.empty(m)
                a[0] = start
                a[1:] = post[:-1]
                low |= bridge_hits_zero(a - lo, pre - lo, d.tau, model.kappa, d.u_bridge)
            high = (pre >= hi) | (post >= hi)
            hit = low | high
            if hit.any():
                i = int(np.argmax(hit))
                return HIT_LOW if low[i] else HIT_HIGH
            done += m
            start = float(post[-1])
            if not math.isfinite(start):
                # beyond float range no further crossing is representable
                break
            block = min(2 * block, MAX_BLOCK)
    return CENSORED


def _classify_chunk(model, x, lo, hi, max_jumps, seed, start, stop):
    return np.array(
        [classify_path(model, x, lo, hi, max_jumps, RngStream(seed, i)) for i in range(start, stop)],
        dtype=np.int8,
    )


def _classify(model, x, lo, hi, max_jumps, n_paths, seed, workers) -> np.ndarray:
    if n_paths < 1:
        raise ValidationError("n_paths must be >= 1")
    if max_jumps < 0:
        raise ValidationError("max_jumps must be >= 0")
    fn = partial(_classify_chunk, model, float(x), float(lo), float(hi), int(max_jumps), int(seed))
    return run_chunks(fn, n_paths, workers)


def estimate_ruin(
    model: ModelSpec, x: float, max_jumps: int, n_paths: int, seed: int, workers: int = 1
) -> EstimateResult:
    """P_x{T_0 < infinity}, T_0 = first time X_t <= 0.  Censored paths count as survivors."""
    model.require_nondegenerate()
    if x <= 0:
        return EstimateResult(1.0, 0.0, n_paths, 0.0)
    codes = _classify(model, x, 0.0, math.inf, max_jumps, n_paths, seed, workers)
    return _proportion(int(np.sum(codes == HIT_LOW)), n_paths, int(np.sum(codes == CENSORED)))


def estimate_escape_pathwise(
    model: ModelSpec,
    x: float,
    barrier_hi: float,
    barrier_lo: float,
    max_jumps: int,
    n_paths: int,
    seed: int,
    workers: int = 1,
) -> EstimateResult:
    """Fraction of paths reaching ``barrier_hi`` before ``barrier_lo``.

    Approaches the escape probability only as the barriers widen.
    """
    model.require_nondegenerate()
    if not barrier_lo < barrier_hi:
        raise ValidationError(f"need barrier_lo < barrier_hi, got {barrier_lo} and {barrier_hi}")
    codes = _classify(model, x, barrier_lo, barrier_hi, max_jumps, n_paths, seed, workers)
    return _proportion(int(np.sum(codes == HIT_HIGH)), n_paths, int(np.sum(codes == CENSORED)))


def _eta_chunk(model, n_terms, seed, start, stop):
    half = max(n_terms // 2, 1)
    out = np.empty((stop - start, 2))
    u = np.empty((min(ETA_BATCH, stop - start), n_terms, DRAWS_PER_JUMP))
    for b0 in range(start, stop, ETA_BATCH):
        b1 = min(b0 + ETA_BATCH, stop)
        for i in range(b0, b1):
            u[i - b0] = RngStream(seed, i).generator().random((n_terms, DRAWS_PER_JUMP))
        eta = np.cumsum(eta_terms(jumps_from_uniforms(model, u[: b1 - b0])), axis=-1)
        out[b0 - start : b1 - start, 0] = eta[:, -1]
        out[b0 - start : b1 - start, 1] = eta[:, half - 1]
    return out


@dataclass(frozen=True)
class EtaSample:
    """Truncated draws eta_N of the series sum zeta_n e^{-S_{n-1}}, with eta_{N/2} for diagnostics."""

    eta: np.ndarray
    eta_half: np.ndarray
    n_terms: int

    @property
    def n_samples(self) -> int:
        return len(self.eta)

    def estimate(self, x: float, eps: float = 1e-3) -> EstimateResult:
        """P{eta > -x} as ``value`` and P{eta > -x - eps} as ``upper``.

        A sample counts as censored when the last Cauchy increment
        |eta_N - eta_{N/2}| exceeds its distance to the threshold.
        """
        n = self.n_samples
        lower = int(np.count_nonzero(self.eta > -x))
        upper = int(np.count_nonzero(self.eta > -x - eps))
        undecided = int(np.count_nonzero(np.abs(self.eta - self.eta_half) > np.abs(self.eta + x)))
        return _proportion(lower, n, undecided, upper / n)

    def profile(self, xs: Sequence[float], eps: float = 1e-3) -> list[EstimateResult]:
        return [self.estimate(float(x), eps) for x in xs]

    def quantile_neg_eta(self, p: float) -> float:
        return float(np.quantile(-self.eta, p))

    def grid_function(self, x_lo: float, x_hi: float, n_points: int) -> GridFunction:
        """Tabulate x -> P{eta > -x} with clamp closure."""
        xs = np.linspace(x_lo, x_hi, n_points)
        neg = np.sort(-self.eta)
        values = np.searchsorted(neg, xs, side="left") / self.n_samples
        return GridFunction(x_lo, x_hi, values, closure="clamp")


def sample_eta(model: ModelSpec, n_terms: int, n_samples: int, seed: int, workers: int = 1) -> EtaSample:
    if n_terms < 1 or n_samples < 1:
        raise ValidationError("n_terms and n_samples must be >= 1")
    fn = partial(_eta_chunk, model, int(n_terms), int(seed))
    out = run_chunks(fn, n_samples, workers, align=ETA_BATCH).reshape(-1, 2)
    return EtaSample(out[:, 0].copy(), out[:, 1].copy(), int(n_terms))


def _require_positive_K(model: ModelSpec) -> None:
    model.require_nondegenerate()
    if not model.K > 0:
        raise ValidationError(f"series estimator needs K > 0 (got K={model.K}); the series need not converge")


def estimate_escape_series(
    model: ModelSpec,
    x: float,
    n_terms: int,
    n_samples: int,
    seed: int,
    eps: float = 1e-3,
    workers: int = 1,
) -> EstimateResult:
    """Escape probability bracketed as P{eta > -x} <= f_inf(x) <= P{eta > -x - eps}."""
    _require_positive_K(model)
    return sample_eta(model, n_terms, n_samples, seed, workers).estimate(x, eps)


def escape_series_profile(
    model: ModelSpec,
    xs: Sequence[float],
    n_terms: int,
    n_samples: int,
    seed: int,
    eps: float = 1e-3,
    workers: int = 1,
) -> list[EstimateResult]:
    """Series estimates on a grid of starting points, all from one set of draws."""
    _require_positive_K(model)
    return sample_eta(model, n_terms, n_samples, seed, workers).profile(xs, eps)


def skeleton_until(model: ModelSpec, x: float, t: float, stream: RngStream) -> PathSkeleton:
    """Skeleton extended jump by jump until sigma_n exceeds ``t``."""
    gen = stream.generator()
    parts = []
    elapsed = 0.0
    block = max(8, int(2 * model.lam * t) + 8)
    while elapsed <= t:
        d = draw_jumps(model, gen, block)
        parts.append(d)
        elapsed += float(np.sum(d.tau))
    tau = np.concatenate([d.tau for d in parts])
    xi = np.concatenate([d.xi for d in parts])
    zeta = np.concatenate([d.zeta for d in parts])
    n = int(np.searchsorted(np.cumsum(tau), t, side="right")) + 1
    tau, xi, zeta = tau[:n], xi[:n], zeta[:n]
    return PathSkeleton(float(x), tau, xi, zeta, np.cumsum(xi), iterate_positions(x, xi, zeta))


def position_at(model: ModelSpec, x: float, t: float, stream: RngStream) -> float:
    return evaluate_between_jumps(skeleton_until(model, x, t, stream), model, t, stream)


def _position_chunk(model, x, t, seed, start, stop):
    return np.array([position_at(model, x, t, RngStream(seed, i)) for i in range(start, stop)])


def sample_positions(model: ModelSpec, x: float, t: float, n_paths: int, seed: int, workers: int = 1) -> np.ndarray:
    if t < 0:
        raise ValidationError("t must be non-negative")
    return run_chunks(partial(_position_chunk, model, float(x), float(t), int(seed)), n_paths, workers)


@dataclass(frozen=True)
class MartingaleCheck:
    residual: float
    std_error: float
    mean: float
    target: float
    n_paths: int

    def __float__(self) -> float:
        return self.residual


def check_martingale(
    model: ModelSpec,
    f: Callable[[np.ndarray], np.ndarray],
    x: float,
    t: float,
    n_paths: int,
    seed: int,
    workers: int = 1,
) -> MartingaleCheck:
    """Compare the sample mean of f(X_t) with f(x)."""
    if n_paths < 2:
        raise ValidationError("n_paths must be >= 2")
    values = np.asarray(f(sample_positions(model, x, t, n_paths, seed, workers)), dtype=float)
    mean = math.fsum(values) / n_paths
    std = math.sqrt(math.fsum((values - mean) ** 2) / (n_paths - 1))
    target = float(np.asarray(f(np.array([float(x)])))[0])
    return MartingaleCheck(abs(mean - target), std / math.sqrt(n_paths), mean, target, n_paths)
