"""Exact jump-skeleton simulation of the multiplicative jump diffusion.

Every jump consumes one row of four uniforms, in this order:

    (waiting time tau_n, jump exponent xi_n, Gaussian for zeta_n, bridge uniform)

so a path is fully determined by its :class:`~pantolab.streams.RngStream`
and never depends on how the rows are batched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtri

from .errors import ValidationError
from .model import ModelSpec, open_unit
from .streams import BRIDGE_LANE, RngStream

DRAWS_PER_JUMP = 4


class JumpDraws(NamedTuple):
    tau: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    u_bridge: np.ndarray


def jumps_from_uniforms(model: ModelSpec, u: np.ndarray) -> JumpDraws:
    """Transform a ``(..., 4)`` block of uniforms into jump variables."""
    tau = -np.log1p(-u[..., 0]) / model.lam
    xi = model.jump_law.xi_from_uniform(u[..., 1])
    zeta = -model.v * tau
    if model.kappa > 0:
        zeta = zeta + model.kappa * np.sqrt(tau) * ndtri(open_unit(u[..., 2]))
    return JumpDraws(tau, xi, zeta, u[..., 3])


def draw_jumps(model: ModelSpec, gen: np.random.Generator, n: int) -> JumpDraws:
    return jumps_from_uniforms(model, gen.random((n, DRAWS_PER_JUMP)))


@dataclass(frozen=True)
class PathSkeleton:
    """One realisation at the jump epochs.

    ``S[n-1]`` and ``X[n-1]`` hold S_n and X_{sigma_n} for n = 1..n_jumps;
    S_0 = 0 and X_0 = x0 are implicit.
    """

    x0: float
    tau: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    S: np.ndarray
    X: np.ndarray

    @property
    def n_jumps(self) -> int:
        return len(self.tau)

    @property
    def sigma(self) -> np.ndarray:
        return np.cumsum(self.tau)

    def closed_form_positions(self) -> np.ndarray:
        """X_{sigma_n} = e^{S_n} (x0 + sum_{i<=n} zeta_i e^{-S_{i-1}})."""
        s_prev = np.concatenate(([0.0], self.S[:-1]))
        return np.exp(self.S) * (self.x0 + np.cumsum(self.zeta * np.exp(-s_prev)))

    def rows(self):
        sigma = self.sigma
        for n in range(self.n_jumps):
            yield n + 1, sigma[n], self.xi[n], self.zeta[n], self.S[n], self.X[n]


def iterate_positions(x0: float, xi: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    out = np.empty(len(xi))
    x = float(x0)
    for n in range(len(xi)):
        x = math.exp(xi[n]) * (x + zeta[n])
        out[n] = x
    return out


def sample_skeleton(model: ModelSpec, x0: float, n_jumps: int, stream: RngStream) -> PathSkeleton:
    if n_jumps < 0:
        raise ValidationError("n_jumps must be >= 0")
    d = draw_jumps(model, stream.generator(), n_jumps)
    S = np.cumsum(d.xi)
    X = iterate_positions(x0, d.xi, d.zeta)
    return PathSkeleton(float(x0), d.tau, d.xi, d.zeta, S, X)


def bridge_normal(stream) -> float:
    if isinstance(stream, np.random.Generator):
        return float(stream.standard_normal())
    return float(stream.generator(BRIDGE_LANE).standard_normal())


def evaluate_between_jumps(skeleton: PathSkeleton, model: ModelSpec, t: float, stream) -> float:
    """Position X_t, given the skeleton, by a Brownian-bridge draw inside the current interval.

    ``stream`` is an :class:`RngStream` (its bridge lane is used) or a numpy Generator.
    """
    if t < 0:
        raise ValidationError("t must be non-negative")
    sigma = skeleton.sigma
    i = int(np.searchsorted(sigma, t, side="right"))  # jumps at or before t
    start = skeleton.x0 if i == 0 else float(skeleton.X[i - 1])
    t_start = 0.0 if i == 0 else float(sigma[i - 1])
    if t == t_start:
        return start
    if i == skeleton.n_jumps:
        raise ValidationError(f"t={t} lies beyond the simulated horizon sigma_n={t_start}")
    s = t - t_start
    if model.kappa == 0:
        return start - model.v * s
    tau = float(skeleton.tau[i])
    zeta = float(skeleton.zeta[i])
    mean = zeta * s / tau
    sd = model.kappa * math.sqrt(s * (tau - s) / tau)
    return start + mean + sd * bridge_normal(stream)


def first_passage_index(S, r: float) -> int | None:
    """Smallest n >= 1 with S_n <= -r, where ``S[n-1]`` holds S_n."""
    if not r > 0:
        raise ValidationError("r must be positive")
    hits = np.flatnonzero(np.asarray(S) <= -r)
    return int(hits[0]) + 1 if hits.size else None


def eta_terms(draws: JumpDraws) -> np.ndarray:
    S = np.cumsum(draws.xi, axis=-1)
    s_prev = np.zeros_like(S)
    s_prev[..., 1:] = S[..., :-1]
    return draws.zeta * np.exp(-s_prev)


def eta_partial_sums(model: ModelSpec, n_terms: int, stream: RngStream) -> np.ndarray:
    """eta_N = sum_{n<=N} zeta_n e^{-S_{n-1}} for N = 1..n_terms."""
    d = draw_jumps(model, stream.generator(), n_terms)
    return np.cumsum(eta_terms(d))


def cauchy_increments(eta: np.ndarray) -> dict[int, float]:
    """|eta_N - eta_{N/2}| at N = 2, 4, 8, ... up to len(eta)."""
    out = {}
    n = 2
    while n <= len(eta):
        out[n] = abs(float(eta[n - 1] - eta[n // 2 - 1]))
        n *= 2
    return out
