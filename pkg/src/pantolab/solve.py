"""Grid functions, the generator as a finite-difference operator, and the Picard solver."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.signal import lfilter

from .errors import ConvergenceError, ValidationError
from .model import ModelSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridFunction:
    """Values on a uniform grid, linearly interpolated.

    ``closure`` is ``"clamp"`` (extend by the end values) or a pair
    ``(c_left, c_right)`` of constants used outside ``[x_lo, x_hi]``.
    """

    x_lo: float
    x_hi: float
    values: np.ndarray
    closure: str | tuple[float, float] = "clamp"
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or len(values) < 3:
            raise ValidationError("a grid function needs at least 3 nodes")
        if not self.x_hi > self.x_lo:
            raise ValidationError("grid needs x_hi > x_lo")
        if self.closure != "clamp":
            cl, cr = self.closure
            object.__setattr__(self, "closure", (float(cl), float(cr)))
        nodes = np.linspace(self.x_lo, self.x_hi, len(values))
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def from_function(cls, fn: Callable, x_lo: float, x_hi: float, n_points: int, closure="clamp") -> "GridFunction":
        nodes = np.linspace(x_lo, x_hi, n_points)
        return cls(x_lo, x_hi, np.asarray(fn(nodes), dtype=float), closure)

    @property
    def n_points(self) -> int:
        return len(self.values)

    @property
    def h(self) -> float:
        return (self.x_hi - self.x_lo) / (self.n_points - 1)

    def __call__(self, x):
        if self.closure == "clamp":
            return np.interp(x, self.nodes, self.values)
        cl, cr = self.closure
        return np.interp(x, self.nodes, self.values, left=cl, right=cr)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.x_lo, self.x_hi, values, self.closure)


def _derivatives(f: Callable, x: np.ndarray, h: float, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives, central where the stencil fits in [lo, hi], one-sided otherwise."""
    f0 = f(x)
    fp, fm = f(x + h), f(x - h)
    d1 = (fp - fm) / (2 * h)
    d2 = (fp - 2 * f0 + fm) / (h * h)
    left = x - h < lo - 1e-12 * h
    right = x + h > hi + 1e-12 * h
    if left.any():
        xl = x[left]
        g = [f(xl + k * h) for k in range(4)]
        d1[left] = (-3 * g[0] + 4 * g[1] - g[2]) / (2 * h)
        d2[left] = (2 * g[0] - 5 * g[1] + 4 * g[2] - g[3]) / (h * h)
    if right.any():
        xr = x[right]
        g = [f(xr - k * h) for k in range(4)]
        d1[right] = (3 * g[0] - 4 * g[1] + g[2]) / (2 * h)
        d2[right] = (2 * g[0] - 5 * g[1] + 4 * g[2] - g[3]) / (h * h)
    return d1, d2


def generator_apply(model: ModelSpec, f: Callable, x, h: float | None = None):
    """(kappa^2/2) f'' - v f' + lam (E[f(alpha x)] - f(x)), derivatives by finite differences.

    For a :class:`GridFunction` the spacing defaults to the grid's and the
    stencil turns one-sided at the grid ends; for a plain callable ``h`` is
    required and the stencil is always central.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(f, GridFunction):
        h = f.h if h is None else h
        lo, hi = f.x_lo, f.x_hi
    else:
        if h is None:
            raise ValidationError("h is required when f is not a GridFunction")
        lo, hi = -math.inf, math.inf
    d1, d2 = _derivatives(f, xs, h, lo, hi)
    out = -model.v * d1 + model.lam * (model.jump_law.expect(f, xs) - f(xs))
    if model.kappa > 0:
        out = out + 0.5 * model.kappa**2 * d2
    return float(out[0]) if np.ndim(x) == 0 else out


def generator_residuals(model: ModelSpec, f: GridFunction) -> tuple[np.ndarray, np.ndarray]:
    """Interior nodes and the generator applied there."""
    xs = f.nodes[1:-1]
    return xs, generator_apply(model, f, xs)


def harmonicity_residual(model: ModelSpec, f: GridFunction) -> float:
    """max over interior nodes of |L f|."""
    return float(np.max(np.abs(generator_residuals(model, f)[1])))


@dataclass(frozen=True)
class PicardResult:
    solution: GridFunction
    converged: bool
    iterations: int
    sup_changes: np.ndarray


def picard_solve(
    model: ModelSpec,
    y0: float,
    x_max: float = 20.0,
    n_points: int = 2001,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    strict: bool = False,
) -> PicardResult:
    """Fixed point of y(x) = e^{-cx} y0 + c int_0^x e^{-c(x-u)} E[y(alpha u)] du, c = lam/v, on [0, x_max].

    First-order case only (kappa = 0).  Values beyond ``x_max`` are clamped.
    Each step integrates the exponential kernel exactly against the linear
    interpolant of E[y(alpha u)] (trapezoid-type product rule), so constants
    are reproduced exactly.  Iteration starts from the free term y0 e^{-cx}.
    """
    if model.kappa != 0:
        raise ValidationError("picard_solve handles the first-order case only (kappa = 0)")
    if not model.v > 0:
        raise ValidationError("picard_solve needs v > 0")
    if n_points < 3 or not x_max > 0:
        raise ValidationError("need n_points >= 3 and x_max > 0")
    c = model.lam / model.v
    xs = np.linspace(0.0, x_max, n_points)
    h = xs[1] - xs[0]
    ch = c * h
    decay = math.exp(-ch)
    # weights of g_k and g_{k+1} over one cell
    w1 = 1.0 - (-math.expm1(-ch)) / ch
    w0 = (-math.expm1(-ch)) / ch - decay
    alphas, probs = model.jump_law.quadrature()
    sample_at = np.multiply.outer(xs, alphas)

    def step(y: np.ndarray) -> np.ndarray:
        g = np.interp(sample_at, xs, y) @ probs
        b = w0 * g[:-1] + w1 * g[1:]
        out = np.empty_like(y)
        out[0] = y0
        out[1:] = lfilter([1.0], [1.0, -decay], b, zi=[decay * y0])[0]
        return out

    y = y0 * np.exp(-c * xs)
    changes = []
    converged = False
    for it in range(1, max_iter + 1):
        y_new = step(y)
        changes.append(float(np.max(np.abs(y_new - y))))
        y = y_new
        if changes[-1] < tol:
            converged = True
            break
    result = PicardResult(GridFunction(0.0, x_max, y, "clamp"), converged, it, np.array(changes))
    if not converged:
        msg = f"Picard iteration did not reach tol={tol} in {max_iter} steps (last change {changes[-1]:.3e})"
        if strict:
            raise ConvergenceError(msg)
        logger.warning(msg)
    return result


class DerivativeBound(NamedTuple):
    lhs: float
    rhs: float
    ok: bool
    identity_error: float | None = None


def derivative_bound_check(model: ModelSpec, f: GridFunction, n_samples: int = 25) -> DerivativeBound:
    """A-priori derivative bound for a candidate harmonic function.

    kappa = 0: max|f'| <= (2 lam / v) max|f|.
    kappa > 0, v > 0: max|f'| <= max|g| / gamma, together with the identity
    f'(x) = int_0^inf g(x+u) e^{-gamma u} du at ``n_samples`` interior nodes,
    where gamma = 2v/kappa^2 and g = (2 lam/kappa^2)(E[f(alpha x)] - f(x)).
    kappa > 0, v = 0: max|f''| <= max|g|  together with f'' = -g.
    """
    xs = f.nodes
    d1, d2 = _derivatives(f, xs, f.h, f.x_lo, f.x_hi)
    if model.kappa == 0:
        if not model.v > 0:
            raise ValidationError("derivative bound needs v > 0 when kappa = 0")
        lhs = float(np.max(np.abs(d1)))
        rhs = 2 * model.lam / model.v * float(np.max(np.abs(f.values)))
        return DerivativeBound(lhs, rhs, lhs <= rhs * (1 + 1e-6))

    g = 2 * model.lam / model.kappa**2 * (model.jump_law.expect(f, xs) - f.values)
    g_norm = float(np.max(np.abs(g)))
    interior = slice(1, -1)
    scale = max(float(np.max(np.abs(d1[interior]))), float(np.max(np.abs(d2[interior]))), g_norm, 1e-300)
    if model.v == 0:
        lhs = float(np.max(np.abs(d2[interior])))
        err = float(np.max(np.abs(d2[interior] + g[interior])))
        tol = 10 * f.h * scale
        return DerivativeBound(lhs, g_norm, lhs <= g_norm * (1 + 1e-6) and err <= tol, err)

    gamma = 2 * model.v / model.kappa**2
    idx = np.unique(np.linspace(1, len(xs) - 2, min(n_samples, len(xs) - 2)).astype(int))
    errs = []
    for i in idx:
        tail = xs[i:] - xs[i]
        integrand = g[i:] * np.exp(-gamma * tail)
        integral = np.trapezoid(integrand, tail) + g[-1] * math.exp(-gamma * tail[-1]) / gamma
        errs.append(abs(d1[i] - integral))
    err = max(errs)
    lhs = float(np.max(np.abs(d1)))
    rhs = g_norm / gamma
    tol = 10 * f.h * scale * (1 + 1 / gamma)
    return DerivativeBound(lhs, rhs, lhs <= rhs * (1 + 1e-6) and err <= tol, err)
