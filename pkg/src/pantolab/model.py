"""Model parameters, jump laws and the expectation operator E[f(alpha x)].

The process moves as ``kappa * B_t - v * t`` between jumps and, at the
arrival times of a rate-``lam`` Poisson clock, multiplies its position by
``alpha = exp(xi)`` drawn from a :class:`JumpLaw`.  Harmonic functions of
its generator solve

    -a2 y''(x) + a1 y'(x) + y(x) = E[y(alpha x)],   a1 = v/lam, a2 = kappa^2/(2 lam).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ConvergenceError, ValidationError

# Tail mass dropped when truncating continuous laws for quadrature.
TRUNCATION_MASS = 1e-10
DEFAULT_QUAD_ORDER = 64


def open_unit(u: np.ndarray) -> np.ndarray:
    """Map uniforms from [0, 1) into (0, 1) so inverse CDFs stay finite."""
    return np.where(u == 0.0, 2.0**-54, u)


@lru_cache(maxsize=16)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


class JumpLaw:
    """Distribution of the multiplier alpha, parameterised through xi = ln(alpha)."""

    kind: str = ""

    @property
    def mean_log(self) -> float:
        raise NotImplementedError

    @property
    def mean_abs_log(self) -> float:
        raise NotImplementedError

    @property
    def std_log(self) -> float:
        raise NotImplementedError

    @property
    def is_degenerate(self) -> bool:
        return False

    def xi_from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF transform of uniforms in [0, 1) to draws of xi."""
        raise NotImplementedError

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Multipliers alpha_j and weights w_j with E[g(alpha)] ~ sum w_j g(alpha_j)."""
        raise NotImplementedError

    def expect(self, f: Callable[[np.ndarray], np.ndarray], x) -> np.ndarray | float:
        """E[f(alpha x)] for scalar or array ``x``."""
        alphas, weights = self.quadrature()
        xs = np.asarray(x, dtype=float)
        vals = np.asarray(f(np.multiply.outer(xs, alphas)), dtype=float)
        out = vals @ weights
        return float(out) if xs.ndim == 0 else out

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Discrete(JumpLaw):
    """Finitely many atoms ``(alpha_j, p_j)``."""

    atoms: tuple[tuple[float, float], ...]
    allow_degenerate: bool = False
    kind: str = field(default="discrete", init=False, repr=False)

    def __post_init__(self):
        atoms = tuple((float(a), float(p)) for a, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ValidationError("discrete jump law needs at least one atom")
        for a, p in atoms:
            if not (a > 0 and math.isfinite(a)):
                raise ValidationError(f"atom alpha={a} must be positive and finite")
            if not p > 0:
                raise ValidationError(f"atom probability p={p} must be positive")
        total = math.fsum(p for _, p in atoms)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"atom probabilities sum to {total!r}, not 1")
        if self.is_degenerate and not self.allow_degenerate:
            raise ValidationError(
                "jump law is concentrated at alpha = 1; pass allow_degenerate=True to build it"
            )

    @property
    def alphas(self) -> np.ndarray:
        return np.array([a for a, _ in self.atoms])

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms])

    @property
    def mean_log(self) -> float:
        return math.fsum(p * math.log(a) for a, p in self.atoms)

    @property
    def mean_abs_log(self) -> float:
        return math.fsum(p * abs(math.log(a)) for a, p in self.atoms)

    @property
    def std_log(self) -> float:
        m = self.mean_log
        return math.sqrt(math.fsum(p * (math.log(a) - m) ** 2 for a, p in self.atoms))

    @property
    def is_degenerate(self) -> bool:
        return all(a == 1.0 for a, _ in self.atoms)

    def xi_from_uniform(self, u):
        cum = np.cumsum(self.probs)
        idx = np.searchsorted(cum, u, side="right")
        np.minimum(idx, len(self.atoms) - 1, out=idx)
        return np.log(self.alphas)[idx]

    def quadrature(self):
        return self.alphas, self.probs

    def to_dict(self):
        d = {"type": "discrete", "atoms": [[a, p] for a, p in self.atoms]}
        if self.allow_degenerate:
            d["allow_degenerate"] = True
        return d


def _check_mass(mass: float, expected: float, order: int) -> None:
    if abs(mass - expected) > TRUNCATION_MASS:
        raise ConvergenceError(
            f"{order}-node quadrature captures mass {mass!r}, expected {expected!r}; "
            "raise quad_order"
        )


@dataclass(frozen=True)
class LogNormal(JumpLaw):
    """xi ~ Normal(m, s^2)."""

    m: float
    s: float
    quad_order: int = DEFAULT_QUAD_ORDER
    kind: str = field(default="lognormal", init=False, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.m) and self.s > 0 and math.isfinite(self.s)):
            raise ValidationError(f"lognormal law needs finite m and s > 0, got m={self.m}, s={self.s}")

    @property
    def mean_log(self) -> float:
        return float(self.m)

    @property
    def mean_abs_log(self) -> float:
        m, s = self.m, self.s
        return s * math.sqrt(2 / math.pi) * math.exp(-(m * m) / (2 * s * s)) + m * (1 - 2 * ndtr(-m / s))

    @property
    def std_log(self) -> float:
        return float(self.s)

    def xi_from_uniform(self, u):
        return self.m + self.s * ndtri(open_unit(np.asarray(u)))

    def quadrature(self):
        return _lognormal_quadrature(self.m, self.s, self.quad_order)

    def to_dict(self):
        return {"type": "lognormal", "m": self.m, "s": self.s}


@lru_cache(maxsize=64)
def _lognormal_quadrature(m: float, s: float, order: int):
    z_max = -float(ndtri(TRUNCATION_MASS / 2))
    nodes, weights = _legendre(order)
    z = z_max * nodes
    w = z_max * weights * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    _check_mass(math.fsum(w), 1.0 - TRUNCATION_MASS, order)
    w = w / math.fsum(w)
    return np.exp(m + s * z), w


@dataclass(frozen=True)
class UniformLog(JumpLaw):
    """xi ~ Uniform[lo, hi]."""

    lo: float
    hi: float
    quad_order: int = DEFAULT_QUAD_ORDER
    kind: str = field(default="uniformlog", init=False, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValidationError(f"uniformlog law needs finite lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def mean_log(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def mean_abs_log(self) -> float:
        lo, hi = self.lo, self.hi
        if lo >= 0:
            return 0.5 * (lo + hi)
        if hi <= 0:
            return -0.5 * (lo + hi)
        return (lo * lo + hi * hi) / (2 * (hi - lo))

    @property
    def std_log(self) -> float:
        return (self.hi - self.lo) / math.sqrt(12)

    def xi_from_uniform(self, u):
        return self.lo + (self.hi - self.lo) * np.asarray(u)

    def quadrature(self):
        nodes, weights = _legendre(self.quad_order)
        half = 0.5 * (self.hi - self.lo)
        xi = self.lo + half * (nodes + 1.0)
        return np.exp(xi), weights / weights.sum()

    def to_dict(self):
        return {"type": "uniformlog", "lo": self.lo, "hi": self.hi}


def two_point_law(q: float) -> Discrete:
    """The symmetric law {q, 1/q} with probability 1/2 each."""
    if not q > 0:
        raise ValidationError("q must be positive")
    return Discrete(((q, 0.5), (1.0 / q, 0.5)), allow_degenerate=(q == 1.0))


def compute_K(law: JumpLaw) -> float:
    """Mean of ln(alpha) under ``law``."""
    return law.mean_log


def expect_f_alpha_x(law: JumpLaw, f: Callable, x: float) -> float:
    """E[f(alpha x)]; exact for discrete laws, Gauss-Legendre in xi otherwise."""
    return float(law.expect(f, float(x)))


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of the jump diffusion.  The instantaneous drift is ``-v``."""

    kappa: float
    v: float
    lam: float
    jump_law: JumpLaw

    def __post_init__(self):
        for name in ("kappa", "v", "lam"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ValidationError(f"{name} must be finite, got {val}")
            object.__setattr__(self, name, float(val))
        if self.kappa < 0 or self.v < 0:
            raise ValidationError("kappa and v must be non-negative")
        if not self.lam > 0:
            raise ValidationError("jump intensity lambda must be positive")
        if self.kappa == 0 and self.v == 0:
            raise ValidationError("kappa and v cannot both vanish (a1 = a2 = 0)")
        if not isinstance(self.jump_law, JumpLaw):
            raise ValidationError("jump_law must be a JumpLaw")

    @property
    def a1(self) -> float:
        return self.v / self.lam

    @property
    def a2(self) -> float:
        return self.kappa**2 / (2 * self.lam)

    @property
    def K(self) -> float:
        return compute_K(self.jump_law)

    def require_nondegenerate(self) -> None:
        if self.jump_law.is_degenerate:
            raise ValidationError("jump law degenerates to alpha = 1; estimators need P{alpha != 1} > 0")

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "v": self.v, "lambda": self.lam, "jump_law": self.jump_law.to_dict()}


def model_from_coefficients(a1: float, a2: float, law: JumpLaw, lam: float = 1.0) -> ModelSpec:
    """Build the process whose harmonic functions solve the equation with coefficients a1, a2."""
    if a1 < 0 or a2 < 0:
        raise ValidationError("a1 and a2 must be non-negative")
    if a1 == 0 and a2 == 0:
        raise ValidationError("a1 and a2 cannot both vanish")
    return ModelSpec(kappa=math.sqrt(2 * a2 * lam), v=a1 * lam, lam=lam, jump_law=law)


def jump_law_from_dict(d: dict) -> JumpLaw:
    try:
        kind = d["type"]
        if kind == "discrete":
            return Discrete(tuple((a, p) for a, p in d["atoms"]), allow_degenerate=bool(d.get("allow_degenerate", False)))
        if kind == "lognormal":
            return LogNormal(float(d["m"]), float(d["s"]))
        if kind == "uniformlog":
            return UniformLog(float(d["lo"]), float(d["hi"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed jump_law entry: {exc!r}") from exc
    raise ValidationError(f"unknown jump_law type {kind!r}")


def model_from_dict(d: dict) -> ModelSpec:
    try:
        return ModelSpec(
            kappa=float(d["kappa"]),
            v=float(d["v"]),
            lam=float(d["lambda"]),
            jump_law=jump_law_from_dict(d["jump_law"]),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed model config: missing or bad field {exc!r}") from exc


def load_model(path: str | Path) -> ModelSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"model config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("model config must be a JSON object")
    return model_from_dict(data)


def config_hash(model: ModelSpec) -> str:
    canonical = json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def random_model(rng: np.random.Generator, kappa_zero: bool | None = None) -> ModelSpec:
    """A random valid model, used by property tests and the acceptance suite."""
    kind = rng.integers(3)
    if kind == 0:
        n = int(rng.integers(1, 5))
        alphas = np.exp(rng.uniform(-2, 2, size=n))
        p = rng.uniform(0.1, 1.0, size=n)
        p /= p.sum()
        p[-1] = 1.0 - math.fsum(p[:-1])
        law: JumpLaw = Discrete(tuple(zip(alphas, p)))
    elif kind == 1:
        law = LogNormal(float(rng.uniform(-1, 1)), float(rng.uniform(0.1, 1.5)))
    else:
        lo = float(rng.uniform(-2, 1))
        law = UniformLog(lo, lo + float(rng.uniform(0.1, 2)))
    if kappa_zero is None:
        kappa_zero = bool(rng.integers(2))
    kappa = 0.0 if kappa_zero else float(rng.uniform(0.1, 2))
    v = float(rng.uniform(0.1, 2)) if kappa_zero or rng.integers(2) else 0.0
    return ModelSpec(kappa=kappa, v=v, lam=float(rng.uniform(0.2, 3)), jump_law=law)

