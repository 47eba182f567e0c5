"""Numerics for balanced pantograph equations and their multiplicative jump diffusions."""

__version__ = "0.1.0"

from .errors import AccuracyError, CancellationError, ConvergenceError, ValidationError
from .model import (
    Discrete,
    JumpLaw,
    LogNormal,
    ModelSpec,
    UniformLog,
    compute_K,
    expect_f_alpha_x,
    load_model,
    model_from_coefficients,
    model_from_dict,
    two_point_law,
)
from .streams import RngStream
from .simulate import PathSkeleton, eta_partial_sums, evaluate_between_jumps, first_passage_index, sample_skeleton
from .solve import GridFunction, derivative_bound_check, generator_apply, harmonicity_residual, picard_solve
from .estimate import (
    check_martingale,
    escape_series_profile,
    estimate_escape_pathwise,
    estimate_escape_series,
    estimate_ruin,
    sample_eta,
)
from .wkb import build_profile, eikonal_w, phase_V, transport_A0
from .qseries import SeriesPoly, continue_phi, eval_phi, growth_diagnostic, series_coefficients

__all__ = [name for name in dir() if not name.startswith("_")]
