"""Command-line entry point.

Every subcommand writes one CSV (``--out``, default stdout) and a JSON
run manifest (``--manifest``, default ``<out>.manifest.json``; stderr when
writing to stdout).  Exit codes: 0 success, 1 invalid input, 2 a numerical
procedure did not converge (outputs written so far are kept and flagged in
the manifest).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, estimate, qseries, simulate, solve, wkb
from .errors import ConvergenceError, ValidationError
from .model import config_hash, load_model
from .streams import RngStream

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def parse_grid(text: str) -> np.ndarray:
    """``v`` (single point), ``lo:hi:n`` (linear) or ``lo:hi:log:n`` (log-spaced)."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) == 3:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            log = False
        elif len(parts) == 4 and parts[2] == "log":
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[3])
            log = True
        else:
            raise ValueError
    except ValueError:
        raise ValidationError(f"bad grid {text!r}; expected lo:hi:n or lo:hi:log:n") from None
    if n < 1 or (n > 1 and not hi > lo):
        raise ValidationError(f"bad grid {text!r}; need n >= 1 and hi > lo")
    if log:
        if lo <= 0:
            raise ValidationError(f"log grid {text!r} needs lo > 0")
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def _seed(text: str) -> int:
    try:
        seed = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return seed


def _positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {n}")
    return n


def _points(args) -> np.ndarray:
    if args.x_grid is not None:
        return parse_grid(args.x_grid)
    if args.x is not None:
        return np.array([args.x])
    raise ValidationError("one of --x or --x-grid is required")


def load_grid_csv(path: str) -> solve.GridFunction:
    """First two columns of a CSV with a header row, on a uniform grid, as a clamped GridFunction."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, usecols=(0, 1), ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read grid CSV {path}: {exc}") from exc
    x, y = data[:, 0], data[:, 1]
    if len(x) < 3:
        raise ValidationError("grid CSV needs at least 3 rows")
    h = np.diff(x)
    if np.any(h <= 0) or np.max(np.abs(h - h.mean())) > 1e-9 * max(1.0, abs(x[-1])):
        raise ValidationError("grid CSV must be on a uniform increasing grid")
    return solve.GridFunction(float(x[0]), float(x[-1]), y, "clamp")


def _add_common(p, stochastic: bool, model: bool = True, workers: bool = False):
    if model:
        p.add_argument("--model", required=True, help="model config JSON")
    if stochastic:
        p.add_argument("--seed", type=_seed, required=True, help="master seed (u64)")
    if workers:
        p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out", default=None, help="CSV output path (default stdout)")
    p.add_argument("--manifest", default=None, help="manifest path (default <out>.manifest.json)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pantolab", description="Jump-diffusion and pantograph-equation numerics.", allow_abbrev=False)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="dump one jump skeleton", allow_abbrev=False)
    _add_common(p, True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--max-jumps", type=int, required=True, help="number of jumps to simulate")
    p.add_argument("--path-index", type=int, default=0)

    p = sub.add_parser("ruin", help="ruin probability", allow_abbrev=False)
    _add_common(p, True, workers=True)
    p.add_argument("--x", type=float)
    p.add_argument("--x-grid")
    p.add_argument("--paths", type=_positive_int, required=True)
    p.add_argument("--max-jumps", type=_positive_int, required=True)

    p = sub.add_parser("escape", help="escape probability", allow_abbrev=False)
    _add_common(p, True, workers=True)
    p.add_argument("--x", type=float)
    p.add_argument("--x-grid")
    p.add_argument("--method", choices=("series", "pathwise"), default="series")
    p.add_argument("--terms", type=_positive_int, default=2048)
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--paths", type=_positive_int, default=10_000)
    p.add_argument("--max-jumps", type=_positive_int, default=10_000)
    p.add_argument("--barrier-lo", type=float, default=0.0)
    p.add_argument("--barrier-hi", type=float, default=1e6)

    p = sub.add_parser("solve", help="Picard solve of the first-order problem", allow_abbrev=False)
    _add_common(p, False)
    p.add_argument("--y0", type=float, default=1.0)
    p.add_argument("--x-max", type=float, default=20.0)
    p.add_argument("--n-points", type=int, default=2001)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=_positive_int, default=10_000)

    p = sub.add_parser("generator", help="apply the generator to a tabulated function", allow_abbrev=False)
    _add_common(p, False)
    p.add_argument("--f-csv", required=True, help="CSV x,y on a uniform grid")
    p.add_argument("--x-grid", help="evaluation points (default: interior grid nodes)")

    p = sub.add_parser("wkb", help="eikonal and transport profiles", allow_abbrev=False)
    _add_common(p, False, model=False)
    p.add_argument("--u-grid", required=True)
    p.add_argument("--u-ref", type=float, default=None)

    p = sub.add_parser("qseries", help="series solution and growth table", allow_abbrev=False)
    _add_common(p, False, model=False)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--K-terms", type=int, default=200)
    p.add_argument("--base-radius", type=float, default=1.0)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--s-grid", help="points for s,phi output")
    mode.add_argument("--S-max", type=float, help="growth table S,M on [0, S_max]")
    p.add_argument("--n-points", type=int, default=200)

    p = sub.add_parser("check", help="martingale check of a tabulated function", allow_abbrev=False)
    _add_common(p, True, workers=True)
    p.add_argument("--f-csv", required=True, help="CSV x,y on a uniform grid")
    p.add_argument("--x", type=float)
    p.add_argument("--x-grid")
    p.add_argument("--t", type=float, action="append", required=True, help="time horizon; repeatable")
    p.add_argument("--paths", type=_positive_int, required=True)
    return parser


def _cmd_simulate(args, model):
    skel = simulate.sample_skeleton(model, args.x, args.max_jumps, RngStream(args.seed, args.path_index))
    return ["n", "sigma_n", "xi_n", "zeta_n", "S_n", "X_n"], list(skel.rows()), {}


_EST_HEADER = ["x", "value", "std_error", "n_samples", "censored_fraction"]


def _cmd_ruin(args, model):
    rows = [
        estimate.estimate_ruin(model, float(x), args.max_jumps, args.paths, args.seed, args.workers).row(float(x))
        for x in _points(args)
    ]
    return _EST_HEADER, rows, {}


def _cmd_escape(args, model):
    xs = _points(args)
    if args.method == "series":
        res = estimate.escape_series_profile(model, xs, args.terms, args.samples, args.seed, args.eps, args.workers)
        rows = [r.row(float(x)) for x, r in zip(xs, res)]
        return _EST_HEADER, rows, {"upper_bounds": [r.upper for r in res], "eps": args.eps}
    rows = [
        estimate.estimate_escape_pathwise(
            model, float(x), args.barrier_hi, args.barrier_lo, args.max_jumps, args.paths, args.seed, args.workers
        ).row(float(x))
        for x in xs
    ]
    return _EST_HEADER, rows, {}


def _cmd_solve(args, model):
    res = solve.picard_solve(model, args.y0, args.x_max, args.n_points, args.tol, args.max_iter)
    rows = list(zip(res.solution.nodes.tolist(), res.solution.values.tolist()))
    extra = {"converged": res.converged, "iterations": res.iterations, "last_change": float(res.sup_changes[-1])}
    return ["x", "y"], rows, extra


def _cmd_generator(args, model):
    f = load_grid_csv(args.f_csv)
    if args.x_grid is None:
        xs, lf = solve.generator_residuals(model, f)
    else:
        xs = parse_grid(args.x_grid)
        lf = np.atleast_1d(solve.generator_apply(model, f, xs))
    return ["x", "Lf"], list(zip(xs.tolist(), lf.tolist())), {}


def _cmd_wkb(args, model):
    prof = wkb.build_profile(parse_grid(args.u_grid), args.u_ref)
    rows = [r + (float(e),) for r, e in zip(prof.rows(), prof.residual)]
    return ["u", "w", "V", "A0_minus", "A0_plus", "eikonal_residual"], rows, {}


def _cmd_qseries(args, model):
    poly = qseries.series_coefficients(args.q, args.K_terms)
    if args.s_grid is not None:
        rows = [(float(s), qseries.phi(poly, float(s), args.base_radius)) for s in parse_grid(args.s_grid)]
        return ["s", "phi"], rows, {}
    table = qseries.growth_diagnostic(poly, args.S_max, args.n_points, args.base_radius)
    return ["S", "M"], list(table.rows()), {}


def _cmd_check(args, model):
    f = load_grid_csv(args.f_csv)
    rows = []
    for x in _points(args):
        for t in args.t:
            m = estimate.check_martingale(model, f, float(x), t, args.paths, args.seed, args.workers)
            rows.append((float(x), t, m.residual, m.std_error, m.mean, m.target, m.n_paths))
    return ["x", "t", "residual", "std_error", "mean", "target", "n_paths"], rows, {}


COMMANDS = {
    "simulate": _cmd_simulate,
    "ruin": _cmd_ruin,
    "escape": _cmd_escape,
    "solve": _cmd_solve,
    "generator": _cmd_generator,
    "wkb": _cmd_wkb,
    "qseries": _cmd_qseries,
    "check": _cmd_check,
}


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _write_outputs(args, text: str, manifest: dict) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    blob = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    target = args.manifest or (args.out + ".manifest.json" if args.out else None)
    if target:
        Path(target).write_text(blob)
    else:
        sys.stderr.write(blob)


def run(argv=None) -> int:
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        model = load_model(args.model) if getattr(args, "model", None) else None
        manifest = {
            "command": args.command,
            "argv": list(sys.argv[1:] if argv is None else argv),
            "model_config_hash": config_hash(model) if model is not None else None,
            "master_seed": getattr(args, "seed", None),
            "version": __version__,
            "outputs": [args.out] if args.out else ["<stdout>"],
        }
        try:
            header, rows, extra = COMMANDS[args.command](args, model)
        except ConvergenceError as exc:
            manifest.update(status="nonconverged", error=str(exc), wall_time_s=time.perf_counter() - started)
            _write_outputs(args, "", manifest)
            print(f"pantolab {args.command}: did not converge: {exc}", file=sys.stderr)
            return EXIT_NONCONVERGED
        converged = extra.get("converged", True)
        manifest.update(extra)
        manifest.update(status="ok" if converged else "nonconverged", wall_time_s=time.perf_counter() - started)
        _write_outputs(args, format_csv(header, rows), manifest)
        if not converged:
            print(f"pantolab {args.command}: did not converge; partial output written", file=sys.stderr)
            return EXIT_NONCONVERGED
        return EXIT_OK
    except ValidationError as exc:
        print(f"pantolab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"pantolab: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())
