"""Command-line driver.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
(solver non-convergence or explicit blow-up), 3 verification threshold missed.
The output directory comes from the config's ``output_dir`` unless the
``CCH_OUTPUT_DIR`` environment variable is set.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .model import ModelParams
from .spectral import GridSpec, SpectralField, make_grid, norms
from .steppers import Blowup, NonConvergence, run, scheme_operator, step_implicit
from .verification import (
    convergence_study_space,
    convergence_study_time,
    dense_direct_step,
    dense_galerkin_apply,
    h2_borderline_profile,
    smooth_profile,
)

log = logging.getLogger("convective_ch")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3
TIME_ORDER_WINDOW = (0.85, 1.15)
SPACE_ORDER_MIN = 1.7
ORACLE_TOL = 1e-10
DIRECT_SOLVE_TOL = 1e-8
ORACLE_PARAMS = ModelParams(gamma=0.8, gamma1=0.6, gamma2=1.2, drift=(1.0, 0.7))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def initial_field(cfg: fileio.RunConfig, grid: GridSpec | None = None) -> SpectralField:
    grid = grid or cfg.grid
    name = cfg.initial
    if name == "zero":
        return SpectralField.zeros(grid)
    if name == "smooth":
        return smooth_profile(grid)
    if name == "h2_borderline":
        return h2_borderline_profile(grid)
    if name == "manufactured":
        return cfg.manufactured.field(grid, 0.0)
    if name.startswith("file:"):
        return fileio.read_snapshot(name[len("file:"):], grid)
    raise UsageError(f"unknown initial condition {name!r}")


def _load(path: str) -> fileio.RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    return fileio.parse_config(text)


def cmd_run(cfg: fileio.RunConfig) -> int:
    out = fileio.resolve_output_dir(cfg)
    u0 = initial_field(cfg)
    cadence = cfg.snapshot_cadence
    tgrid = cfg.time_grid

    def snap(k, u, _record):
        if k % cadence == 0 or k == tgrid.steps:
            fileio.write_snapshot(u, out / f"snapshot_{k:06d}.txt", tgrid.time(k))

    traj = run(u0, cfg.params, tgrid, cfg.solver, hooks=[snap], diagnostics=True)
    fileio.write_diagnostics_csv(traj.records, out / "diagnostics.csv")
    final = traj.records[-1]
    print(f"steps: {tgrid.steps}  final l2: {final.norms.l2:.6e}  "
          f"GMRES iterations: {traj.total_iterations}")
    if any(r.l2_bound_ok is False for r in traj.records):
        print("L2 bound violated", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_converge_time(cfg: fileio.RunConfig) -> int:
    out = fileio.resolve_output_dir(cfg)
    report = convergence_study_time(cfg.manufactured, cfg.params, cfg.M, cfg.dts, cfg.T,
                                    cfg.solver, cfg.L1, cfg.L2)
    fileio.write_report_csv(report, out / "convergence_time.csv")
    for dt, err in report.levels:
        print(f"dt = {dt:.6g}  error = {err:.6e}")
    print(f"fitted order: {report.fitted_order:.4f}")
    lo, hi = TIME_ORDER_WINDOW
    if report.flagged:
        print(f"degenerate study: {report.note}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK if lo <= report.fitted_order <= hi else EXIT_VERIFY


def cmd_converge_space(cfg: fileio.RunConfig) -> int:
    out = fileio.resolve_output_dir(cfg)
    profile = lambda grid: initial_field(cfg, grid)  # noqa: E731
    report = convergence_study_space(profile, cfg.params, cfg.Ns, cfg.dt, cfg.T,
                                     cfg.reference_modes, cfg.solver, cfg.L1, cfg.L2)
    fileio.write_report_csv(report, out / "convergence_space.csv")
    for n, err in report.levels:
        print(f"N = {n:d}  error = {err:.6e}")
    print(f"fitted order: {report.fitted_order:.4f}")
    if math.isnan(report.fitted_order):
        return EXIT_VERIFY
    return EXIT_OK if report.fitted_order >= SPACE_ORDER_MIN else EXIT_VERIFY


def oracle_deviation(pairs: int = 50, seed: int = 0) -> tuple[float, float]:
    """Max relative deviation of the operator and of one solve from the dense oracle at M=2."""
    rng = np.random.default_rng(seed)
    grid = make_grid(2)
    worst = 0.0
    for _ in range(pairs):
        w = SpectralField(rng.standard_normal(grid.shape), grid)
        up = SpectralField(rng.standard_normal(grid.shape), grid)
        fast = scheme_operator(w, up, ORACLE_PARAMS, 0.05).coefficients
        dense = dense_galerkin_apply(w, up, ORACLE_PARAMS, 0.05, 32).coefficients
        worst = max(worst, float(np.linalg.norm(fast - dense) / np.linalg.norm(dense)))
    up = SpectralField(rng.standard_normal(grid.shape), grid)
    uk, _ = step_implicit(up, ORACLE_PARAMS, 0.05)
    direct = dense_direct_step(up, ORACLE_PARAMS, 0.05)
    solve_dev = norms(uk - direct).l2 / norms(direct).l2
    return worst, solve_dev


def cmd_verify_oracle() -> int:
    op_dev, solve_dev = oracle_deviation()
    print(f"max relative deviation (operator vs dense oracle, 50 pairs): {op_dev:.3e}")
    print(f"relative deviation (implicit step vs dense direct solve): {solve_dev:.3e}")
    return EXIT_OK if op_dev <= ORACLE_TOL and solve_dev <= DIRECT_SOLVE_TOL else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="convective-ch", description="Sine-Galerkin convective Cahn-Hilliard solver")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [
        ("run", "integrate and write diagnostics.csv plus snapshots"),
        ("converge-time", "temporal convergence study against a manufactured solution"),
        ("converge-space", "spatial convergence study against a fine-grid reference"),
        ("print-config", "print the validated config in canonical form"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("config")
    sub.add_parser("verify-oracle", help="check the matrix-free operator against the dense oracle")
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify-oracle":
            return cmd_verify_oracle()
        cfg = _load(args.config)
        if args.command == "print-config":
            sys.stdout.write(fileio.format_config(cfg))
            return EXIT_OK
        handler = {"run": cmd_run, "converge-time": cmd_converge_time,
                   "converge-space": cmd_converge_space}[args.command]
        return handler(cfg)
    except (UsageError, fileio.ConfigError, fileio.SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonConvergence as exc:
        print(f"numerical failure at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Blowup as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
