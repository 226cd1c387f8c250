"""Text formats: run configuration, coefficient snapshots and CSV reports."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .diagnostics import DiagnosticsRecord, l2_bound_factor, StabilityViolation
from .model import ModelParams, c0
from .spectral import GridSpec, SpectralField, embed, make_grid, project
from .steppers import SolverConfig, TimeGrid
from .verification import ManufacturedSolution

__all__ = [
    "ConfigError",
    "SnapshotError",
    "RunConfig",
    "parse_config",
    "format_config",
    "write_snapshot",
    "read_snapshot",
    "read_snapshot_header",
    "write_diagnostics_csv",
    "write_report_csv",
    "INITIAL_PRESETS",
    "SNAPSHOT_MAGIC",
]

SNAPSHOT_MAGIC = "CCH1"
INITIAL_PRESETS = ("zero", "smooth", "h2_borderline", "manufactured")
REQUIRED_KEYS = ("M", "dt", "T", "initial")


class ConfigError(ValueError):
    """Configuration text failed to parse or validate.

    ``problems`` holds one message per issue, each prefixed with its line
    number when one applies.
    """

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class SnapshotError(ValueError):
    pass


def _fmt_float(v: float) -> str:
    return repr(float(v))


def _fmt_bool(v: bool) -> str:
    return "true" if v else "false"


def _fmt_ints(v: tuple[int, ...]) -> str:
    return ",".join(str(i) for i in v)


def _parse_bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {s!r}")


def _parse_int(s: str) -> int:
    return int(s, 10)


def _parse_ints(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in s.split(",") if p.strip())


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI invocation needs; field order is the canonical key order."""

    M: int
    dt: float
    T: float
    initial: str
    L1: float = math.pi
    L2: float = math.pi
    gamma: float = 1.0
    gamma1: float = 0.0
    gamma2: float = 1.0
    drift_x: float = 1.0
    drift_y: float = 1.0
    rel_tol: float = 1e-10
    max_iter: int = 500
    diagnostics: bool = True
    output_dir: str = "."
    snapshot_every: int = 0  # 0: ten snapshots per run
    ms_amplitude: float = 0.5
    ms_decay: float = 1.0
    ms_mode_x: int = 1
    ms_mode_y: int = 1
    time_levels: int = 4
    Ns: tuple[int, ...] = (4, 8, 16, 32)
    N_ref: int = 0  # 0: twice the largest of Ns

    @property
    def grid(self) -> GridSpec:
        return make_grid(self.M, self.L1, self.L2)

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.gamma, self.gamma1, self.gamma2, (self.drift_x, self.drift_y))

    @property
    def time_grid(self) -> TimeGrid:
        return TimeGrid.from_horizon(self.T, self.dt)

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(self.rel_tol, self.max_iter)

    @property
    def manufactured(self) -> ManufacturedSolution:
        return ManufacturedSolution(self.ms_amplitude, self.ms_decay, (self.ms_mode_x, self.ms_mode_y))

    @property
    def snapshot_cadence(self) -> int:
        if self.snapshot_every > 0:
            return self.snapshot_every
        return max(1, self.time_grid.steps // 10)

    @property
    def dts(self) -> list[float]:
        return [self.dt / 2**i for i in range(self.time_levels)]

    @property
    def reference_modes(self) -> int:
        return self.N_ref or 2 * max(self.Ns)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_PARSERS = {"int": _parse_int, "float": float, "str": str, "bool": _parse_bool,
            "tuple[int, ...]": _parse_ints}
_FORMATTERS = {"int": str, "float": _fmt_float, "str": str, "bool": _fmt_bool,
               "tuple[int, ...]": _fmt_ints}


def _validate(cfg: RunConfig, where: dict[str, int]) -> list[str]:
    problems = []

    def bad(key, msg):
        line = where.get(key)
        problems.append(f"line {line}: {msg}" if line else msg)

    if cfg.M < 1:
        bad("M", "M must be >= 1")
    for key in ("L1", "L2", "gamma", "dt", "T", "rel_tol"):
        v = getattr(cfg, key)
        if not (math.isfinite(v) and v > 0):
            bad(key, f"{key} must be a positive finite number")
    if cfg.gamma2 < 0:
        bad("gamma2", "gamma2 must be >= 0")
    if cfg.max_iter < 1:
        bad("max_iter", "max_iter must be >= 1")
    if cfg.snapshot_every < 0:
        bad("snapshot_every", "snapshot_every must be >= 0")
    if cfg.time_levels < 3:
        bad("time_levels", "time_levels must be >= 3")
    if len(cfg.Ns) < 3 or any(b <= a for a, b in zip(cfg.Ns, cfg.Ns[1:])) or min(cfg.Ns, default=0) < 1:
        bad("Ns", "Ns must list at least 3 strictly increasing positive integers")
    elif cfg.N_ref and cfg.N_ref < 2 * max(cfg.Ns):
        bad("N_ref", f"N_ref must be 0 or >= 2*max(Ns) = {2 * max(cfg.Ns)}")
    if min(cfg.ms_mode_x, cfg.ms_mode_y) < 1:
        bad("ms_mode_x", "manufactured mode indices must be >= 1")
    if cfg.initial == "manufactured" and cfg.M < 3 * max(cfg.ms_mode_x, cfg.ms_mode_y):
        bad("initial", "manufactured initial data needs M >= 3*max(ms_mode_x, ms_mode_y)")
    if cfg.initial not in INITIAL_PRESETS and not cfg.initial.startswith("file:"):
        bad("initial", f"initial must be one of {', '.join(INITIAL_PRESETS)} or file:<path>")
    if not problems and round(cfg.T / cfg.dt) < 1:
        bad("T", "T must be at least one time step")
    elif not problems:
        steps = round(cfg.T / cfg.dt)
        if abs(steps * cfg.dt - cfg.T) > 1e-12 * max(1.0, cfg.T):
            bad("T", f"T = {cfg.T} is not an integer multiple of dt = {cfg.dt}")
    if cfg.diagnostics and not problems:
        if cfg.gamma2 == 0:
            bad("gamma2", "gamma2 = 0 but diagnostics need c0 = gamma1^2/(3*gamma2) + 1; "
                "set gamma2 > 0 or diagnostics = false")
        else:
            try:
                l2_bound_factor(cfg.params, cfg.dt)
            except StabilityViolation:
                limit = 4 * cfg.gamma / c0(cfg.params) ** 2
                bad("dt", f"dt >= 4*gamma/c0^2 = {limit!r} (L2 bound diagnostic); "
                    "reduce dt or set diagnostics = false")
    return problems


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, object] = {}
    where: dict[str, int] = {}
    problems = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            problems.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        if key not in _FIELD_TYPES:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in where:
            problems.append(f"line {lineno}: duplicate key {key!r} (first on line {where[key]})")
            continue
        kind = _FIELD_TYPES[key]
        try:
            values[key] = _PARSERS[kind](value)
        except ValueError:
            problems.append(f"line {lineno}: invalid {kind} value {value!r} for {key!r}")
            continue
        where[key] = lineno
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        problems.append(f"missing required keys: {', '.join(missing)}")
    if problems:
        raise ConfigError(problems)
    cfg = RunConfig(**values)
    problems = _validate(cfg, where)
    if problems:
        raise ConfigError(problems)
    return cfg


def format_config(cfg: RunConfig) -> str:
    """Canonical text: every key, in field order, one per line."""
    lines = []
    for f in fields(RunConfig):
        lines.append(f"{f.name} = {_FORMATTERS[f.type](getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def write_snapshot(u: SpectralField, path, t: float = 0.0) -> None:
    g = u.grid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{SNAPSHOT_MAGIC}\n")
        fh.write(f"{g.modes} {g.length_x!r} {g.length_y!r} {float(t)!r}\n")
        for row in u.coefficients:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def read_snapshot_header(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        magic = fh.readline().strip()
        if magic != SNAPSHOT_MAGIC:
            raise SnapshotError(f"{path}: bad magic {magic!r}, expected {SNAPSHOT_MAGIC!r}")
        parts = fh.readline().split()
    if len(parts) != 4:
        raise SnapshotError(f"{path}: malformed header")
    try:
        return {"M": int(parts[0]), "L1": float(parts[1]), "L2": float(parts[2]), "t": float(parts[3])}
    except ValueError as exc:
        raise SnapshotError(f"{path}: malformed header ({exc})") from None


def read_snapshot(path, grid: GridSpec | None = None) -> SpectralField:
    """Load a snapshot; with ``grid`` it is zero-padded or truncated onto it."""
    head = read_snapshot_header(path)
    with open(path, encoding="utf-8") as fh:
        body = fh.read().split("\n", 2)[2]
    tokens = body.split()
    M = head["M"]
    if len(tokens) != M * M:
        raise SnapshotError(f"{path}: shape mismatch, expected {M * M} coefficients, found {len(tokens)}")
    try:
        a = np.array([float(tok) for tok in tokens]).reshape(M, M)
    except ValueError as exc:
        raise SnapshotError(f"{path}: {exc}") from None
    u = SpectralField(a, make_grid(M, head["L1"], head["L2"]))
    if grid is None or grid == u.grid:
        return u
    if grid.modes >= M:
        return embed(u, grid)
    return project(u, grid)


def write_diagnostics_csv(records: Iterable[DiagnosticsRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DiagnosticsRecord.CSV_HEADER)
        for rec in records:
            w.writerow(rec.csv_row())


def write_report_csv(report, path) -> None:
    order = format(report.fitted_order, ".17g")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("resolution", "error", "fitted_order"))
        for res, err in report.levels:
            w.writerow((format(res, ".17g"), format(err, ".17g"), order))


def resolve_output_dir(cfg: RunConfig) -> Path:
    out = Path(os.environ.get("CCH_OUTPUT_DIR", cfg.output_dir))
    out.mkdir(parents=True, exist_ok=True)
    return out
