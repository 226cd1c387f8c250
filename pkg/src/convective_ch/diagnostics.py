"""Per-step monitors for the a priori bounds of the implicit scheme."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import ModelParams, c0
from .spectral import GridMismatchError, NormSet, SpectralField, mass, norms, quadrature_grid

logger = logging.getLogger(__name__)

__all__ = [
    "StabilityViolation",
    "DiagnosticsRecord",
    "Monitor",
    "l2_bound_factor",
    "skew_identity_residual",
    "record",
    "boundedness_check",
    "BOUND_SLACK",
]

BOUND_SLACK = 1e-9


class StabilityViolation(ValueError):
    """``dt`` is at or above ``4γ/c0²``."""


@dataclass(frozen=True)
class DiagnosticsRecord:
    step: int
    time: float
    norms: NormSet
    mass: float
    l2_bound_rhs: float  # nan when the bound is not checked
    l2_bound_ok: Optional[bool]  # None when the bound is not checked
    skew_residual: float
    solver_iterations: int

    CSV_HEADER = (
        "step", "time", "l2", "h1", "h2", "linf", "mass",
        "l2_bound_rhs", "l2_bound_ok", "skew_residual", "solver_iters",
    )

    def csv_row(self) -> list[str]:
        g = lambda v: format(v, ".17g")  # noqa: E731
        ok = "na" if self.l2_bound_ok is None else str(self.l2_bound_ok).lower()
        n = self.norms
        return [
            str(self.step), g(self.time), g(n.l2), g(n.h1_semi), g(n.h2_semi), g(n.sup),
            g(self.mass), g(self.l2_bound_rhs), ok, g(self.skew_residual),
            str(self.solver_iterations),
        ]


def l2_bound_factor(params: ModelParams, dt: float) -> float:
    """One-step growth factor ``4γ / (4γ − c0² dt)`` of the squared L2 norm."""
    c = c0(params)
    denom = 4.0 * params.gamma - c * c * dt
    if denom <= 0:
        raise StabilityViolation(
            f"dt >= 4*gamma/c0^2: dt = {dt}, 4*gamma/c0^2 = {4.0 * params.gamma / (c * c)}"
        )
    return 4.0 * params.gamma / denom


def skew_identity_residual(
    u_prev: SpectralField, u_k: SpectralField, params: ModelParams | None = None
) -> float:
    """Normalized sum of the two convective forms of the scheme tested with ``u_k``.

    ``−⅔(u_prev d·∇u_k, u_k) + ⅔(u_prev u_k, d·∇u_k)`` is zero in exact
    arithmetic.  The two forms are evaluated along the same quadrature routes
    the implicit operator uses, and the sum is divided by
    ``‖u_prev‖ ‖u_k‖ ‖∇u_k‖``.
    """
    if u_prev.grid != u_k.grid:
        raise GridMismatchError("u_prev and u_k live on different grids")
    dx, dy = params.drift if params is not None else (1.0, 1.0)
    nk = norms(u_k)
    scale = norms(u_prev).l2 * nk.l2 * nk.h1_semi
    if scale == 0.0 or (dx == 0.0 and dy == 0.0):
        return 0.0
    q = quadrature_grid(u_k.grid)
    a = u_k.coefficients
    up = q.values(u_prev.coefficients)
    first = np.sum(q.moments(up * (dx * q.dx(a) + dy * q.dy(a))) * a)
    upw = up * q.values(a)
    second = np.sum((dx * q.moments_dx(upw) + dy * q.moments_dy(upw)) * a)
    return abs((2.0 / 3.0) * (second - first)) / scale


def record(
    k: int,
    u: SpectralField,
    baseline_l2: float,
    params: ModelParams,
    dt: float,
    step_report=None,
    check_bound: bool = True,
) -> DiagnosticsRecord:
    ns = norms(u)
    rhs = math.nan
    ok = None
    if check_bound:
        rhs = l2_bound_factor(params, dt) ** k * baseline_l2**2
        ok = bool(ns.l2**2 <= rhs * (1.0 + BOUND_SLACK))
    return DiagnosticsRecord(
        step=k,
        time=k * dt,
        norms=ns,
        mass=mass(u),
        l2_bound_rhs=rhs,
        l2_bound_ok=ok,
        skew_residual=step_report.skew_residual if step_report is not None else 0.0,
        solver_iterations=step_report.iterations if step_report is not None else 0,
    )


class Monitor:
    """Accumulates records for one run; owned by the run loop."""

    def __init__(self, u0: SpectralField, params: ModelParams, dt: float, check_bound: bool = True):
        self.params = params
        self.dt = dt
        self.baseline_l2 = norms(u0).l2
        self.check_bound = check_bound and params.gamma2 > 0
        if self.check_bound:
            try:
                l2_bound_factor(params, dt)
            except StabilityViolation as exc:
                logger.warning("L2 bound not monitored: %s", exc)
                self.check_bound = False
        self.initial = self.record(0, u0, None)

    def record(self, k: int, u: SpectralField, step_report) -> DiagnosticsRecord:
        return record(k, u, self.baseline_l2, self.params, self.dt, step_report, self.check_bound)


def boundedness_check(records: Sequence[DiagnosticsRecord], caps: dict[str, float]) -> dict[str, bool]:
    """Cap and no-late-growth checks for the l2/h1/h2/linf norms.

    A norm passes if its maximum over the run stays below its cap and it is
    not strictly increasing over the final quarter of the records.
    """
    result = {}
    quarter = max(2, len(records) // 4)
    for name, attr in (("l2", "l2"), ("h1", "h1_semi"), ("h2", "h2_semi"), ("linf", "sup")):
        series = np.array([getattr(r.norms, attr) for r in records])
        below = bool(series.max() <= caps.get(name, math.inf)) if len(series) else True
        tail = series[-quarter:]
        growing = len(tail) > 1 and bool(np.all(np.diff(tail) > 0))
        result[name] = below and not growing
    return result
