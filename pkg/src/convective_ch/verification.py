"""Independent oracles and convergence studies.

The dense Galerkin oracle re-derives the implicit operator term by term from
its weak form, using plain tensor Gauss quadrature and pointwise basis
evaluation.  It shares no code path with the matrix-free operator.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import ModelParams, nonlinearity_eval
from .spectral import (
    GridMismatchError,
    GridSpec,
    SpectralField,
    embed,
    make_grid,
    norms,
    project,
)
from .steppers import SolverConfig, TimeGrid, run

logger = logging.getLogger(__name__)

__all__ = [
    "ManufacturedSolution",
    "ConvergenceReport",
    "DegenerateFitError",
    "manufactured_forcing",
    "dense_galerkin_apply",
    "dense_galerkin_matrix",
    "dense_direct_step",
    "estimate_order",
    "convergence_study_time",
    "convergence_study_space",
    "h2_borderline_profile",
    "smooth_profile",
    "DENSE_MAX_MODES",
]

DENSE_MAX_MODES = 4


class DegenerateFitError(ValueError):
    """Order fit requested on zero, negative or too few errors."""


@dataclass(frozen=True)
class ManufacturedSolution:
    """``u*(x, y, t) = A exp(−μt) sin(m1 π x/L1) sin(m2 π y/L2)``."""

    amplitude: float = 0.5
    decay: float = 1.0
    mode: tuple[int, int] = (1, 1)

    def __post_init__(self):
        m1, m2 = self.mode
        if min(m1, m2) < 1:
            raise ValueError("manufactured mode indices must be positive")

    def amplitude_at(self, t: float) -> float:
        return self.amplitude * math.exp(-self.decay * t)

    def field(self, grid: GridSpec, t: float) -> SpectralField:
        return SpectralField.mode(grid, *self.mode, amplitude=self.amplitude_at(t))


@dataclass
class ConvergenceReport:
    axis: str  # "time" or "space"
    levels: list[tuple[float, float]]  # (dt or N, L2 error at T)
    fitted_order: float
    flagged: bool = False
    note: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def resolutions(self) -> list[float]:
        return [r for r, _ in self.levels]

    @property
    def errors(self) -> list[float]:
        return [e for _, e in self.levels]

    def ratios(self) -> list[float]:
        e = self.errors
        return [e[i] / e[i + 1] for i in range(len(e) - 1)]


def _gauss(points: int, length: float):
    t, w = np.polynomial.legendre.leggauss(points)
    return 0.5 * length * (t + 1.0), 0.5 * length * w


def manufactured_forcing(
    ms: ManufacturedSolution, params: ModelParams, t: float, grid: GridSpec
) -> SpectralField:
    """Source term that makes ``u*`` an exact solution of the forced equation.

    ``f = u*_t + γΔ²u* − Δφ(u*) − d·∇(u*²)``.  The linear part is exact in
    coefficients; the nonlinear part is formed pointwise in strong form
    (``Δφ(u) = φ′(u)Δu + φ″(u)|∇u|²``) and projected by Gauss quadrature.
    """
    m1, m2 = ms.mode
    if grid.modes < 3 * max(m1, m2):
        raise ValueError(
            f"grid has {grid.modes} modes; manufactured mode {ms.mode} needs at least {3 * max(m1, m2)}"
        )
    A = ms.amplitude_at(t)
    out = np.zeros(grid.shape)
    if A == 0.0:
        return SpectralField(out, grid)
    kx, ky = m1 * math.pi / grid.length_x, m2 * math.pi / grid.length_y
    lam = kx * kx + ky * ky
    out[m1 - 1, m2 - 1] = (-ms.decay + params.gamma * lam * lam) * A

    npts = 4 * grid.modes + 24
    x, wx = _gauss(npts, grid.length_x)
    y, wy = _gauss(npts, grid.length_y)
    X, Y = np.meshgrid(x, y, indexing="ij")
    u = A * np.sin(kx * X) * np.sin(ky * Y)
    ux = A * kx * np.cos(kx * X) * np.sin(ky * Y)
    uy = A * ky * np.sin(kx * X) * np.cos(ky * Y)
    lap_phi = (
        nonlinearity_eval(u, params, 1) * (-lam * u)
        + nonlinearity_eval(u, params, 2) * (ux * ux + uy * uy)
    )
    dx, dy = params.drift
    g = -lap_phi - 2.0 * u * (dx * ux + dy * uy)
    sx = np.sin(np.outer(x, grid.wavenumbers_x))
    sy = np.sin(np.outer(y, grid.wavenumbers_y))
    out += np.einsum("i,j,ij,ik,jl->kl", wx, wy, g, sx, sy) / grid.area_factor
    return SpectralField(out, grid)


def dense_galerkin_apply(
    w: SpectralField,
    u_prev: SpectralField,
    params: ModelParams,
    dt: float,
    quadrature_points: int | None = None,
) -> SpectralField:
    """Weak-form oracle for the implicit-step operator.

    Each term ``(w, v)/dt + γ(Δw, Δv) + (φ′(u_prev)∇w, ∇v)
    − ⅔(u_prev d·∇w, v) + ⅔(u_prev w, d·∇v)`` is integrated against every
    basis function ``v`` on a tensor Gauss-Legendre grid, with all functions
    evaluated by summing the series point by point.
    """
    grid = w.grid
    if u_prev.grid != grid:
        raise GridMismatchError("w and u_prev live on different grids")
    M = grid.modes
    if M > DENSE_MAX_MODES:
        raise ValueError(f"dense oracle limited to M <= {DENSE_MAX_MODES}, got {M}")
    if quadrature_points is None:
        quadrature_points = 8 * M + 16
    if quadrature_points < 4 * M:
        raise ValueError(f"need at least 4M = {4 * M} quadrature points")

    L1, L2 = grid.length_x, grid.length_y
    x, wx = _gauss(quadrature_points, L1)
    y, wy = _gauss(quadrature_points, L2)
    X, Y = np.meshgrid(x, y, indexing="ij")
    W = np.outer(wx, wy)

    def basis(k1, k2):
        a, b = k1 * math.pi / L1, k2 * math.pi / L2
        s, c = np.sin(a * X), np.cos(a * X)
        t, d = np.sin(b * Y), np.cos(b * Y)
        return s * t, a * c * t, b * s * d, -(a * a + b * b) * s * t

    tables = {(k1, k2): basis(k1, k2) for k1 in range(1, M + 1) for k2 in range(1, M + 1)}

    def evaluate(coef):
        val = np.zeros_like(X)
        gx, gy, lap = np.zeros_like(X), np.zeros_like(X), np.zeros_like(X)
        for (k1, k2), (b, bx, by, bl) in tables.items():
            c = coef[k1 - 1, k2 - 1]
            val += c * b
            gx += c * bx
            gy += c * by
            lap += c * bl
        return val, gx, gy, lap

    wv, wgx, wgy, wlap = evaluate(w.coefficients)
    up = evaluate(u_prev.coefficients)[0]
    phi1 = nonlinearity_eval(up, params, 1)
    dx, dy = params.drift
    area = 0.25 * L1 * L2

    out = np.zeros(grid.shape)
    for (k1, k2), (v, vx, vy, vlap) in tables.items():
        integrand = (
            wv * v / dt
            + params.gamma * wlap * vlap
            + phi1 * (wgx * vx + wgy * vy)
            - (2.0 / 3.0) * up * (dx * wgx + dy * wgy) * v
            + (2.0 / 3.0) * up * wv * (dx * vx + dy * vy)
        )
        out[k1 - 1, k2 - 1] = np.sum(W * integrand) / area
    return SpectralField(out, grid)


def dense_galerkin_matrix(
    u_prev: SpectralField, params: ModelParams, dt: float, quadrature_points: int | None = None
) -> np.ndarray:
    """Columns are the oracle applied to each unit coefficient vector."""
    grid = u_prev.grid
    n = grid.modes**2
    mat = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        col = dense_galerkin_apply(SpectralField(e.reshape(grid.shape), grid), u_prev, params, dt,
                                   quadrature_points)
        mat[:, j] = col.coefficients.ravel()
    return mat


def dense_direct_step(
    u_prev: SpectralField, params: ModelParams, dt: float, forcing: SpectralField | None = None
) -> SpectralField:
    """One implicit step by direct solve of the dense oracle system."""
    mat = dense_galerkin_matrix(u_prev, params, dt)
    rhs = u_prev.coefficients / dt
    if forcing is not None:
        rhs = rhs + forcing.coefficients
    x = np.linalg.solve(mat, rhs.ravel())
    return SpectralField(x.reshape(u_prev.grid.shape), u_prev.grid)


def estimate_order(resolutions: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``.

    ``h`` is the step size (``dt``, or ``1/N`` in space), so a converging
    scheme yields a positive order.
    """
    h = np.asarray(resolutions, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.shape != e.shape or h.ndim != 1:
        raise DegenerateFitError("resolutions and errors must be 1-D of equal length")
    if len(h) < 3:
        raise DegenerateFitError(f"need at least 3 levels, got {len(h)}")
    if not (np.all(e > 0) and np.all(h > 0) and np.all(np.isfinite(e))):
        raise DegenerateFitError("errors and resolutions must be positive and finite")
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


def _fit(axis, levels, h, floor, note=""):
    errors = [e for _, e in levels]
    flagged = any(e <= floor for e in errors)
    try:
        order = estimate_order(h, errors)
    except DegenerateFitError as exc:
        order, flagged, note = math.nan, True, str(exc)
    if flagged and not note:
        note = f"errors at or below noise floor {floor:.2e}; order not meaningful"
    return ConvergenceReport(axis, levels, order, flagged, note)


def convergence_study_time(
    ms: ManufacturedSolution,
    params: ModelParams,
    N_fixed: int,
    dts: Sequence[float],
    T: float,
    cfg: SolverConfig | None = None,
    L1: float = math.pi,
    L2: float = math.pi,
) -> ConvergenceReport:
    """Forced runs against ``u*(T)`` for a sequence of decreasing ``dt``."""
    cfg = cfg or SolverConfig()
    dts = [float(d) for d in dts]
    if len(dts) < 3 or any(b >= a for a, b in zip(dts, dts[1:])):
        raise ValueError("need at least 3 strictly decreasing time steps")
    grid = make_grid(N_fixed, L1, L2)
    u0 = ms.field(grid, 0.0)
    exact = ms.field(grid, T)
    forcing = lambda t: manufactured_forcing(ms, params, t, grid)  # noqa: E731
    levels, skew = [], 0.0
    for dt in dts:
        traj = run(u0, params, TimeGrid.from_horizon(T, dt), cfg, forcing_fn=forcing)
        err = norms(traj.final - exact).l2
        skew = max([skew] + [r.skew_residual for r in traj.reports])
        logger.info("time study dt=%g error=%.6e", dt, err)
        levels.append((dt, err))
    floor = 1e4 * cfg.rel_tol * max(norms(exact).l2, 1e-300)
    report = _fit("time", levels, dts, floor)
    report.extras["max_skew_residual"] = skew
    return report


def h2_borderline_profile(grid: GridSpec, amplitude: float = 1.0) -> SpectralField:
    """Coefficients ``(k1² + k2²)^{−3/2}``: ``Δu`` barely fails to be square integrable."""
    k = np.arange(1, grid.modes + 1, dtype=float)
    return SpectralField(amplitude * (k[:, None] ** 2 + k[None, :] ** 2) ** -1.5, grid)


def smooth_profile(grid: GridSpec, amplitude: float = 1.0) -> SpectralField:
    """Mode (1,1) plus ``1e-3`` times mode (3,2)."""
    a = np.zeros(grid.shape)
    a[0, 0] = 1.0
    if grid.modes >= 3:
        a[2, 1] = 1e-3
    return SpectralField(amplitude * a, grid)


def convergence_study_space(
    profile: Callable[[GridSpec], SpectralField],
    params: ModelParams,
    Ns: Sequence[int],
    dt_small: float,
    T: float,
    N_ref: int | None = None,
    cfg: SolverConfig | None = None,
    L1: float = math.pi,
    L2: float = math.pi,
) -> ConvergenceReport:
    """Errors ``‖u_ref(T) − u_N(T)‖`` against a fine-grid run with the same ``dt``.

    ``profile(grid)`` gives the initial coefficients; each coarse run starts
    from the projection of the reference initial data.
    """
    cfg = cfg or SolverConfig()
    Ns = [int(n) for n in Ns]
    if len(Ns) < 3 or any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("need at least 3 strictly increasing resolutions")
    N_ref = N_ref or 2 * max(Ns)
    if N_ref < 2 * max(Ns):
        raise ValueError(f"N_ref = {N_ref} must be at least 2*max(Ns) = {2 * max(Ns)}")
    tgrid = TimeGrid.from_horizon(T, dt_small)
    ref_grid = make_grid(N_ref, L1, L2)
    u0_ref = profile(ref_grid)
    ref = run(u0_ref, params, tgrid, cfg).final
    levels, skew = [], 0.0
    for N in Ns:
        grid = make_grid(N, L1, L2)
        traj = run(project(u0_ref, grid), params, tgrid, cfg)
        err = norms(embed(traj.final, ref_grid) - ref).l2
        skew = max([skew] + [r.skew_residual for r in traj.reports])
        logger.info("space study N=%d error=%.6e", N, err)
        levels.append((N, err))
    floor = 1e2 * cfg.rel_tol * max(norms(ref).l2, 1e-300)
    report = _fit("space", levels, [1.0 / n for n in Ns], floor)
    report.extras["max_skew_residual"] = skew
    report.extras["N_ref"] = N_ref
    return report
