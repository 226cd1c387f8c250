"""Time integration.

The production stepper is the linearly-implicit Galerkin scheme

    (u^k − u^{k−1})/Δt + γΔ²u^k − ∇·(φ′(u^{k−1})∇u^k)
        − ⅔ u^{k−1} d·∇u^k − ⅔ d·∇(u^{k−1}u^k) = f^k

projected onto ``S_N``.  Each step is a nonsymmetric linear solve done
matrix-free by preconditioned GMRES.  A classical RK4 integrator of the
semi-discrete system is kept as an accuracy reference.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .model import ModelParams, nonlinearity_eval, rhs_coefficients
from .spectral import GridMismatchError, SpectralField, quadrature_grid

logger = logging.getLogger(__name__)

__all__ = [
    "TimeGrid",
    "SolverConfig",
    "StepReport",
    "Trajectory",
    "NonConvergence",
    "Blowup",
    "SchemeOperator",
    "scheme_operator",
    "step_implicit",
    "step_explicit_reference",
    "run",
]


class NonConvergence(RuntimeError):
    """The linear solve ran out of iterations."""

    def __init__(self, message: str, final_residual: float, step: Optional[int] = None):
        super().__init__(message)
        self.final_residual = final_residual
        self.step = step


class Blowup(RuntimeError):
    """The explicit reference step produced non-finite coefficients."""


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    steps: int

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 0:
            raise ValueError(f"steps must be a non-negative integer, got {self.steps}")

    @classmethod
    def from_horizon(cls, T: float, dt: float) -> "TimeGrid":
        steps = round(T / dt)
        if abs(steps * dt - T) > 1e-12 * max(1.0, abs(T)):
            raise ValueError(f"T = {T} is not an integer multiple of dt = {dt}")
        return cls(dt, int(steps))

    @property
    def T(self) -> float:
        return self.dt * self.steps

    def time(self, k: int) -> float:
        return k * self.dt


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-10
    max_iter: int = 500
    restart: int = 50

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")


@dataclass(frozen=True)
class StepReport:
    iterations: int
    final_residual: float
    skew_residual: float


class SchemeOperator:
    """Matrix-free action of the implicit-step operator for a fixed ``u_prev``."""

    def __init__(self, u_prev: SpectralField, params: ModelParams, dt: float):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.grid = u_prev.grid
        self.params = params
        self.dt = dt
        self._q = quadrature_grid(self.grid)
        lam = self.grid.eigenvalues
        self.diagonal = 1.0 / dt + params.gamma * lam**2
        up = self._q.values(u_prev.coefficients)
        self._phi1 = nonlinearity_eval(up, params, 1)
        self._up = up
        self._convective = params.drift != (0.0, 0.0)

    def apply(self, w: np.ndarray) -> np.ndarray:
        q = self._q
        wx = q.dx(w)
        wy = q.dy(w)
        mom = q.moments_dx(self._phi1 * wx) + q.moments_dy(self._phi1 * wy)
        if self._convective:
            dx, dy = self.params.drift
            mom -= (2.0 / 3.0) * q.moments(self._up * (dx * wx + dy * wy))
            upw = self._up * q.values(w)
            mom += (2.0 / 3.0) * (dx * q.moments_dx(upw) + dy * q.moments_dy(upw))
        return self.diagonal * w + mom / self.grid.area_factor

    def __call__(self, w: SpectralField) -> SpectralField:
        if w.grid != self.grid:
            raise GridMismatchError("w and u_prev live on different grids")
        return SpectralField(self.apply(w.coefficients), self.grid)


def scheme_operator(
    w: SpectralField, u_prev: SpectralField, params: ModelParams, dt: float
) -> SpectralField:
    """Apply ``A(w) = P_N[w/dt + γΔ²w − ∇·(φ′(u_prev)∇w) − ⅔u_prev d·∇w − ⅔d·∇(u_prev w)]``."""
    if w.grid != u_prev.grid:
        raise GridMismatchError("w and u_prev live on different grids")
    return SchemeOperator(u_prev, params, dt)(w)


def _solve(op: SchemeOperator, rhs: np.ndarray, x0: np.ndarray, cfg: SolverConfig):
    shape = rhs.shape
    n = rhs.size
    b = rhs.ravel()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(shape), 0, 0.0
    A = LinearOperator((n, n), matvec=lambda v: op.apply(v.reshape(shape)).ravel())
    inv_diag = (1.0 / op.diagonal).ravel()
    P = LinearOperator((n, n), matvec=lambda v: inv_diag * v)
    restart = min(cfg.restart, n)

    x = x0.ravel().copy()
    iterations = 0
    rel = float(np.linalg.norm(b - A.matvec(x)) / bnorm)
    while rel > cfg.rel_tol and iterations < cfg.max_iter:
        count = [0]

        def tick(_):
            count[0] += 1

        budget = cfg.max_iter - iterations
        x, _ = gmres(
            A, b, x0=x, rtol=0.5 * cfg.rel_tol, atol=0.0, restart=restart,
            maxiter=max(1, math.ceil(budget / restart)), M=P,
            callback=tick, callback_type="pr_norm",
        )
        iterations += max(count[0], 1)
        new_rel = float(np.linalg.norm(b - A.matvec(x)) / bnorm)
        if new_rel >= rel and new_rel > cfg.rel_tol:
            rel = new_rel
            break  # stagnation
        rel = new_rel
    return x.reshape(shape), iterations, float(rel)


def step_implicit(
    u_prev: SpectralField,
    params: ModelParams,
    dt: float,
    cfg: SolverConfig | None = None,
    forcing: SpectralField | None = None,
) -> tuple[SpectralField, StepReport]:
    """Advance one step of the linearly-implicit scheme.

    Solves ``A(u_k) = u_prev/dt + forcing`` by GMRES preconditioned with
    the inverse of ``1/dt + γλ²`` (exact inverse of the stiff part).

    Raises
    ------
    NonConvergence
        If the relative residual is still above ``cfg.rel_tol`` when the
        iteration budget is exhausted.
    """
    from .diagnostics import skew_identity_residual

    cfg = cfg or SolverConfig()
    op = SchemeOperator(u_prev, params, dt)
    rhs = u_prev.coefficients / dt
    if forcing is not None:
        if forcing.grid != u_prev.grid:
            raise GridMismatchError("forcing lives on a different grid")
        rhs = rhs + forcing.coefficients
    x, iterations, rel = _solve(op, rhs, u_prev.coefficients, cfg)
    if not (rel <= cfg.rel_tol) or not np.all(np.isfinite(x)):
        raise NonConvergence(
            f"GMRES stopped after {iterations} iterations at relative residual {rel:.3e}",
            final_residual=rel,
        )
    u_k = SpectralField(x, u_prev.grid)
    return u_k, StepReport(iterations, rel, float(skew_identity_residual(u_prev, u_k, params)))


def _rk4(a: np.ndarray, grid, params: ModelParams, dt: float) -> np.ndarray:
    f = lambda b: rhs_coefficients(b, grid, params)  # noqa: E731
    k1 = f(a)
    k2 = f(a + 0.5 * dt * k1)
    k3 = f(a + 0.5 * dt * k2)
    k4 = f(a + dt * k3)
    return a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_explicit_reference(
    u: SpectralField, params: ModelParams, dt: float, steps: int = 1
) -> SpectralField:
    """``steps`` classical RK4 steps of the semi-discrete system.

    Only stable for roughly ``γ λ_max² dt < 2.8``; never use it as the
    production stepper.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    a = u.coefficients
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            a = _rk4(a, u.grid, params, dt)
            if not np.all(np.isfinite(a)):
                lam_max = float(u.grid.eigenvalues[-1, -1])
                raise Blowup(
                    f"explicit step blew up (gamma*lambda_max^2*dt = "
                    f"{params.gamma * lam_max**2 * dt:.3g}, stable below ~2.8)"
                )
    return SpectralField(a, u.grid)


@dataclass
class Trajectory:
    final: SpectralField
    records: list = field(default_factory=list)
    reports: list[StepReport] = field(default_factory=list)

    @property
    def total_iterations(self) -> int:
        return sum(r.iterations for r in self.reports)


Hook = Callable[[int, SpectralField, object], None]


def run(
    u0: SpectralField,
    params: ModelParams,
    grid: TimeGrid,
    cfg: SolverConfig | None = None,
    hooks: Iterable[Hook] = (),
    forcing_fn: Callable[[float], SpectralField] | None = None,
    diagnostics: bool = True,
) -> Trajectory:
    """Iterate :func:`step_implicit` from ``u0`` for ``grid.steps`` steps.

    Each hook is called as ``hook(k, u_k, record)`` for ``k = 0..steps``;
    ``record`` is the step's :class:`~convective_ch.diagnostics.DiagnosticsRecord`,
    or ``None`` when diagnostics are off.  The L2 bound is only checked on
    unforced runs with ``gamma2 > 0``.
    """
    from . import diagnostics as diag

    cfg = cfg or SolverConfig()
    hooks = list(hooks)
    traj = Trajectory(final=u0)
    monitor = None
    if diagnostics:
        monitor = diag.Monitor(u0, params, grid.dt, check_bound=forcing_fn is None)
        traj.records.append(monitor.initial)
    for hook in hooks:
        hook(0, u0, monitor.initial if monitor else None)

    u = u0
    for k in range(1, grid.steps + 1):
        forcing = forcing_fn(grid.time(k)) if forcing_fn is not None else None
        try:
            u_new, report = step_implicit(u, params, grid.dt, cfg, forcing)
        except NonConvergence as exc:
            exc.step = k
            raise
        traj.reports.append(report)
        rec = None
        if monitor is not None:
            rec = monitor.record(k, u_new, report)
            traj.records.append(rec)
        for hook in hooks:
            hook(k, u_new, rec)
        u = u_new
    traj.final = u
    logger.debug("run finished: %d steps, %d GMRES iterations", grid.steps, traj.total_iterations)
    return traj
