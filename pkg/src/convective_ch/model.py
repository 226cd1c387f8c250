"""Coefficients and nonlinearities of the convective Cahn-Hilliard equation.

    u_t + γ Δ²u = Δφ(u) + d·∇(u²),   φ(u) = γ₂u³ + γ₁u² − u,

with ``u = Δu = 0`` on the boundary.  The scalar flux ``ψ(u) = u²`` is
contracted with a constant drift direction ``d``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import SpectralField, quadrature_grid

__all__ = ["ModelParams", "nonlinearity_eval", "c0", "continuous_rhs", "rhs_coefficients"]


@dataclass(frozen=True)
class ModelParams:
    gamma: float = 1.0
    gamma1: float = 0.0
    gamma2: float = 1.0
    drift: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.gamma2 >= 0:
            raise ValueError(f"gamma2 must be non-negative, got {self.gamma2}")
        drift = tuple(float(d) for d in self.drift)
        if len(drift) != 2:
            raise ValueError("drift must have two components")
        vals = (self.gamma, self.gamma1, self.gamma2) + drift
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("model parameters must be finite")
        object.__setattr__(self, "drift", drift)

    @classmethod
    def linear(cls, gamma: float = 1.0) -> "ModelParams":
        """φ(u) = −u and no convection: every sine mode evolves independently."""
        return cls(gamma=gamma, gamma1=0.0, gamma2=0.0, drift=(0.0, 0.0))


def nonlinearity_eval(v, params: ModelParams, order: int = 0):
    """Pointwise φ, φ′ or φ″ of nodal values ``v``."""
    g1, g2 = params.gamma1, params.gamma2
    v = np.asarray(v, dtype=float)
    if order == 0:
        return ((g2 * v + g1) * v - 1.0) * v
    if order == 1:
        return (3.0 * g2 * v + 2.0 * g1) * v - 1.0
    if order == 2:
        return 6.0 * g2 * v + 2.0 * g1
    raise ValueError(f"order must be 0, 1 or 2, got {order}")


def c0(params: ModelParams) -> float:
    """Constant with ``φ′(v) ≥ −c0`` for every real ``v``."""
    if params.gamma2 <= 0:
        raise ValueError("c0 = gamma1^2/(3*gamma2) + 1 requires gamma2 > 0")
    return params.gamma1**2 / (3.0 * params.gamma2) + 1.0


def rhs_coefficients(a: np.ndarray, grid, params: ModelParams) -> np.ndarray:
    """Array-level kernel of :func:`continuous_rhs` (no validation)."""
    q = quadrature_grid(grid)
    lam = grid.eigenvalues
    u = q.values(a)
    dx, dy = params.drift
    # (Δφ(u), φ_k) = −λ_k (φ(u), φ_k);  (d·∇(u²), φ_k) = −(u², d·∇φ_k)
    mom = -lam * q.moments(nonlinearity_eval(u, params, 0))
    if dx != 0.0 or dy != 0.0:
        u2 = u * u
        if dx != 0.0:
            mom -= dx * q.moments_dx(u2)
        if dy != 0.0:
            mom -= dy * q.moments_dy(u2)
    return mom / grid.area_factor - params.gamma * lam**2 * a


def continuous_rhs(u: SpectralField, params: ModelParams) -> SpectralField:
    """Galerkin right-hand side ``P_N[−γΔ²u + Δφ(u) + d·∇(u²)]``."""
    return SpectralField(rhs_coefficients(u.coefficients, u.grid, params), u.grid)
