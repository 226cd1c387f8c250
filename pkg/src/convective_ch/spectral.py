"""Sine-Galerkin representation on a rectangle with homogeneous boundary data.

A field is stored as an ``M x M`` array of coefficients ``a[k1-1, k2-1]`` of the
series ``sum a sin(k1 pi x / L1) sin(k2 pi y / L2)``.  Every basis function
vanishes on the boundary together with its Laplacian, so ``u = Δu = 0`` holds
on ∂Ω by construction.

Two nodal representations are used:

* the ``M x M`` interior equispaced grid ``x_i = i L1 / (M + 1)``, paired with
  the coefficients by a type-I discrete sine transform (exact inverses);
* a tensor Gauss-Legendre grid (:class:`QuadratureGrid`) on which polynomial
  nonlinearities are multiplied pointwise and projected back.  The Gauss grid
  is the dealiasing device: with ``4M + 24`` points per axis every integrand of
  total frequency up to ``4M`` is integrated to rounding.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

__all__ = [
    "GridSpec",
    "SpectralField",
    "PhysField",
    "NormSet",
    "QuadratureGrid",
    "make_grid",
    "sine_transform_forward",
    "sine_transform_inverse",
    "project",
    "embed",
    "laplacian",
    "biharmonic",
    "gradient_values",
    "inner_product",
    "norms",
    "mass",
    "quadrature_grid",
    "default_quadrature_points",
]


class GridMismatchError(ValueError):
    """Two fields live on incompatible grids."""


@dataclass(frozen=True)
class GridSpec:
    """Mode counts and domain lengths of ``S_N`` on ``[0, L1] x [0, L2]``."""

    modes: int
    length_x: float = math.pi
    length_y: float = math.pi

    def __post_init__(self):
        if isinstance(self.modes, bool) or int(self.modes) != self.modes or self.modes < 1:
            raise ValueError(f"modes per axis must be a positive integer, got {self.modes!r}")
        if not (self.length_x > 0 and self.length_y > 0):
            raise ValueError(
                f"domain lengths must be positive, got ({self.length_x}, {self.length_y})"
            )
        if not (math.isfinite(self.length_x) and math.isfinite(self.length_y)):
            raise ValueError("domain lengths must be finite")
        object.__setattr__(self, "modes", int(self.modes))
        object.__setattr__(self, "length_x", float(self.length_x))
        object.__setattr__(self, "length_y", float(self.length_y))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.modes, self.modes)

    @property
    def area_factor(self) -> float:
        """``L1 L2 / 4``: the squared L2 norm of every basis function."""
        return 0.25 * self.length_x * self.length_y

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(1, self.modes + 1) * self.length_x / (self.modes + 1)

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(1, self.modes + 1) * self.length_y / (self.modes + 1)

    @cached_property
    def wavenumbers_x(self) -> np.ndarray:
        return np.arange(1, self.modes + 1) * math.pi / self.length_x

    @cached_property
    def wavenumbers_y(self) -> np.ndarray:
        return np.arange(1, self.modes + 1) * math.pi / self.length_y

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of ``-Δ``: ``λ[k1-1, k2-1] = (k1 π/L1)^2 + (k2 π/L2)^2``."""
        lam = self.wavenumbers_x[:, None] ** 2 + self.wavenumbers_y[None, :] ** 2
        lam.setflags(write=False)
        return lam

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0, 0])

    def same_domain(self, other: "GridSpec") -> bool:
        return self.length_x == other.length_x and self.length_y == other.length_y


def make_grid(M: int, L1: float = math.pi, L2: float = math.pi) -> GridSpec:
    return GridSpec(M, L1, L2)


def _frozen_array(values, shape: tuple[int, int], what: str) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.shape != shape:
        raise ValueError(f"{what} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Sine coefficients of a function in ``S_N``; immutable."""

    coefficients: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        object.__setattr__(
            self, "coefficients", _frozen_array(self.coefficients, self.grid.shape, "coefficients")
        )

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SpectralField":
        return cls(np.zeros(grid.shape), grid)

    @classmethod
    def mode(cls, grid: GridSpec, k1: int, k2: int, amplitude: float = 1.0) -> "SpectralField":
        if not (1 <= k1 <= grid.modes and 1 <= k2 <= grid.modes):
            raise ValueError(f"mode ({k1}, {k2}) outside 1..{grid.modes}")
        a = np.zeros(grid.shape)
        a[k1 - 1, k2 - 1] = amplitude
        return cls(a, grid)

    def _check(self, other: "SpectralField") -> None:
        if other.grid != self.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.coefficients + other.coefficients, self.grid)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.coefficients - other.coefficients, self.grid)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(float(scalar) * self.coefficients, self.grid)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(-self.coefficients, self.grid)

    def __call__(self, x, y) -> np.ndarray:
        """Evaluate the series at arbitrary points (direct summation)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        sx = np.sin(x[..., None] * self.grid.wavenumbers_x)
        sy = np.sin(y[..., None] * self.grid.wavenumbers_y)
        return np.einsum("...i,ij,...j->...", sx, self.coefficients, sy)


@dataclass(frozen=True, eq=False)
class PhysField:
    """Values at the ``M x M`` interior equispaced nodes; immutable."""

    values: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, self.grid.shape, "values"))

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "PhysField":
        X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
        return cls(func(X, Y), grid)


@dataclass(frozen=True)
class NormSet:
    l2: float
    h1_semi: float
    h2_semi: float
    sup: float  # nodal maximum only; a lower bound on the true supremum


def sine_transform_forward(f: PhysField) -> SpectralField:
    """Interpolating sine coefficients of nodal data (DST-I)."""
    M = f.grid.modes
    a = scipy.fft.dstn(f.values, type=1) / (M + 1) ** 2
    return SpectralField(a, f.grid)


def sine_transform_inverse(u: SpectralField) -> PhysField:
    """Evaluate the truncated series at the interior nodes (DST-I)."""
    return PhysField(scipy.fft.dstn(u.coefficients, type=1) / 4.0, u.grid)


def project(source: SpectralField, target: GridSpec) -> SpectralField:
    """L2-orthogonal projection onto ``S_M`` of ``target`` (coefficient truncation)."""
    if not source.grid.same_domain(target):
        raise GridMismatchError("projection requires identical domain lengths")
    if target.modes > source.grid.modes:
        raise ValueError(
            f"cannot project {source.grid.modes} modes onto a finer space of {target.modes}"
        )
    M = target.modes
    return SpectralField(source.coefficients[:M, :M], target)


def embed(source: SpectralField, target: GridSpec) -> SpectralField:
    """Zero-pad coefficients into a finer space; ``project`` undoes it exactly."""
    if not source.grid.same_domain(target):
        raise GridMismatchError("embedding requires identical domain lengths")
    if target.modes < source.grid.modes:
        raise ValueError("embedding target must have at least as many modes as the source")
    a = np.zeros(target.shape)
    M = source.grid.modes
    a[:M, :M] = source.coefficients
    return SpectralField(a, target)


def laplacian(u: SpectralField) -> SpectralField:
    return SpectralField(-u.grid.eigenvalues * u.coefficients, u.grid)


def biharmonic(u: SpectralField) -> SpectralField:
    lam = u.grid.eigenvalues
    return SpectralField(lam * (lam * u.coefficients), u.grid)


def _cos_nodal(b: np.ndarray, axis: int) -> np.ndarray:
    # sum_k b_k cos(k pi i / (M+1)) at i = 1..M, via DCT-I on M+2 points
    pad = [(0, 0), (0, 0)]
    pad[axis] = (1, 1)
    full = scipy.fft.dct(np.pad(b, pad), type=1, axis=axis) / 2.0
    return full[1:-1, :] if axis == 0 else full[:, 1:-1]


def _sin_nodal(b: np.ndarray, axis: int) -> np.ndarray:
    return scipy.fft.dst(b, type=1, axis=axis) / 2.0


def gradient_values(u: SpectralField) -> tuple[PhysField, PhysField]:
    """Nodal values of ``(∂u/∂x, ∂u/∂y)`` from the differentiated series."""
    g = u.grid
    bx = u.coefficients * g.wavenumbers_x[:, None]
    by = u.coefficients * g.wavenumbers_y[None, :]
    ux = _sin_nodal(_cos_nodal(bx, 0), 1)
    uy = _cos_nodal(_sin_nodal(by, 0), 1)
    return PhysField(ux, g), PhysField(uy, g)


def inner_product(a: SpectralField, b: SpectralField) -> float:
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")
    return a.grid.area_factor * float(np.sum(a.coefficients * b.coefficients))


def norms(u: SpectralField) -> NormSet:
    g = u.grid
    a2 = u.coefficients**2
    lam = g.eigenvalues
    sup = float(np.max(np.abs(sine_transform_inverse(u).values)))
    return NormSet(
        l2=math.sqrt(g.area_factor * a2.sum()),
        h1_semi=math.sqrt(g.area_factor * (lam * a2).sum()),
        h2_semi=math.sqrt(g.area_factor * (lam**2 * a2).sum()),
        sup=sup,
    )


def mass(u: SpectralField) -> float:
    """``∫_Ω u``; only odd-odd modes contribute."""
    g = u.grid
    k = np.arange(1, g.modes + 1)
    odd = np.where(k % 2 == 1, 1.0 / k, 0.0)
    return 4.0 * g.length_x * g.length_y / math.pi**2 * float(odd @ u.coefficients @ odd)


def default_quadrature_points(M: int) -> int:
    return 4 * M + 24


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Tensor Gauss-Legendre grid with basis tables for matrix-free products.

    ``values``/``dx``/``dy`` map coefficients to nodal values of ``u``,
    ``∂u/∂x``, ``∂u/∂y``.  ``moments`` maps nodal values of ``g`` to the
    Galerkin moments ``(g, φ_k)``; ``moments_dx``/``moments_dy`` give
    ``(g, ∂φ_k/∂x)`` and ``(g, ∂φ_k/∂y)``.  Dividing moments by
    ``grid.area_factor`` yields the coefficients of ``P_N g``.
    """

    grid: GridSpec
    points: int
    _sx: np.ndarray = field(repr=False)
    _cx: np.ndarray = field(repr=False)
    _sy: np.ndarray = field(repr=False)
    _cy: np.ndarray = field(repr=False)
    _wsx: np.ndarray = field(repr=False)
    _wcx: np.ndarray = field(repr=False)
    _wsy: np.ndarray = field(repr=False)
    _wcy: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, grid: GridSpec, points: int) -> "QuadratureGrid":
        t, w = np.polynomial.legendre.leggauss(points)

        def tables(L, kk):
            x = 0.5 * L * (t + 1.0)
            wx = 0.5 * L * w
            s = np.sin(np.outer(x, kk))
            c = np.cos(np.outer(x, kk)) * kk
            return s, c, (wx[:, None] * s).T.copy(), (wx[:, None] * c).T.copy()

        sx, cx, wsx, wcx = tables(grid.length_x, grid.wavenumbers_x)
        sy, cy, wsy, wcy = tables(grid.length_y, grid.wavenumbers_y)
        return cls(grid, points, sx, cx, sy, cy, wsx, wcx, wsy, wcy)

    def values(self, a: np.ndarray) -> np.ndarray:
        return self._sx @ a @ self._sy.T

    def dx(self, a: np.ndarray) -> np.ndarray:
        return self._cx @ a @ self._sy.T

    def dy(self, a: np.ndarray) -> np.ndarray:
        return self._sx @ a @ self._cy.T

    def moments(self, g: np.ndarray) -> np.ndarray:
        return self._wsx @ g @ self._wsy.T

    def moments_dx(self, g: np.ndarray) -> np.ndarray:
        return self._wcx @ g @ self._wsy.T

    def moments_dy(self, g: np.ndarray) -> np.ndarray:
        return self._wsx @ g @ self._wcy.T


@functools.lru_cache(maxsize=32)
def quadrature_grid(grid: GridSpec, points: int | None = None) -> QuadratureGrid:
    if points is None:
        points = default_quadrature_points(grid.modes)
    if points < 2 * grid.modes + 1:
        raise ValueError(f"need at least 2M+1 = {2 * grid.modes + 1} quadrature points, got {points}")
    return QuadratureGrid.build(grid, points)
