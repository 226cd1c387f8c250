import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import direct_sum, gauss_grid
from convective_ch.model import ModelParams, c0, continuous_rhs, nonlinearity_eval
from convective_ch.spectral import SpectralField, inner_product, make_grid, norms
from convective_ch.steppers import scheme_operator


def test_phi_values():
    p = ModelParams(gamma2=1.0, gamma1=0.0)
    assert nonlinearity_eval(2.0, p, 0) == 6.0
    assert nonlinearity_eval(0.0, ModelParams(gamma1=-2.3, gamma2=0.4), 1) == -1.0
    assert nonlinearity_eval(1.0, ModelParams(gamma1=1.0, gamma2=1.0), 2) == 8.0


def test_phi_derivatives_by_finite_differences(rng):
    p = ModelParams(gamma1=0.7, gamma2=1.9)
    v = rng.uniform(-3, 3, 50)
    h = 1e-6
    fd1 = (nonlinearity_eval(v + h, p, 0) - nonlinearity_eval(v - h, p, 0)) / (2 * h)
    fd2 = (nonlinearity_eval(v + h, p, 1) - nonlinearity_eval(v - h, p, 1)) / (2 * h)
    np.testing.assert_allclose(nonlinearity_eval(v, p, 1), fd1, rtol=1e-7, atol=1e-7)
    np.testing.assert_allclose(nonlinearity_eval(v, p, 2), fd2, rtol=1e-7, atol=1e-7)


def test_bad_order():
    with pytest.raises(ValueError):
        nonlinearity_eval(1.0, ModelParams(), 3)


@pytest.mark.parametrize("g1,g2,expected", [(0.0, 1.0, 1.0), (3.0, 1.0, 4.0)])
def test_c0_values(g1, g2, expected):
    assert c0(ModelParams(gamma1=g1, gamma2=g2)) == pytest.approx(expected)


def test_c0_is_tight():
    p = ModelParams(gamma1=1.0, gamma2=1.0)
    v = np.arange(-10.0, 10.0 + 1e-12, 1e-4)
    assert nonlinearity_eval(v, p, 1).min() == pytest.approx(-c0(p), abs=1e-7)
    assert c0(p) == pytest.approx(4 / 3)


def test_c0_rejects_zero_gamma2():
    with pytest.raises(ValueError):
        c0(ModelParams(gamma2=0.0))


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(gamma=0.0)
    with pytest.raises(ValueError):
        ModelParams(gamma2=-1.0)


def test_phi_prime_lower_bound_bulk():
    rng = np.random.default_rng(7)
    v = rng.uniform(-100, 100, 10**6)
    for _ in range(5):
        p = ModelParams(gamma=1.0, gamma1=rng.uniform(-5, 5), gamma2=rng.uniform(0.05, 5))
        assert nonlinearity_eval(v, p, 1).min() >= -c0(p) - 1e-9


class TestContinuousRhs:
    def test_zero(self):
        g = make_grid(4)
        assert not np.any(continuous_rhs(SpectralField.zeros(g), ModelParams()).coefficients)

    def test_linear_mode_multiplier(self):
        g = make_grid(4)
        out = continuous_rhs(SpectralField.mode(g, 1, 1), ModelParams.linear()).coefficients.copy()
        assert out[0, 0] == pytest.approx(-2.0, abs=1e-13)
        out[0, 0] = 0.0
        assert np.abs(out).max() < 1e-13

    @staticmethod
    def galerkin_oracle(a, params, L1, L2, points=64):
        """Dense weak-form assembly: (−γΔ²u + Δφ(u) + d·∇(u²), v) for every basis v."""
        M = a.shape[0]
        X, Y, W = gauss_grid(points, L1, L2)
        u = direct_sum(a, L1, L2, X, Y)
        phi = params.gamma2 * u**3 + params.gamma1 * u**2 - u
        out = np.zeros_like(a)
        for k1 in range(1, M + 1):
            for k2 in range(1, M + 1):
                kx, ky = k1 * math.pi / L1, k2 * math.pi / L2
                lam = kx * kx + ky * ky
                v = np.sin(kx * X) * np.sin(ky * Y)
                vx = kx * np.cos(kx * X) * np.sin(ky * Y)
                vy = ky * np.sin(kx * X) * np.cos(ky * Y)
                lin = -params.gamma * lam**2 * np.sum(W * u * v)
                nonlin = np.sum(W * (phi * (-lam * v) - u * u * (params.drift[0] * vx + params.drift[1] * vy)))
                out[k1 - 1, k2 - 1] = (lin + nonlin) / (L1 * L2 / 4)
        return out

    def test_mode_against_dense_galerkin(self):
        g = make_grid(4)
        p = ModelParams(gamma=1.0, gamma1=0.0, gamma2=1.0, drift=(1.0, 1.0))
        u = SpectralField.mode(g, 1, 1)
        expected = self.galerkin_oracle(u.coefficients, p, math.pi, math.pi)
        np.testing.assert_allclose(continuous_rhs(u, p).coefficients, expected, atol=1e-10)

    def test_random_against_dense_galerkin(self, rng):
        g = make_grid(4, 1.3, 2.0)
        p = ModelParams(gamma=0.6, gamma1=0.9, gamma2=1.4, drift=(0.3, -1.2))
        a = rng.standard_normal(g.shape) * 0.5
        expected = self.galerkin_oracle(a, p, 1.3, 2.0)
        got = continuous_rhs(SpectralField(a, g), p).coefficients
        np.testing.assert_allclose(got, expected, atol=1e-10 * np.abs(expected).max())


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), M=st.integers(2, 12))
def test_convective_term_is_orthogonal_to_u(seed, M):
    rng = np.random.default_rng(seed)
    g = make_grid(M, rng.uniform(0.5, 4), rng.uniform(0.5, 4))
    u = SpectralField(rng.standard_normal(g.shape) / g.eigenvalues, g)
    conv_only = ModelParams(gamma=1.0, gamma1=0.0, gamma2=0.0, drift=(1.0, 1.0))
    linear = ModelParams(gamma=1.0, gamma1=0.0, gamma2=0.0, drift=(0.0, 0.0))
    conv = continuous_rhs(u, conv_only) - continuous_rhs(u, linear)
    n = norms(u)
    assert abs(inner_product(conv, u)) <= 1e-10 * n.l2 * n.h1_semi


@pytest.mark.parametrize("params", [
    ModelParams(),
    ModelParams(gamma=0.5, gamma1=1.5, gamma2=0.7, drift=(-0.4, 1.3)),
])
def test_rhs_equals_negated_scheme_operator(params, rng):
    g = make_grid(4)
    u = SpectralField(rng.standard_normal(g.shape) * 0.4, g)
    dt = 0.01
    non_mass = scheme_operator(u, u, params, dt) - (1.0 / dt) * u
    np.testing.assert_allclose(
        continuous_rhs(u, params).coefficients, -non_mass.coefficients,
        atol=1e-10 * np.abs(non_mass.coefficients).max(),
    )
