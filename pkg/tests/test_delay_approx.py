"""Delay linearization and characteristic-function analysis."""

import numpy as np
import pytest
from scipy import integrate

from distdelay import delay_approx as da
from distdelay import kernels, msr


@pytest.fixture(scope="module")
def steady_data(params, steady_1mw):
    x_s, u_s = steady_1mw
    return da.msr_steady_data(x_s, u_s, params)


def scalar_data(gamma, laplace):
    """1-state test system xdot = -x + (kernel * x)."""
    return da.SteadyPointData(
        a_matrix=np.array([[-1.0]]),
        delay_input=np.array([[1.0]]),
        delay_output=np.array([[1.0]]),
        mean_lags=np.array([gamma]),
        laplace=[laplace],
    )


class TestMemoryState:
    def test_constant_history(self):
        r = np.arange(1.0, 9.0)
        np.testing.assert_array_equal(da.memory_state(r, np.zeros(8), np.full(8, 7.5)), r)

    def test_linear_ramp_exact(self):
        # the first-order expansion is exact on affine signals
        gamma = np.full(8, 7.5)
        t = 123.0
        r = np.full(8, t)
        z = da.memory_state(r, np.ones(8), gamma)
        np.testing.assert_allclose(z, t - 7.5, rtol=1e-15)

    def test_quadratic_error_is_second_moment(self, geometry, params, dp_ref):
        # for r(s) = s^2 the convolution satisfies, over any truncated support,
        # (alpha * r)(t) = m0 t^2 - 2 m1 t + m2 with m_j the truncated moments,
        # so the linearization error conv - (m0 t^2 - 2 m1 t) equals m2
        k = kernels.hp_kernel(dp_ref, params.viscosity, geometry)
        t0 = k.min_lag
        t_max = 200.0 * t0
        t = 40.0
        conv, _ = integrate.quad(lambda s: k.density(s) * (t - s) ** 2, t0, t_max,
                                 limit=300)
        m0, _ = integrate.quad(k.density, t0, t_max, limit=300)
        m1, _ = integrate.quad(lambda s: s * k.density(s), t0, t_max, limit=300)
        m2, _ = integrate.quad(lambda s: s * s * k.density(s), t0, t_max, limit=300)
        assert conv - (m0 * t * t - 2.0 * m1 * t) == pytest.approx(m2, rel=1e-8)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            da.memory_state(np.zeros(8), np.zeros(7), np.zeros(8))


class TestLaplaceTransforms:
    def test_unit_at_zero(self, geometry, params, dp_ref):
        hp = kernels.hp_kernel(dp_ref, params.viscosity, geometry)
        assert abs(hp.laplace(0.0) - 1.0) < 1e-12
        a = hp.coefficient
        num = kernels.kernel_from_profile(
            lambda r: a * (geometry.radius**2 - r * r),
            lambda r: -2.0 * a * r, geometry)
        assert abs(num.laplace(0.0) - 1.0) < 1e-8

    def test_matches_quadrature(self, geometry, params, dp_ref):
        hp = kernels.hp_kernel(dp_ref, params.viscosity, geometry)
        for lam in (0.05, 0.5 + 0.3j, 2.0 - 1.0j):
            quad_re, _ = integrate.quad(
                lambda s: (np.exp(-lam * s) * hp.density(s)).real,
                hp.min_lag, 400.0 * hp.min_lag, limit=400)
            quad_im, _ = integrate.quad(
                lambda s: (np.exp(-lam * s) * hp.density(s)).imag,
                hp.min_lag, 400.0 * hp.min_lag, limit=400)
            assert hp.laplace(lam) == pytest.approx(quad_re + 1j * quad_im, rel=1e-6)

    def test_derivative_at_zero_is_minus_mean_lag(self, geometry, params, dp_ref):
        hp = kernels.hp_kernel(dp_ref, params.viscosity, geometry)
        h = 1e-6
        deriv = (hp.laplace(h) - hp.laplace(-h)) / (2.0 * h)
        assert deriv.real == pytest.approx(-hp.mean_lag, rel=1e-6)

    def test_decays_for_large_argument(self, geometry, params, dp_ref):
        hp = kernels.hp_kernel(dp_ref, params.viscosity, geometry)
        assert abs(hp.laplace(50.0)) < 1e-30


class TestCharacteristicFunctions:
    def test_zero_argument_matches_undelayed_determinant(self, steady_data):
        data = steady_data
        mat = -data.a_matrix.copy()
        for i in range(data.n_delays):
            mat -= np.outer(data.delay_input[:, i], data.delay_output[i, :])
        expected = np.linalg.det(mat)
        assert da.characteristic_dde(0.0, data) == pytest.approx(expected, rel=1e-10)
        assert da.characteristic_approx(0.0, data) == pytest.approx(expected, rel=1e-10)

    def test_scalar_loop_degenerate_at_zero(self, geometry, params, dp_ref):
        hp = kernels.hp_kernel(dp_ref, params.viscosity, geometry)
        data = scalar_data(hp.mean_lag, hp.laplace)
        assert abs(da.characteristic_dde(0.0, data)) < 1e-12
        assert abs(da.characteristic_approx(0.0, data)) < 1e-12

    def test_large_real_argument_asymptotics(self, steady_data):
        lam = 1e6
        det = da.characteristic_dde(lam, steady_data)
        assert det.real == pytest.approx(lam**steady_data.n_states, rel=1e-3)

    def test_first_order_consistency(self, steady_data):
        # for |lambda| gamma << 1 the two characteristic functions agree
        gamma = steady_data.mean_lags.max()
        lam = 1e-3 / gamma
        dde = da.characteristic_dde(lam, steady_data)
        approx = da.characteristic_approx(lam, steady_data)
        assert abs(dde - approx) / abs(dde) < 1e-2

    def test_zero_mean_lag_reduces_to_ode_polynomial(self, steady_data):
        data = da.SteadyPointData(
            a_matrix=steady_data.a_matrix,
            delay_input=steady_data.delay_input,
            delay_output=steady_data.delay_output,
            mean_lags=np.zeros(steady_data.n_delays),
            laplace=steady_data.laplace,
        )
        mat = data.a_matrix.copy()
        for i in range(data.n_delays):
            mat += np.outer(data.delay_input[:, i], data.delay_output[i, :])
        for lam in (0.3, -0.2 + 0.9j):
            expected = np.prod(lam - np.linalg.eigvals(mat))
            assert da.characteristic_approx(lam, data) == pytest.approx(expected,
                                                                        rel=1e-8)

    def test_conjugate_symmetry(self, steady_data):
        for lam in (0.1 + 0.7j, -0.4 + 2.3j):
            assert da.characteristic_dde(np.conj(lam), steady_data) == pytest.approx(
                np.conj(da.characteristic_dde(lam, steady_data)), rel=1e-12)
            assert da.characteristic_approx(np.conj(lam), steady_data) == pytest.approx(
                np.conj(da.characteristic_approx(lam, steady_data)), rel=1e-12)

    def test_unknown_variant_rejected(self, steady_data):
        with pytest.raises(ValueError):
            da.normalized_characteristic(0.1, steady_data, "other")


class TestRootScan:
    def test_recovers_ode_eigenvalues(self):
        data = da.SteadyPointData(
            a_matrix=np.array([[-1.0, 0.0], [0.0, -2.0]]),
            delay_input=np.zeros((2, 1)),
            delay_output=np.zeros((1, 2)),
            mean_lags=np.zeros(1),
            laplace=[lambda lam: 1.0],
        )
        res = da.root_scan(data, (-3.0, 0.5), (-0.5, 0.5), n_re=30, n_im=9)
        roots = sorted(res.roots, key=lambda r: r.real)
        assert len(roots) == 2
        assert abs(roots[0] + 2.0) < 1e-8
        assert abs(roots[1] + 1.0) < 1e-8

    def test_scalar_linearized_loop_root_at_zero(self):
        data = scalar_data(7.5, lambda lam: 1.0)
        res = da.root_scan(data, (-1.0, 1.0), (-0.1, 0.1), n_re=21, n_im=5,
                           which="approx")
        assert any(abs(r) < 1e-8 for r in res.roots)

    def test_msr_dde_roots_stable(self, steady_data):
        res = da.root_scan(steady_data, (-50.0, 5.0), (-50.0, 50.0),
                           n_re=40, n_im=40, which="dde")
        assert res.roots.size > 0
        for r in res.roots:
            # the conserved quantity rho_th + kappa T_r makes lambda = 0 an
            # exact (gauge) root; every other root must be strictly stable
            if abs(r) < 1e-6:
                continue
            assert r.real < 0.0

    def test_msr_approx_roots(self, steady_data):
        res = da.root_scan(steady_data, (-50.0, 5.0), (-50.0, 50.0),
                           n_re=40, n_im=40, which="approx")
        assert res.roots.size > 0
        artifacts = [r for r in res.roots if r.real > 1e-6]
        stable = [r for r in res.roots if r.real < -1e-6]
        # the first-order delay expansion introduces one spurious unstable
        # real root (lambda * gamma ~ 11, far outside the expansion's
        # validity); all physical roots remain stable
        assert len(artifacts) == 1
        assert artifacts[0].imag == pytest.approx(0.0, abs=1e-8)
        assert artifacts[0].real == pytest.approx(1.4847, abs=1e-2)
        assert len(stable) >= 3
