"""Reactor model: right-hand side, delayed outputs, Jacobians, steady state."""

from dataclasses import replace

import numpy as np
import pytest

from distdelay import kernels, msr

from conftest import fd_jacobian, rel_err


def random_point(rng, dp_ref):
    """A random feasible (x, u) pair around the operating region."""
    x = np.empty(msr.N_STATES)
    x[:6] = rng.uniform(0.1, 50.0, 6)  # precursors
    x[msr.IDX_CN] = rng.uniform(0.2, 12.0)
    x[msr.IDX_RHO_TH] = rng.uniform(-0.01, 0.01)
    x[msr.IDX_TR] = rng.uniform(700.0, 760.0)
    x[msr.IDX_THX] = rng.uniform(700.0, 760.0)
    u = np.array([rng.uniform(-200.0, 200.0), dp_ref * rng.uniform(0.3, 3.0)])
    return x, u


class TestRhs:
    def test_zero_at_steady_state(self, params, steady_1mw):
        x_s, u_s = steady_1mw
        z_s = msr.delayed_outputs(x_s)
        assert np.max(np.abs(msr.rhs(x_s, z_s, u_s, params))) < 1e-10

    def test_power_term_in_core_temperature(self, params, steady_1mw, u_ref):
        # at nominal neutron concentration the fission term adds
        # Q_g0 / (m_r c_P) = 0.05 K/s to the core temperature derivative
        x_s, u_s = steady_1mw
        x = x_s.copy()
        z = msr.delayed_outputs(x)
        x_cold = x.copy()
        x_cold[msr.IDX_CN] = 0.0
        dt_r = msr.rhs(x, z, u_s, params)[msr.IDX_TR]
        dt_r_cold = msr.rhs(x_cold, z, u_s, params)[msr.IDX_TR]
        assert x[msr.IDX_CN] == params.nominal_neutron_conc
        assert dt_r - dt_r_cold == pytest.approx(0.05, rel=1e-12)

    def test_zero_feedback_freezes_thermal_reactivity(self, params, dp_ref):
        p0 = replace(params, feedback=0.0)
        rng = np.random.default_rng(3)
        for _ in range(5):
            x, u = random_point(rng, dp_ref)
            z = rng.uniform(0.5, 2.0, msr.N_DELAYS) * msr.delayed_outputs(x)
            assert msr.rhs(x, z, u, p0)[msr.IDX_RHO_TH] == 0.0

    def test_thermal_reactivity_couples_to_core_temperature(self, params, dp_ref):
        rng = np.random.default_rng(4)
        x, u = random_point(rng, dp_ref)
        z = msr.delayed_outputs(x)
        dx = msr.rhs(x, z, u, params)
        assert dx[msr.IDX_RHO_TH] == pytest.approx(-params.feedback * dx[msr.IDX_TR],
                                                   rel=1e-12)

    def test_linear_in_memory_state(self, params, dp_ref):
        rng = np.random.default_rng(5)
        x, u = random_point(rng, dp_ref)
        z = msr.delayed_outputs(x)
        delta = rng.standard_normal(msr.N_DELAYS)
        _, dfdz, _, _ = msr.jacobians(x, z, u, params)
        lhs = msr.rhs(x, z + delta, u, params) - msr.rhs(x, z, u, params)
        np.testing.assert_allclose(lhs, dfdz @ delta, rtol=1e-9, atol=1e-12)

    def test_external_reactivity_monotone(self, params, dp_ref):
        rng = np.random.default_rng(6)
        x, u = random_point(rng, dp_ref)
        z = msr.delayed_outputs(x)
        up = u.copy()
        up[0] += 10.0
        assert (msr.rhs(x, z, up, params)[msr.IDX_CN]
                > msr.rhs(x, z, u, params)[msr.IDX_CN])

    def test_precursor_decay_feeds_neutrons(self, params, dp_ref):
        # the lambda_i C_i decay flux leaves group i and enters the neutron balance
        rng = np.random.default_rng(7)
        x, u = random_point(rng, dp_ref)
        z = msr.delayed_outputs(x)
        dfdx, _, _, _ = msr.jacobians(x, z, u, params)
        flow = msr.flow_rate(u[1], params)
        dilution = flow / params.core_volume
        for i in range(6):
            assert dfdx[msr.IDX_CN, i] == pytest.approx(params.decay_rates[i], rel=1e-12)
            assert dfdx[i, i] == pytest.approx(-params.decay_rates[i] - dilution,
                                               rel=1e-12)

    def test_nonpositive_pressure_rejected(self, params, steady_1mw):
        x_s, u_s = steady_1mw
        z_s = msr.delayed_outputs(x_s)
        with pytest.raises(ValueError):
            msr.rhs(x_s, z_s, np.array([50.0, 0.0]), params)


class TestDelayedOutputs:
    def test_projection(self):
        x = np.zeros(msr.N_STATES)
        x[:6] = np.arange(1.0, 7.0)
        x[msr.IDX_THX] = 700.0
        x[msr.IDX_TR] = 750.0
        np.testing.assert_array_equal(msr.delayed_outputs(x),
                                      [1, 2, 3, 4, 5, 6, 700, 750])

    def test_selector_matrix(self):
        h = msr.output_matrix()
        assert h.shape == (msr.N_DELAYS, msr.N_STATES)
        assert np.count_nonzero(h) == 8
        assert np.all(h[h != 0.0] == 1.0)

    def test_linearity(self):
        rng = np.random.default_rng(8)
        x, y = rng.standard_normal(msr.N_STATES), rng.standard_normal(msr.N_STATES)
        np.testing.assert_array_equal(msr.delayed_outputs(x + y),
                                      msr.delayed_outputs(x) + msr.delayed_outputs(y))


class TestMeanLags:
    def test_reference_values(self, params, u_ref):
        gamma, _ = msr.mean_lags(u_ref, params)
        np.testing.assert_allclose(gamma[msr.FULL_LOOP], 7.5, rtol=1e-12)
        np.testing.assert_allclose(gamma[msr.HALF_LOOP], 3.75, rtol=1e-12)

    def test_pressure_sensitivity(self, params, u_ref):
        gamma, dgamma = msr.mean_lags(u_ref, params)
        np.testing.assert_array_equal(dgamma[:, 0], 0.0)
        np.testing.assert_allclose(dgamma[:, 1], -gamma / u_ref[1], rtol=1e-12)

    def test_half_to_full_ratio(self, params, dp_ref):
        for scale in (0.2, 1.0, 5.0):
            gamma, _ = msr.mean_lags(np.array([0.0, scale * dp_ref]), params)
            np.testing.assert_allclose(gamma[msr.HALF_LOOP] / gamma[0], 0.5, rtol=1e-12)

    def test_nonpositive_pressure_rejected(self, params):
        with pytest.raises(ValueError):
            msr.mean_lags(np.array([0.0, -5.0]), params)


class TestThermalPower:
    def test_nominal(self, params):
        x = np.zeros(msr.N_STATES)
        x[msr.IDX_CN] = params.nominal_neutron_conc
        assert msr.thermal_power(x, params) == 1.0
        x[msr.IDX_CN] = 10.0 * params.nominal_neutron_conc
        assert msr.thermal_power(x, params) == 10.0
        x[msr.IDX_CN] = 2.5
        assert msr.thermal_power(x, params) == 2.5


class TestJacobians:
    def test_match_finite_differences(self, params, dp_ref):
        rng = np.random.default_rng(42)
        for _ in range(20):
            x, u = random_point(rng, dp_ref)
            z = rng.uniform(0.5, 2.0, msr.N_DELAYS) * msr.delayed_outputs(x)
            dfdx, dfdz, dfdu, dhdx = msr.jacobians(x, z, u, params)
            assert rel_err(fd_jacobian(lambda v: msr.rhs(v, z, u, params), x),
                           dfdx) < 1e-6
            assert rel_err(fd_jacobian(lambda v: msr.rhs(x, v, u, params), z),
                           dfdz) < 1e-6
            assert rel_err(fd_jacobian(lambda v: msr.rhs(x, z, v, params), u),
                           dfdu) < 1e-6
            assert rel_err(fd_jacobian(msr.delayed_outputs, x), dhdx) < 1e-6

    def test_memory_coupling_positive(self, params, steady_1mw):
        x_s, u_s = steady_1mw
        z_s = msr.delayed_outputs(x_s)
        _, dfdz, _, _ = msr.jacobians(x_s, z_s, u_s, params)
        gamma, _ = msr.mean_lags(u_s, params)
        dilution = msr.flow_rate(u_s[1], params) / params.core_volume
        for i in range(6):
            expected = np.exp(-params.decay_rates[i] * gamma[i]) * dilution
            assert dfdz[i, i] == pytest.approx(expected, rel=1e-12)
            assert dfdz[i, i] > 0.0


class TestSteadyState:
    def test_oracle_temperatures(self, steady_1mw):
        x_s, _ = steady_1mw
        assert x_s[msr.IDX_THX] == pytest.approx(725.15, abs=1e-12)
        assert x_s[msr.IDX_TR] == pytest.approx(725.371, abs=1e-3)

    def test_residual_norm(self, params, steady_1mw):
        x_s, u_s = steady_1mw
        z_s = msr.delayed_outputs(x_s)
        assert np.max(np.abs(msr.rhs(x_s, z_s, u_s, params))) < 1e-10

    def test_reference_input_split(self, steady_1mw, u_ref):
        _, u_s = steady_1mw
        np.testing.assert_allclose(u_s, u_ref, rtol=1e-12)

    def test_neutron_concentration_scales_with_power(self, params, u_ref):
        for target in (0.5, 1.0, 2.5, 10.0):
            x_s, _ = msr.steady_state(target, u_ref[1], u_ref[0], params)
            assert x_s[msr.IDX_CN] == pytest.approx(target, rel=1e-12)
            assert msr.thermal_power(x_s, params) == pytest.approx(target, rel=1e-12)

    def test_approximate_system_shares_steady_state(self, params, steady_1mw):
        # with constant history the memory state equals the delayed output,
        # so the approximate system's fixed-point equations are identical
        x_s, u_s = steady_1mw
        gamma, _ = msr.mean_lags(u_s, params)
        r = msr.delayed_outputs(x_s)
        z = r - 0.0 * gamma  # rdot = 0 at steady state
        assert np.max(np.abs(msr.rhs(x_s, z, u_s, params))) < 1e-10

    def test_rejects_nonpositive_targets(self, params, u_ref):
        with pytest.raises(ValueError):
            msr.steady_state(0.0, u_ref[1], u_ref[0], params)
        with pytest.raises(ValueError):
            msr.steady_state(1.0, -1.0, u_ref[0], params)


class TestParams:
    def test_beta_is_group_sum(self, params):
        assert params.beta == pytest.approx(0.00645, abs=1e-12)

    def test_validation(self, params):
        with pytest.raises(ValueError):
            replace(params, generation_time=0.0)
        with pytest.raises(ValueError):
            replace(params, feedback=-1e-5)
        # zero feedback is allowed (no thermal reactivity coupling)
        replace(params, feedback=0.0)
