import dataclasses

import numpy as np
import pytest

from cdf_lab import core, verify
from cdf_lab.heat import (HeatParams, fourier_flux, generalized_fourier,
                          heat_model, sign_flipped_heat_model)

from conftest import random_heat_states


def test_params_validation():
    with pytest.raises(ValueError):
        HeatParams(c_v=0.0)
    with pytest.raises(ValueError):
        HeatParams(lambda_=-1.0)
    with pytest.raises(ValueError):
        HeatParams(alpha0=0.0)
    with pytest.raises(ValueError):
        HeatParams(space_dim=3)


def test_flux_values_1d(heat):
    # F = (q, theta^{-1}) = (-w/alpha0, c_v/u)
    assert np.allclose(heat.flux(np.array([1.0, 0.3]), 0), [-0.3, 1.0])
    m = heat_model(HeatParams(c_v=2.0, alpha0=0.5))
    assert np.allclose(m.flux(np.array([2.0, 0.3]), 0), [-0.6, 1.0])


def test_flux_values_2d():
    m = heat_model(HeatParams(space_dim=2))
    U = np.array([1.0, 0.2, 0.5])
    assert np.allclose(m.flux(U, 0), [-0.2, 1.0, 0.0])
    assert np.allclose(m.flux(U, 1), [-0.5, 0.0, 1.0])


def test_admissibility_predicate(heat):
    assert heat.admissible(np.array([0.5, 5.0]))
    assert not heat.admissible(np.array([0.0, 0.0]))
    assert not heat.admissible(np.array([-1.0, 0.0]))
    assert not heat.admissible(np.array([np.inf, 0.0]))


def test_wave_speed_closed_form():
    m = heat_model(HeatParams(c_v=4.0, alpha0=1.0))
    # sqrt(c_v/alpha0)/u
    assert m.max_wave_speed(np.array([1.0, 0.0])) == pytest.approx(2.0)
    assert m.max_wave_speed(np.array([4.0, 0.3])) == pytest.approx(0.5)


def test_wave_speed_bounds_numeric_radius(heat):
    states = random_heat_states(1000, seed=10)
    analytic = heat.max_wave_speed(states)
    J = core.flux_jacobian(heat, states)
    numeric = np.max(np.abs(np.linalg.eigvals(J)), axis=-1)
    assert np.max(np.abs(analytic - numeric)) < 1e-8


def test_source_decay_rates():
    m = heat_model(HeatParams(lambda_=2.0, c_v=1.0, alpha0=1.0))
    # rate = 1/(alpha0 lambda theta^2); theta = u
    assert m.source_decay_rates(np.array([2.0, 0.1]))[0] == \
        pytest.approx(0.125)
    # consistency with the assembled source: Q_w = -rate * w
    states = random_heat_states(200, seed=11)
    rates = m.source_decay_rates(states)
    src = core.source(m, states)
    assert np.allclose(src[:, 1:], -rates * states[:, 1:], rtol=1e-13)


def test_derived_fields(heat):
    states = random_heat_states(100, seed=12)
    d = heat.derived(states)
    assert np.allclose(d["theta"], states[:, 0])
    assert np.allclose(d["q"], -states[:, 1])
    assert np.allclose(d["tau"], 0.0)
    assert np.allclose(d["sigma"], core.entropy_production(heat, states),
                       rtol=1e-12, atol=1e-14)


def test_fourier_flux():
    p = HeatParams(lambda_=2.0)
    assert fourier_flux(p, 0.5) == pytest.approx(-1.0)
    assert np.allclose(fourier_flux(p, np.array([1.0, -2.0])), [-2.0, 4.0])


def test_generalized_fourier_hand_values():
    M = np.diag([2.0, 4.0])
    q = generalized_fourier(M, np.array([1.0, 2.0]))
    assert np.allclose(q, [0.5, 0.5])


def test_generalized_fourier_reduces_to_fourier():
    """With M = I/(lambda theta^2) and grad(1/theta) = -grad(theta)/theta^2
    the anisotropic stationary limit collapses to q = -lambda grad(theta)."""
    rng = np.random.default_rng(13)
    p = HeatParams(lambda_=3.0, space_dim=2)
    for _ in range(20):
        theta = rng.uniform(0.5, 2.0)
        grad_theta = rng.uniform(-1.0, 1.0, 2)
        M = np.eye(2) / (p.lambda_ * theta ** 2)
        q = generalized_fourier(M, -grad_theta / theta ** 2)
        assert np.allclose(q, fourier_flux(p, grad_theta), rtol=1e-12)


def test_custom_dissipation_disables_exact_rates(heat_params):
    def aniso(U):
        M = np.zeros(U.shape[:-1] + (1, 1))
        M[..., 0, 0] = 3.0
        return M

    m = heat_model(heat_params, dissipation=aniso)
    assert m.source_decay_rates is None
    # source becomes M . eta_w = 3 * (-w)
    assert np.allclose(core.source(m, [1.0, 0.2]), [0.0, -0.6])


def test_full_audit_passes_1d(heat):
    plan = verify.SamplingPlan(seed=0, count=1000)
    report = verify.run_full_audit(heat, plan)
    assert report.passed, report.to_json()


def test_full_audit_passes_2d():
    m = heat_model(HeatParams(space_dim=2))
    plan = verify.SamplingPlan(seed=0, count=400)
    report = verify.run_full_audit(m, plan)
    assert report.passed, report.to_json()


class TestSignFlippedFixture:
    def test_concavity_fails_with_witness(self, broken_heat):
        plan = verify.SamplingPlan(seed=0, count=500)
        res = verify.check_concavity(broken_heat, plan)
        assert not res.passed
        assert res.witness_state is not None
        # wrong-sign w-block contributes eigenvalue +1/alpha0
        assert res.worst_violation == pytest.approx(1.0, rel=1e-6)

    def test_violation_scales_with_alpha0(self):
        m = sign_flipped_heat_model(HeatParams(alpha0=2.0))
        res = verify.check_concavity(m, verify.SamplingPlan(count=200))
        assert res.worst_violation == pytest.approx(0.5, rel=1e-6)

    def test_symmetrizability_also_fails(self, broken_heat):
        res = verify.check_symmetrizability(
            broken_heat, verify.SamplingPlan(count=500))
        assert not res.passed

    def test_dissipation_matrix_still_fine(self, broken_heat):
        res = verify.check_dissipation_matrix(
            broken_heat, verify.SamplingPlan(count=500))
        assert res.passed


def test_flux_tamper_breaks_symmetrizability(heat):
    def bad_flux(U, j):
        out = np.zeros_like(U)
        out[..., 0] = -U[..., 1] + U[..., 1] ** 2  # quadratic tamper
        out[..., 1] = 1.0 / U[..., 0]
        return out

    tampered = dataclasses.replace(heat, flux=bad_flux, max_wave_speed=None,
                                   name="heat-fluxtamper")
    res = verify.check_symmetrizability(tampered,
                                        verify.SamplingPlan(count=500))
    assert not res.passed
    assert res.witness_state is not None
