from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import X0, random_params
from thermoloop.integrator import IntegrationConfig, simulate
from thermoloop.model import ControlledField, SystemParams
from thermoloop.stability import (
    build_A,
    closed_form_minors,
    eta_factors,
    gain_bounds,
    is_positive_definite,
    lyapunov_V,
    lyapunov_Vdot,
    lyapunov_Vdot_direct,
    principal_minor,
    psi,
)


def test_decoupled_A_is_block_diagonal():
    p = SystemParams(R=(30, 40, 50), gamma=(0, 0, 0), eta=(0, 0, 0))
    k = np.array([7.0, 8.0, 9.0])
    expected = np.zeros((9, 9))
    for i in range(3):
        R = p.R[i]
        expected[3 * i:3 * i + 2, 3 * i:3 * i + 2] = [[R, -R], [-R, k[i]]]
        expected[3 * i + 2, 3 * i + 2] = 1.0
    np.testing.assert_array_equal(build_A(p, k), expected)


def test_A_entries(base_params):
    A = build_A(base_params, (1, 2, 3))
    assert np.array_equal(A, A.T)
    assert A[0, 3] == pytest.approx(-(35 + 45) * 0.1 / 2)
    assert A[0, 0] == pytest.approx(35 * 1.4)
    assert A[2, 8] == pytest.approx(-0.1)


def test_psi_values(base_params):
    assert psi(base_params).psi1 == pytest.approx(2850.5)
    unit = SystemParams(R=(1, 1, 5), gamma=(0, 0, 0), eta=(0.1, 0.1, 0.1))
    assert psi(unit).psi1 == 1.0


def test_principal_minor_range(base_params):
    A = build_A(base_params, (1, 2, 3))
    assert principal_minor(A, 1) == pytest.approx(A[0, 0], rel=1e-14)
    with pytest.raises(ValueError):
        principal_minor(A, 10)


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_closed_form_minors_at_bounds(base_params):
    k = gain_bounds(base_params).compose(1.1)
    A = build_A(base_params, k)
    closed = closed_form_minors(base_params, k)
    for i in range(1, 10):
        assert _rel(closed[i - 1], principal_minor(A, i)) < 1e-10
    assert closed[0] == pytest.approx(35 * 1.4, rel=1e-15)
    d1 = 1 + 0.1 + 0.1
    assert _rel(closed[2], d1 * (35 * k[0] * 1.4 - 35**2)) < 1e-12


def test_eta_ratios(base_params):
    k = gain_bounds(base_params).compose(1.2)
    A = build_A(base_params, k)
    m = [principal_minor(A, i) for i in range(1, 10)]
    d1, d2, d3 = eta_factors(base_params)
    assert m[5] / m[4] == pytest.approx(d2 / d1, rel=1e-10)
    assert m[8] / m[7] == pytest.approx(d3 / d2, rel=1e-10)
    assert m[7] == pytest.approx(k[2] * m[6] - 38**2 * m[5], rel=1e-10)


def test_k1_bounds_decoupled_limit():
    p = SystemParams(R=(35, 45, 38), gamma=(0, 0, 0), eta=(0.1, 0.1, 0.2))
    b = gain_bounds(p)
    assert b.components["A2"] == 35.0
    assert b.K1 == pytest.approx(35.0, rel=1e-14)


def test_bound_values_at_adaptive_parameters(base_params):
    b = gain_bounds(base_params)
    assert b.feasible
    assert b.components["A2"] == pytest.approx(25.0)
    assert b.K1 == pytest.approx(26.429256, rel=1e-7)
    assert b.K1 >= b.components["A2"]
    k = b.compose(1.01)
    np.testing.assert_allclose(k, [26.693549, 78.195868, 8389.8165], rtol=1e-7)


def test_k3_bound_is_where_A8_vanishes(base_params):
    b = gain_bounds(base_params)
    k1, k2, _ = b.compose(1.05)
    k3 = b.K3_of(k1, k2)
    minors = closed_form_minors(base_params, (k1, k2, k3))
    assert abs(minors[7]) < 1e-9 * abs(k3 * minors[6])
    # the flipped-sign variant does not zero A_8
    assert b.k3_flipped_sign(k1, k2) < 0


def test_infeasible_parameters_report_failures():
    b = gain_bounds(SystemParams(R=(1, 100, 1), gamma=(0.9, 0.9, 0.9), eta=(0.1, 0.1, 0.1)))
    assert not b.feasible
    assert any(f.startswith("psi1") for f in b.failures)
    assert np.isnan(b.K1)


def test_check_lists_violations(base_params):
    b = gain_bounds(base_params)
    k = b.compose(1.01)
    assert b.check(k) == []
    assert b.check((20.0, k[1], k[2]))[0].startswith("k1 <=")
    assert b.check((k[0], k[1], 0.9 * k[2])) == ["k3 <= A8"]


def test_positive_definite_verdicts(base_params):
    assert is_positive_definite(np.eye(9)).positive_definite
    b = gain_bounds(base_params)
    assert is_positive_definite(build_A(base_params, b.compose(1.1))).positive_definite
    small = SystemParams(R=(35, 45, 38), gamma=(0.01, 0.01, 0.01), eta=(0.1, 0.1, 0.2))
    k1 = 0.99 * gain_bounds(small).components["A2"]
    verdict = is_positive_definite(build_A(small, (k1, 1e3, 1e5)))
    assert not verdict.positive_definite
    assert verdict.witness_minor == 2
    assert verdict.witness.startswith("A_2")


def test_non_symmetric_rejected():
    A = np.eye(3)
    A[0, 1] = 1.0
    with pytest.raises(ValueError):
        is_positive_definite(A)


def test_lyapunov_at_origin(base_params):
    assert lyapunov_V(base_params, np.zeros(9)) == 0.0
    assert lyapunov_Vdot(base_params, (1, 2, 3), np.zeros(9)) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lyapunov_identity_property(seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng)
    k = rng.uniform(0, 200, 3)
    s = rng.normal(scale=10, size=9)
    a, b = lyapunov_Vdot_direct(p, k, s), lyapunov_Vdot(p, k, s)
    scale = abs(lyapunov_V(p, s)) * (p.p + k.max() + max(p.R)) + np.abs(s).max() ** 3
    assert abs(a - b) <= 1e-10 * scale


def test_V_nonincreasing_after_activation(base_params):
    k = gain_bounds(base_params).compose(1.3)
    traj = simulate(ControlledField(base_params, k), X0, IntegrationConfig(t1=20.0, record_stride=10))
    V = np.array([lyapunov_V(base_params, s) for s in traj.states])
    assert np.all(np.diff(V) <= 1e-12 * V[:-1])


def test_bounds_independent_of_eta(base_params, rng):
    b = gain_bounds(base_params)
    k1 = 30.0
    for _ in range(10):
        other = replace(base_params, eta=tuple(rng.uniform(0.01, 0.99, 3)))
        c = gain_bounds(other)
        assert c.K1 == b.K1 and c.K2_of(k1) == b.K2_of(k1) and c.K3_of(k1, 90.0) == b.K3_of(k1, 90.0)
