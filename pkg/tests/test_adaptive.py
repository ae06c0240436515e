import numpy as np
import pytest

from conftest import X0, random_params
from thermoloop.adaptive import (
    ADAPTIVE_LABELS,
    AdaptiveField,
    augmented_Vdot,
    gain_plateau,
    gains_monotone,
    rhs_adaptive,
    settling_time,
    shifted_form_check,
)
from thermoloop.integrator import IntegrationConfig, Trajectory, simulate
from thermoloop.model import rhs_controlled
from thermoloop.stability import gain_bounds


@pytest.fixture(scope="module")
def stabilized_run():
    from thermoloop.model import SystemParams

    params = SystemParams(R=(35, 45, 38), gamma=(0.1, 0.3, 0.2), eta=(0.1, 0.1, 0.2))
    s0 = np.concatenate([X0, np.zeros(3)])
    cfg = IntegrationConfig(t1=80.0, record_stride=10)
    return params, simulate(AdaptiveField(params, (2.5, 2.5, 2.5)), s0, cfg, labels=ADAPTIVE_LABELS)


def test_gains_frozen_without_y(base_params):
    s = np.concatenate([[1.0, 0.0, 2.0, -3.0, 0.0, 1.0, 0.5, 0.0, -1.0], [5.0, 6.0, 7.0]])
    d = rhs_adaptive(base_params, (0.8, 0.8, 0.8), s)
    np.testing.assert_array_equal(d[9:], 0.0)
    np.testing.assert_array_equal(d[:9], rhs_controlled(base_params, (5, 6, 7), s[:9]))


def test_gain_law(base_params, rng):
    s = np.concatenate([rng.normal(size=9), [1.0, 2.0, 3.0]])
    d = rhs_adaptive(base_params, (0.5, 1.0, 2.0), s)
    np.testing.assert_allclose(d[9:], np.array([0.5, 1.0, 2.0]) * s[1::3][:3] ** 2)


def test_rates_validated(base_params):
    with pytest.raises(ValueError):
        rhs_adaptive(base_params, (0.8, 0.0, 0.8), np.zeros(12))


def test_shifted_form(base_params, rng):
    s = np.concatenate([rng.normal(scale=5, size=9), rng.normal(size=3)])
    assert shifted_form_check(base_params, np.zeros(3), s) == 0.0
    assert shifted_form_check(base_params, rng.uniform(10, 100, 3), s) < 1e-11


def test_augmented_decrement_free_of_rates(rng):
    for _ in range(20):
        p = random_params(rng)
        k_star = rng.uniform(0, 200, 3)
        s = np.concatenate([rng.normal(scale=5, size=9), rng.normal(scale=3, size=3)])
        direct, quad = augmented_Vdot(p, (0.3, 1.0, 4.0), k_star, s)
        other, _ = augmented_Vdot(p, (2.0, 0.1, 0.7), k_star, s)
        assert direct == pytest.approx(quad, rel=1e-10, abs=1e-9)
        assert other == pytest.approx(direct, rel=1e-10, abs=1e-9)


def test_inactive_field_freezes_gains(base_params):
    s = np.concatenate([X0, [3.0, 4.0, 5.0]])
    d = AdaptiveField(base_params, (0.8, 0.8, 0.8), active=False)(0.0, s)
    np.testing.assert_array_equal(d[9:], 0.0)
    np.testing.assert_array_equal(d[:9], rhs_controlled(base_params, (0, 0, 0), X0))


def test_stabilized_run_settles(stabilized_run):
    params, traj = stabilized_run
    assert gains_monotone(traj)
    k_inf, settled = gain_plateau(traj)
    assert settled
    assert gain_bounds(params).check(k_inf) == []
    assert np.linalg.norm(traj.final[:9]) < 1e-2
    t_settle = settling_time(traj)
    assert t_settle is not None and t_settle < traj.times[-1]


def test_mid_transient_not_settled(stabilized_run):
    _, traj = stabilized_run
    cut = np.searchsorted(traj.times, 3.0)
    early = Trajectory(traj.times[:cut], traj.states[:cut], traj.labels)
    assert not gain_plateau(early)[1]


def test_plateau_gains_nondecreasing_in_time(stabilized_run):
    _, traj = stabilized_run
    prev = np.zeros(3)
    for cut in (500, 1000, 2000, len(traj)):
        part = Trajectory(traj.times[:cut], traj.states[:cut], traj.labels)
        k, _ = gain_plateau(part)
        assert np.all(k >= prev)
        prev = k


def test_monotone_detects_decrease():
    traj = Trajectory([0, 1, 2], np.array([[1, 1, 1], [2, 2, 2], [2, 1.5, 2]], float), ("k1", "k2", "k3"))
    assert not gains_monotone(traj)
