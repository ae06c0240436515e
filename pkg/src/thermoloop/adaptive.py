"""Decentralized adaptive gain search ``k_i' = alpha_i y_i^2`` on the 12-state extended system."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from thermoloop.integrator import Trajectory
from thermoloop.model import STATE_LABELS, SystemParams, StateError, rhs_controlled
from thermoloop.stability import build_A

GAIN_LABELS = ("k1", "k2", "k3")
ADAPTIVE_LABELS = STATE_LABELS + GAIN_LABELS

PLATEAU_TOL = 1e-6


def _rates(alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (3,) or not np.all(alpha > 0):
        raise ValueError(f"learning rates must be 3 positive values, got {alpha}")
    return alpha


def _split(state) -> tuple[np.ndarray, np.ndarray]:
    state = np.asarray(state, dtype=float)
    if state.shape != (12,):
        raise StateError(f"expected a 12-entry adaptive state, got shape {state.shape}")
    return state[:9], state[9:]


def rhs_adaptive(params: SystemParams, rates, state) -> np.ndarray:
    """Controlled flow with live gains taken from ``state[9:]`` plus the gain law."""
    alpha = _rates(rates)
    x, k = _split(state)
    out = np.empty(12)
    out[:9] = rhs_controlled(params, k, x)
    out[9:] = alpha * x[1::3] ** 2
    return out


def rhs_shifted(params: SystemParams, rates, k_star, state) -> np.ndarray:
    """Same dynamics written in the offsets ``k_hat = k - k_star``.

    The y-equations carry ``-k_hat_i y_i - k*_i y_i`` as two separate terms.
    """
    alpha = _rates(rates)
    x, k_hat = _split(state)
    k_star = np.asarray(k_star, dtype=float)
    out = np.empty(12)
    out[:9] = rhs_controlled(params, np.zeros(3), x)
    Y = x[1::3]
    out[1:9:3] += -k_hat * Y - k_star * Y
    out[9:] = alpha * Y**2
    return out


def shifted_form_check(params: SystemParams, k_star, state, rates=(1.0, 1.0, 1.0)) -> float:
    """Max-abs difference between the original and shifted adaptive dynamics.

    ``state`` holds ``(x, k_hat)``; the original form is evaluated at
    ``k = k_hat + k_star``.
    """
    x, k_hat = _split(state)
    k_star = np.asarray(k_star, dtype=float)
    original = rhs_adaptive(params, rates, np.concatenate([x, k_hat + k_star]))
    shifted = rhs_shifted(params, rates, k_star, state)
    return float(np.max(np.abs(original - shifted)))


def augmented_V(params: SystemParams, rates, state) -> float:
    alpha = _rates(rates)
    x, k_hat = _split(state)
    X, Y, Z = x[0::3], x[1::3], x[2::3]
    return 0.5 * float(np.sum(params.R_arr / params.p * X**2 + Y**2 + Z**2 + k_hat**2 / alpha))


def augmented_gradient(params: SystemParams, rates, state) -> np.ndarray:
    alpha = _rates(rates)
    g = np.asarray(state, dtype=float).copy()
    g[0:9:3] *= params.R_arr / params.p
    g[9:] /= alpha
    return g


def augmented_Vdot(params: SystemParams, rates, k_star, state) -> tuple[float, float]:
    """``(grad V . field, -x^T A(k*) x)`` for the shifted adaptive system."""
    x, _ = _split(state)
    direct = float(augmented_gradient(params, rates, state) @ rhs_shifted(params, rates, k_star, state))
    return direct, -float(x @ build_A(params, k_star) @ x)


@dataclass(frozen=True)
class AdaptiveField:
    """Adaptive closed loop as ``f(t, s)``; with ``active=False`` gains are frozen and no control acts."""

    params: SystemParams
    rates: tuple[float, float, float]
    active: bool = True

    def __call__(self, t: float, state: np.ndarray) -> np.ndarray:
        if self.active:
            return rhs_adaptive(self.params, self.rates, state)
        out = np.zeros(12)
        out[:9] = rhs_controlled(self.params, np.zeros(3), state[:9])
        return out


def gain_plateau(traj: Trajectory, fraction: float = 0.1, tol: float = PLATEAU_TOL) -> tuple[np.ndarray, bool]:
    """Final gains and whether they grew by less than ``tol`` over the last ``fraction`` of the horizon."""
    if not all(traj.has(g) for g in GAIN_LABELS):
        raise KeyError("trajectory lacks gain columns k1, k2, k3")
    K = traj.columns(GAIN_LABELS)
    t = traj.times
    start = t[-1] - fraction * (t[-1] - t[0])
    window = K[t >= start]
    increase = window.max(axis=0) - window[0]
    return K[-1].copy(), bool(np.all(increase < tol))


def settling_time(traj: Trajectory, tol: float = PLATEAU_TOL) -> float | None:
    """Earliest recorded time after which no gain increases by ``tol`` or more.

    Returns ``None`` when the gains are still moving at the end of the run.
    """
    K = traj.columns(GAIN_LABELS)
    remaining = K[-1] - K
    ok = np.all(remaining < tol, axis=1)
    # first index from which ok holds through the end
    bad = np.flatnonzero(~ok)
    idx = 0 if bad.size == 0 else bad[-1] + 1
    if idx >= len(traj):
        return None
    return float(traj.times[idx])


def gains_monotone(traj: Trajectory) -> bool:
    K = traj.columns(GAIN_LABELS)
    return bool(np.all(np.diff(K, axis=0) >= 0))
