"""Parameters, state layout and vector fields of the triple-loop thermosyphon.

State vectors are flat arrays ordered ``(x1, y1, z1, x2, y2, z2, x3, y3, z3)``;
``x`` is the loop fluid velocity, ``y`` and ``z`` the horizontal and vertical
temperature differences.  Loops 1-2 share coupling index 1, loops 1-3 index 2
and loops 2-3 index 3, for both the momentum (``gamma``) and thermal (``eta``)
couplings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from thermoloop.expr import Expression

STATE_LABELS = ("x1", "y1", "z1", "x2", "y2", "z2", "x3", "y3", "z3")
N_STATES = 9

# (i, j) loop pairs for coupling indices 1, 2, 3
COUPLING_PAIRS = ((0, 1), (0, 2), (1, 2))


class StateError(ValueError):
    """Raised when a vector field receives or produces non-finite values."""


def _coupling_laplacian(c: np.ndarray) -> np.ndarray:
    L = np.zeros((3, 3))
    for (i, j), w in zip(COUPLING_PAIRS, c):
        L[i, i] += w
        L[j, j] += w
        L[i, j] -= w
        L[j, i] -= w
    return L


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the coupled loops.

    Attributes:
        R: Rayleigh numbers of loops 1..3.
        gamma: momentum couplings for loop pairs (1,2), (1,3), (2,3).
        eta: thermal couplings for the same pairs.
        p: Prandtl-like parameter.

    The zero-coupling limit ``gamma = eta = 0`` is accepted here so the
    decoupled system can be studied; scenario files require the open
    interval (0, 1).
    """

    R: tuple[float, float, float]
    gamma: tuple[float, float, float]
    eta: tuple[float, float, float]
    p: float = 10.0

    def __post_init__(self):
        for name in ("R", "gamma", "eta"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != 3:
                raise ValueError(f"{name} needs 3 values, got {len(vals)}")
            if not all(np.isfinite(vals)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "p", float(self.p))
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")
        if min(self.R) <= 0:
            raise ValueError(f"Rayleigh numbers must be positive, got {self.R}")
        for name in ("gamma", "eta"):
            vals = getattr(self, name)
            if min(vals) < 0 or max(vals) >= 1:
                raise ValueError(f"{name} out of (0,1): {vals}")

    @cached_property
    def R_arr(self) -> np.ndarray:
        return np.array(self.R)

    @cached_property
    def momentum_laplacian(self) -> np.ndarray:
        return _coupling_laplacian(np.array(self.gamma))

    @cached_property
    def thermal_laplacian(self) -> np.ndarray:
        return _coupling_laplacian(np.array(self.eta))

    @cached_property
    def jacobian_base(self) -> np.ndarray:
        return _jacobian_base(self)

    def trace(self, gains) -> float:
        """Divergence of the controlled vector field (state independent)."""
        return (
            -self.p * (3 + 2 * sum(self.gamma))
            - float(np.sum(gains))
            - (3 + 2 * sum(self.eta))
        )


def as_gains(k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if k.shape != (3,):
        raise ValueError(f"expected 3 gains, got shape {k.shape}")
    return k


def _check_state(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape != (N_STATES,):
        raise StateError(f"expected a 9-state vector, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise StateError(f"non-finite state: {s}")
    return s


def _open_loop(params: SystemParams, s: np.ndarray) -> tuple[np.ndarray, ...]:
    X, Y, Z = s[0::3], s[1::3], s[2::3]
    dx = params.p * (Y - X - params.momentum_laplacian @ X)
    dy = params.R_arr * X - X * Z
    dz = X * Y - Z - params.thermal_laplacian @ Z
    return dx, dy, dz, Y


def _pack(dx, dy, dz) -> np.ndarray:
    out = np.empty(N_STATES)
    out[0::3] = dx
    out[1::3] = dy
    out[2::3] = dz
    return out


@dataclass(frozen=True)
class ReferenceSignals:
    """Three tracking references ``y_r1..3(t)`` given as expressions in ``t``."""

    exprs: tuple[Expression, Expression, Expression]

    @classmethod
    def parse(cls, sources: Sequence[str]) -> "ReferenceSignals":
        if len(sources) != 3:
            raise ValueError("need exactly three reference expressions")
        return cls(tuple(Expression.parse(src, {"t"}) for src in sources))

    @classmethod
    def zero(cls) -> "ReferenceSignals":
        return cls.parse(["0", "0", "0"])

    def __call__(self, t: float) -> np.ndarray:
        return np.array([e(t=t) for e in self.exprs])

    @property
    def sources(self) -> tuple[str, str, str]:
        return tuple(e.source for e in self.exprs)


def rhs_tracking(params: SystemParams, gains, refs: Callable[[float], np.ndarray], t: float, s) -> np.ndarray:
    """Vector field with tracking control ``u_i = -k_i (y_i - y_ri(t))``."""
    s = _check_state(s)
    dx, dy, dz, Y = _open_loop(params, s)
    dy = dy - as_gains(gains) * (Y - refs(t))
    return _pack(dx, dy, dz)


def rhs_controlled(params: SystemParams, gains, s) -> np.ndarray:
    """Vector field with decentralized feedback ``u_i = -k_i y_i``."""
    s = _check_state(s)
    dx, dy, dz, Y = _open_loop(params, s)
    dy = dy - as_gains(gains) * Y
    return _pack(dx, dy, dz)


def rhs_disturbed(
    params: SystemParams,
    gains,
    dist: Callable[[np.ndarray, float], np.ndarray],
    ctrl: Callable[[float, np.ndarray], np.ndarray],
    t: float,
    s,
    plant_feedback: bool = False,
) -> np.ndarray:
    """Vector field with disturbances ``f_i`` and control inputs ``u_i`` on the y-equations.

    By default the y-equations read ``R x - x z + f + u`` so that the whole
    proportional action lives in ``u``.  With ``plant_feedback=True`` the
    y-equations carry an additional in-plant ``-k_i y_i`` term, which is the
    literal reading of the disturbed model.
    """
    s = _check_state(s)
    dx, dy, dz, Y = _open_loop(params, s)
    f = np.asarray(dist(s, t), dtype=float)
    u = np.asarray(ctrl(t, s), dtype=float)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(u))):
        raise StateError(f"non-finite disturbance {f} or control {u} at t={t}")
    dy = dy + f + u
    if plant_feedback:
        dy = dy - as_gains(gains) * Y
    return _pack(dx, dy, dz)


def _jacobian_base(params: SystemParams) -> np.ndarray:
    J = np.zeros((N_STATES, N_STATES))
    ix = np.arange(0, 9, 3)
    J[np.ix_(ix, ix)] = -params.p * (np.eye(3) + params.momentum_laplacian)
    J[np.ix_(ix + 2, ix + 2)] = -(np.eye(3) + params.thermal_laplacian)
    J[ix, ix + 1] = params.p
    J[ix + 1, ix] = params.R_arr
    return J


def jacobian(params: SystemParams, gains, s) -> np.ndarray:
    """Analytic Jacobian of :func:`rhs_controlled` at ``s``."""
    s = _check_state(s)
    J = params.jacobian_base.copy()
    ix = np.arange(0, 9, 3)
    iy, iz = ix + 1, ix + 2
    X, Y, Z = s[ix], s[iy], s[iz]
    J[iy, ix] -= Z
    J[iy, iy] = -as_gains(gains)
    J[iy, iz] = -X
    J[iz, ix] = Y
    J[iz, iy] = X
    return J


@dataclass(frozen=True)
class ControlledField:
    """``rhs_controlled`` bound to fixed parameters and gains, as ``f(t, s)``."""

    params: SystemParams
    gains: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __call__(self, t: float, s: np.ndarray) -> np.ndarray:
        return rhs_controlled(self.params, self.gains, s)


@dataclass(frozen=True)
class TrackingField:
    params: SystemParams
    gains: np.ndarray
    refs: ReferenceSignals

    def __call__(self, t: float, s: np.ndarray) -> np.ndarray:
        return rhs_tracking(self.params, self.gains, self.refs, t, s)
