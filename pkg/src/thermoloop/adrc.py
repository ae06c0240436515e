"""Linear extended state observers and the decentralized ADRC closed loop."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from thermoloop.expr import Expression
from thermoloop.integrator import Trajectory
from thermoloop.model import STATE_LABELS, SystemParams, as_gains, rhs_disturbed
from thermoloop.stability import build_A, lyapunov_gradient

OBSERVER_LABELS = ("yhat1_1", "yhat1_2", "yhat2_1", "yhat2_2", "yhat3_1", "yhat3_2")
ADRC_LABELS = STATE_LABELS + OBSERVER_LABELS
FHAT_MODES = ("proof", "verbatim")

BENCHMARK_DISTURBANCES = ("30*sin(x*z)", "x*y*cos(5*t)", "30*sin(3*t)")


@dataclass(frozen=True)
class EsoConfig:
    bandwidth: float
    order: int = 1

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"observer bandwidth must be positive, got {self.bandwidth}")
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"observer order must be a positive integer, got {self.order}")


def eso_gains(cfg: EsoConfig) -> np.ndarray:
    """``beta_i = C(n+1, i) B^i`` so the error polynomial is ``(s + B)^(n+1)``."""
    n, B = cfg.order, cfg.bandwidth
    return np.array([comb(n + 1, i) * B**i for i in range(1, n + 2)], dtype=float)


def eso_error_matrix(cfg: EsoConfig) -> np.ndarray:
    """State matrix of the observer error dynamics (``g`` taken as zero)."""
    beta = eso_gains(cfg)
    m = cfg.order + 1
    E = np.diag(np.ones(m - 1), 1)
    E[:, 0] = -beta
    return E


def eso_rhs_general(cfg: EsoConfig, measured_y: float, u: float, xhat) -> np.ndarray:
    """Order-``n`` observer for a chain of integrators with an extended state."""
    beta = eso_gains(cfg)
    xhat = np.asarray(xhat, dtype=float)
    innov = measured_y - xhat[0]
    d = beta * innov
    d[:-1] += xhat[1:]
    d[-2] += u
    return d


def eso_rhs(cfg: EsoConfig, loop_index: int, measured_y: float, u: float, xhat) -> np.ndarray:
    """Per-loop first-order observer: ``(yhat_1, yhat_2)`` derivative."""
    if cfg.order != 1:
        raise ValueError("the per-loop observer is first order")
    if loop_index not in (1, 2, 3):
        raise ValueError(f"loop index must be 1, 2 or 3, got {loop_index}")
    b1, b2 = eso_gains(cfg)
    innov = measured_y - xhat[0]
    return np.array([xhat[1] + b1 * innov + u, b2 * innov])


@dataclass(frozen=True)
class DisturbanceSet:
    """Three disturbances, each a function of its own loop's ``x, y, z`` and ``t``."""

    exprs: tuple[Expression, Expression, Expression]

    @classmethod
    def parse(cls, sources: Sequence[str]) -> "DisturbanceSet":
        if len(sources) != 3:
            raise ValueError("need exactly three disturbance expressions")
        return cls(tuple(Expression.parse(src, {"x", "y", "z", "t"}) for src in sources))

    @classmethod
    def benchmark(cls) -> "DisturbanceSet":
        return cls.parse(BENCHMARK_DISTURBANCES)

    @classmethod
    def zero(cls) -> "DisturbanceSet":
        return cls.parse(["0", "0", "0"])

    @property
    def sources(self) -> tuple[str, str, str]:
        return tuple(e.source for e in self.exprs)

    def __call__(self, s: np.ndarray, t: float) -> np.ndarray:
        return np.array([
            e(x=s[3 * i], y=s[3 * i + 1], z=s[3 * i + 2], t=t) for i, e in enumerate(self.exprs)
        ])


def f_hat(loop_index: int, params: SystemParams, s, yhat2: float, gain: float | None = None, mode: str = "proof") -> float:
    """Disturbance estimate for one loop from the observer's extended state.

    ``proof`` mode removes the known model part ``R x - x z - k y`` from the
    extended-state estimate and needs the loop's total proportional gain;
    ``verbatim`` mode removes ``R x - x z - y`` instead.
    """
    i = loop_index - 1
    x, y, z = s[3 * i], s[3 * i + 1], s[3 * i + 2]
    base = yhat2 - params.R[i] * x + x * z
    if mode == "proof":
        if gain is None:
            raise ValueError("proof mode needs the loop gain")
        return base + gain * y
    if mode == "verbatim":
        return base + y
    raise ValueError(f"unknown f_hat mode {mode!r}; expected one of {FHAT_MODES}")


@dataclass(frozen=True)
class AdrcField:
    """Plant with disturbances plus one observer per loop, as a 15-state field.

    Attributes:
        gains: proportional gains ``k``; they act only while ``control`` is on.
        control: proportional feedback ``-k y`` enabled.
        cancel: disturbance cancellation ``-f_hat`` enabled.
        feedback_terms: 1 applies ``-k y`` once (through ``u``); 2 also keeps
            the in-plant ``-k y`` term, doubling the proportional action.

    The observers always run.  Their input is the cancellation signal, so
    the extended state estimates everything else in the y-equation,
    including the proportional action.
    """

    params: SystemParams
    gains: np.ndarray
    dist: DisturbanceSet
    eso: EsoConfig
    mode: str = "proof"
    control: bool = True
    cancel: bool = True
    feedback_terms: int = 1

    def __post_init__(self):
        object.__setattr__(self, "gains", as_gains(self.gains))
        if self.mode not in FHAT_MODES:
            raise ValueError(f"unknown f_hat mode {self.mode!r}")
        if self.feedback_terms not in (1, 2):
            raise ValueError("feedback_terms must be 1 or 2")
        object.__setattr__(self, "_beta", eso_gains(self.eso))

    @property
    def total_gains(self) -> np.ndarray:
        return self.feedback_terms * self.gains if self.control else np.zeros(3)

    def estimates(self, combined) -> np.ndarray:
        s, obs = combined[:9], combined[9:]
        k = self.total_gains
        return np.array([
            f_hat(i + 1, self.params, s, obs[2 * i + 1], k[i], self.mode) for i in range(3)
        ])

    def cancellation(self, combined) -> np.ndarray:
        return -self.estimates(combined) if self.cancel else np.zeros(3)

    def __call__(self, t: float, combined: np.ndarray) -> np.ndarray:
        s, obs = combined[:9], combined[9:]
        ua = self.cancellation(combined)
        k = self.gains if self.control else np.zeros(3)
        Y = s[1::3]

        def ctrl(_t, _s):
            return ua - k * Y

        out = np.empty(15)
        out[:9] = rhs_disturbed(
            self.params, k, self.dist, ctrl, t, s, plant_feedback=self.feedback_terms == 2
        )
        b1, b2 = self._beta
        yh1, yh2 = obs[0::2], obs[1::2]
        innov = Y - yh1
        out[9::2] = yh2 + b1 * innov + ua
        out[10::2] = b2 * innov
        return out

    def lyapunov_residual(self, t: float, combined) -> tuple[float, float]:
        """``(V' + s^T A s - sum y_i e_i, scale)`` with ``A`` at the total gains.

        ``V'`` is computed as ``grad V`` dotted with the plant derivative.
        """
        s = np.asarray(combined[:9], dtype=float)
        vdot = float(lyapunov_gradient(self.params, s) @ self(t, combined)[:9])
        quad = float(s @ build_A(self.params, self.total_gains) @ s)
        e = self.dist(s, t) + self.cancellation(combined)
        cross = float(s[1::3] @ e)
        return vdot + quad - cross, max(abs(vdot), abs(quad), abs(cross), 1e-300)


def adrc_columns(field: AdrcField, traj: Trajectory) -> Trajectory:
    """Append ``f_i``, ``fhat_i`` and ``e_i = f_i - fhat_i`` columns to an ADRC trajectory."""
    rows = []
    for t, c in zip(traj.times, traj.states):
        f = field.dist(c[:9], t)
        fh = field.estimates(c)
        rows.append(np.concatenate([f, fh, f - fh]))
    names = [f"f{i}" for i in (1, 2, 3)] + [f"fhat{i}" for i in (1, 2, 3)] + [f"e{i}" for i in (1, 2, 3)]
    return traj.with_columns(names, np.array(rows))


def error_filter_response(bandwidth: float, omega: float) -> tuple[float, float]:
    """Magnitudes of the extended-state transfer ``B^2/(s+B)^2`` and of its residual at ``s = j omega``.

    Returns ``(|estimate / signal|, |residual / signal|)`` for a first-order
    observer tracking a sinusoid in the extended state.
    """
    s = 1j * omega
    g = bandwidth**2 / (s + bandwidth) ** 2
    return abs(g), abs(1 - g)
