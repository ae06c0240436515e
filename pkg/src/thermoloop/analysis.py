"""Post-processing of trajectories: Lyapunov spectra, steady-state tables, tracking errors."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from thermoloop.integrator import DivergenceError, Trajectory, rk4_step
from thermoloop.model import STATE_LABELS


@dataclass
class LyapunovSpectrum:
    exponents: np.ndarray
    horizon: float
    renorm_dt: float
    mean_trace: float
    history: np.ndarray = field(repr=False, default_factory=lambda: np.empty((0, 0)))

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.exponents > 0))

    @property
    def sum_error(self) -> float:
        """Relative gap between the exponent sum and the time-averaged Jacobian trace."""
        return abs(self.exponents.sum() - self.mean_trace) / abs(self.mean_trace)


def _tangent_rk4(f, jac, t, x, Q, h):
    k1 = f(t, x)
    K1 = jac(t, x) @ Q
    x2 = x + 0.5 * h * k1
    k2 = f(t + 0.5 * h, x2)
    K2 = jac(t + 0.5 * h, x2) @ (Q + 0.5 * h * K1)
    x3 = x + 0.5 * h * k2
    k3 = f(t + 0.5 * h, x3)
    K3 = jac(t + 0.5 * h, x3) @ (Q + 0.5 * h * K2)
    x4 = x + h * k3
    k4 = f(t + h, x4)
    K4 = jac(t + h, x4) @ (Q + h * K3)
    return (
        x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4),
        Q + (h / 6.0) * (K1 + 2 * K2 + 2 * K3 + K4),
    )


def lyapunov_spectrum(
    f: Callable[[float, np.ndarray], np.ndarray],
    jac: Callable[[float, np.ndarray], np.ndarray],
    x0,
    horizon: float,
    renorm_dt: float = 0.5,
    h: float = 1e-3,
    transient: float = 100.0,
) -> LyapunovSpectrum:
    """Full spectrum by tangent-space integration with periodic QR re-orthonormalization.

    The state is first integrated for ``transient`` time units without the
    tangent frame; exponents are then averaged over ``horizon``.
    """
    per = int(round(renorm_dt / h))
    if per < 1 or abs(per * h - renorm_dt) > 1e-9 * renorm_dt:
        raise ValueError(f"renorm_dt={renorm_dt} must be a positive multiple of h={h}")
    x = np.array(x0, dtype=float)
    n = x.size
    t = 0.0
    for j in range(int(round(transient / h))):
        x = rk4_step(f, j * h, x, h)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > 1e9:
            raise DivergenceError("divergence during transient", j * h, x)
    t0 = transient
    Q = np.eye(n)
    sums = np.zeros(n)
    trace_sum = 0.0
    n_blocks = int(round(horizon / renorm_dt))
    history = np.empty((n_blocks, n))
    step = 0
    for b in range(n_blocks):
        for _ in range(per):
            t = t0 + step * h
            trace_sum += np.trace(jac(t, x))
            x, Q = _tangent_rk4(f, jac, t, x, Q, h)
            step += 1
        if not np.all(np.isfinite(x)):
            raise DivergenceError("divergence during spectrum estimation", t, x)
        Q, Rm = np.linalg.qr(Q)
        d = np.diag(Rm)
        # keep orientation so that log|r_ii| is the stretch of column i
        Q = Q * np.sign(d)
        sums += np.log(np.abs(d))
        history[b] = sums / ((b + 1) * renorm_dt)
    total = n_blocks * renorm_dt
    exps = np.sort(sums / total)[::-1]
    return LyapunovSpectrum(exps, total, renorm_dt, trace_sum / step, history)


@dataclass
class ErrorTable:
    """Absolute state values at consecutive recorded samples."""

    times: np.ndarray
    values: np.ndarray
    labels: tuple[str, ...]

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("t",) + self.labels)
            for t, row in zip(self.times, self.values):
                w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
        return path

    def to_text(self) -> str:
        width = 12
        lines = ["".join(f"{lab:>{width}}" for lab in self.labels)]
        for row in self.values:
            lines.append("".join(f"{v:>{width}.4e}" for v in row))
        return "\n".join(lines) + "\n"

    def max(self) -> float:
        return float(self.values.max())

    def monotone_decay(self, slack: float = 0.01) -> bool:
        """Every row is at most ``(1 + slack)`` times the row above, componentwise."""
        v = self.values
        return bool(np.all(v[1:] <= v[:-1] * (1 + slack)))


def steady_state_table(
    traj: Trajectory,
    t_offset: float,
    n_rows: int = 10,
    activation: float = 0.0,
    labels: Sequence[str] = STATE_LABELS,
) -> ErrorTable:
    """``|state|`` at ``n_rows`` consecutive records starting ``t_offset`` after ``activation``."""
    start = activation + t_offset
    idx = np.searchsorted(traj.times, start - 1e-9 * max(1.0, abs(start)))
    if idx + n_rows > len(traj):
        raise ValueError(
            f"trajectory ends at t={traj.times[-1]:g}; need {n_rows} records from t={start:g}"
        )
    sl = slice(idx, idx + n_rows)
    return ErrorTable(traj.times[sl].copy(), np.abs(traj.columns(labels)[sl]), tuple(labels))


@dataclass
class TrackingResult:
    times: np.ndarray
    error: np.ndarray
    rms: float
    reference_rms: float

    @property
    def relative_rms(self) -> float:
        return self.rms / self.reference_rms if self.reference_rms > 0 else float("inf")


def tracking_error(traj: Trajectory, refs, loop_index: int, steady_from: float | None = None) -> TrackingResult:
    """``y_i - y_ri`` over the run and its RMS over ``t >= steady_from``.

    ``steady_from`` defaults to the second half of the run.
    """
    y = traj.column(f"y{loop_index}")
    r = np.array([refs(t)[loop_index - 1] for t in traj.times])
    err = y - r
    if steady_from is None:
        steady_from = 0.5 * (traj.times[0] + traj.times[-1])
    mask = traj.times >= steady_from
    rms = float(np.sqrt(np.mean(err[mask] ** 2)))
    ref_rms = float(np.sqrt(np.mean(r[mask] ** 2)))
    return TrackingResult(traj.times, err, rms, ref_rms)


def spectral_peak_ratio(
    times: np.ndarray, signal: np.ndarray, omegas: Sequence[float], band: float = 5.0
) -> float:
    """Largest amplitude at the given angular frequencies over the median amplitude below ``band * max(omegas)``.

    The floor is taken over a band around the probed frequencies because a
    finely sampled smooth signal has almost no energy near Nyquist, which
    would make any peak look dominant.
    """
    dt = times[1] - times[0]
    sig = signal - signal.mean()
    window = np.hanning(sig.size)
    amp = np.abs(np.fft.rfft(sig * window))
    freqs = 2 * np.pi * np.fft.rfftfreq(sig.size, dt)
    peak = max(amp[np.argmin(np.abs(freqs - w))] for w in omegas)
    in_band = (freqs > 0) & (freqs <= band * max(omegas))
    floor = np.median(amp[in_band])
    return float(peak / floor) if floor > 0 else float("inf")


def norm_history(traj: Trajectory, labels: Sequence[str] = STATE_LABELS) -> np.ndarray:
    return np.linalg.norm(traj.columns(labels), axis=1)


def norm_summary(traj: Trajectory, labels: Sequence[str] = STATE_LABELS) -> dict[str, float]:
    n = norm_history(traj, labels)
    return {"initial_norm": float(n[0]), "max_norm": float(n.max()), "final_norm": float(n[-1])}
