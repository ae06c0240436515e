"""Fixed-step classical RK4 integration with trajectory recording and switch hooks."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

VectorField = Callable[[float, np.ndarray], np.ndarray]

DIVERGENCE_THRESHOLD = 1e9


class DivergenceError(RuntimeError):
    """Integration produced a non-finite or runaway state.

    Attributes:
        t: time at which divergence was detected.
        x: last state (may contain non-finite entries).
        trajectory: partial trajectory recorded up to the failure, if any.
    """

    def __init__(self, message: str, t: float, x: np.ndarray, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.t = t
        self.x = x
        self.trajectory = trajectory


@dataclass(frozen=True)
class IntegrationConfig:
    t1: float
    t0: float = 0.0
    h: float = 1e-3
    record_stride: int = 1

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"step size must be positive, got {self.h}")
        if not self.t1 > self.t0:
            raise ValueError(f"need t1 > t0, got t0={self.t0}, t1={self.t1}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError(f"record_stride must be a positive integer, got {self.record_stride}")
        if self.n_steps < 1:
            raise ValueError("interval shorter than one step")

    @property
    def n_steps(self) -> int:
        return int(round((self.t1 - self.t0) / self.h))

    def time_at(self, step: int) -> float:
        return self.t0 + step * self.h


@dataclass
class Trajectory:
    """Recorded samples of a run: ``states[j]`` is the state at ``times[j]``."""

    times: np.ndarray
    states: np.ndarray
    labels: tuple[str, ...]
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float).reshape(len(self.times), -1)
        self.labels = tuple(self.labels)
        if self.states.shape[1] != len(self.labels):
            raise ValueError(f"{len(self.labels)} labels for {self.states.shape[1]} columns")

    def __len__(self) -> int:
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.states[:, self.labels.index(name)]
        except ValueError:
            raise KeyError(f"trajectory has no column {name!r}") from None

    def columns(self, names: Sequence[str]) -> np.ndarray:
        return np.column_stack([self.column(n) for n in names])

    def has(self, name: str) -> bool:
        return name in self.labels

    def with_columns(self, names: Sequence[str], values: np.ndarray) -> "Trajectory":
        values = np.asarray(values, dtype=float).reshape(len(self.times), -1)
        return Trajectory(
            self.times,
            np.hstack([self.states, values]),
            self.labels + tuple(names),
            self.diverged,
            dict(self.meta),
        )

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("t",) + self.labels)
            for t, row in zip(self.times, self.states):
                writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
        return path

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = np.array([[float(v) for v in row] for row in reader], dtype=float)
        rows = rows.reshape(-1, len(header))
        return cls(rows[:, 0], rows[:, 1:], header[1:])


@dataclass(frozen=True)
class Hook:
    """Switch applied once at the first step boundary at or after ``time``.

    ``apply(field, x)`` returns the ``(field, x)`` pair to continue with;
    controller activations swap the field and leave ``x`` untouched.
    """

    time: float
    apply: Callable[[VectorField, np.ndarray], tuple[VectorField, np.ndarray]]


def switch_field(time: float, new_field: VectorField) -> Hook:
    return Hook(time, lambda _f, x: (new_field, x))


def rk4_step(f: VectorField, t: float, x: np.ndarray, h: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    k1 = f(t, x)
    _check_stage(k1, t, x)
    k2 = f(t + 0.5 * h, x + (0.5 * h) * k1)
    _check_stage(k2, t, x)
    k3 = f(t + 0.5 * h, x + (0.5 * h) * k2)
    _check_stage(k3, t, x)
    k4 = f(t + h, x + h * k3)
    _check_stage(k4, t, x)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_stage(k, t, x):
    if not np.all(np.isfinite(k)):
        raise DivergenceError(f"non-finite stage derivative at t={t}", t, np.array(x, copy=True))


def simulate(
    f: VectorField,
    x0,
    cfg: IntegrationConfig,
    hooks: Sequence[Hook] = (),
    labels: Sequence[str] | None = None,
    threshold: float = DIVERGENCE_THRESHOLD,
) -> Trajectory:
    """Integrate ``x' = f(t, x)`` from ``cfg.t0`` to ``cfg.t1`` with fixed step ``cfg.h``.

    Hooks fire at step boundaries, so an activation time is quantized up
    to the next multiple of ``h`` (error at most ``h``).  States are
    recorded every ``cfg.record_stride`` steps, including the initial one.

    Raises:
        DivergenceError: with the partial trajectory attached (``diverged``
            set) when the state becomes non-finite or exceeds ``threshold``.
    """
    x = np.array(x0, dtype=float)
    if labels is None:
        labels = tuple(f"s{i}" for i in range(x.size))
    times_hook = [hk.time for hk in hooks]
    if times_hook != sorted(times_hook):
        raise ValueError("hooks must be sorted by time")
    if any(t < cfg.t0 or t > cfg.t1 for t in times_hook):
        raise ValueError(f"hook times must lie in [{cfg.t0}, {cfg.t1}]")

    n = cfg.n_steps
    stride = cfg.record_stride
    h = cfg.h
    # boundary tolerance absorbs representation error of t0 + j*h
    tol = 1e-9 * h
    pending = list(hooks)
    times: list[float] = []
    rows: list[np.ndarray] = []

    def partial(t, message):
        traj = Trajectory(times, rows if rows else np.empty((0, x.size)), labels, diverged=True)
        return DivergenceError(message, t, np.array(x, copy=True), traj)

    for j in range(n + 1):
        t = cfg.time_at(j)
        while pending and pending[0].time <= t + tol:
            f, x = pending.pop(0).apply(f, x)
            x = np.array(x, dtype=float)
        if j % stride == 0:
            times.append(t)
            rows.append(x.copy())
        if j == n:
            break
        try:
            x = rk4_step(f, t, x, h)
        except DivergenceError as exc:
            raise partial(exc.t, str(exc)) from None
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > threshold:
            raise partial(t + h, f"state diverged at t={t + h:g} (norm {np.linalg.norm(x):.3g})")
    return Trajectory(np.array(times), np.array(rows), labels)
