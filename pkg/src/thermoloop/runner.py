"""Execute a scenario: simulate, post-process, and write CSV, table, figure and report artifacts."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from thermoloop import adaptive, analysis
from thermoloop.adrc import ADRC_LABELS, AdrcField, EsoConfig, adrc_columns
from thermoloop.integrator import DivergenceError, IntegrationConfig, Trajectory, simulate, switch_field
from thermoloop.model import STATE_LABELS, ControlledField, TrackingField, jacobian
from thermoloop.plots import PlotSpec, emit_plots
from thermoloop.scenario import Scenario, serialize
from thermoloop.stability import gain_bounds

log = logging.getLogger(__name__)

X_COLS = ("x1", "x2", "x3")
Y_COLS = ("y1", "y2", "y3")
Z_COLS = ("z1", "z2", "z3")


class InfeasibleBounds(RuntimeError):
    def __init__(self, failures):
        super().__init__("gain bounds not certified: " + "; ".join(failures))
        self.failures = failures


@dataclass
class RunReport:
    scenario: str
    mode: str
    digest: str
    gains: list[float] | None = None
    bounds: dict | None = None
    final_norm: float | None = None
    metrics: dict = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    diverged: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=float)


def bounds_summary(sc: Scenario, gains=None) -> dict:
    b = gain_bounds(sc.params)
    out = {
        "feasible": b.feasible,
        "failures": list(b.failures),
        "psi": list(b.psi),
        "k1_terms": b.components,
        "k1_denominators": b.denominators,
        "K1": b.K1,
    }
    if b.feasible:
        composed = b.compose(sc.margin)
        k1, k2, _ = composed
        out.update(
            margin=sc.margin,
            k2_terms=b.k2_terms(k1),
            k2_denominators=b.k2_denominators(k1),
            K2=b.K2_of(k1),
            K3=b.K3_of(k1, k2),
            k3_denominator=b.k3_denominator(k1, k2),
            k3_flipped_sign=b.k3_flipped_sign(k1, k2),
            composed_gains=list(composed),
        )
        if gains is not None:
            out["violations"] = b.check(gains)
    return out


def resolve_gains(sc: Scenario) -> np.ndarray:
    if sc.gains is not None:
        return np.array(sc.gains)
    b = gain_bounds(sc.params)
    if not b.feasible:
        raise InfeasibleBounds(b.failures)
    return b.compose(sc.margin)


def _config(sc: Scenario) -> IntegrationConfig:
    return IntegrationConfig(t1=sc.t1, t0=sc.t0, h=sc.h, record_stride=sc.record_stride)


def _activation_hooks(sc: Scenario, field_on):
    if sc.activation <= sc.t0:
        return field_on, []
    return None, [switch_field(sc.activation, field_on)]


def _run_sim(f_off, f_on, x0, sc, labels) -> Trajectory:
    first, hooks = _activation_hooks(sc, f_on)
    return simulate(first if first is not None else f_off, x0, _config(sc), hooks, labels)


def simulate_scenario(sc: Scenario) -> tuple[Trajectory, object]:
    """Run the scenario's simulation; returns the trajectory and the active vector field."""
    x0 = np.array(sc.x0, dtype=float)
    if sc.mode == "open":
        f = ControlledField(sc.params, np.zeros(3))
        return simulate(f, x0, _config(sc), (), STATE_LABELS), f
    if sc.mode == "proportional":
        f_on = ControlledField(sc.params, resolve_gains(sc))
        return _run_sim(ControlledField(sc.params), f_on, x0, sc, STATE_LABELS), f_on
    if sc.mode == "tracking":
        f_on = TrackingField(sc.params, resolve_gains(sc), sc.refs)
        return _run_sim(ControlledField(sc.params), f_on, x0, sc, STATE_LABELS), f_on
    if sc.mode == "adaptive":
        s0 = np.concatenate([x0, sc.k0])
        f_on = adaptive.AdaptiveField(sc.params, sc.alpha, active=True)
        f_off = adaptive.AdaptiveField(sc.params, sc.alpha, active=False)
        return _run_sim(f_off, f_on, s0, sc, adaptive.ADAPTIVE_LABELS), f_on
    if sc.mode == "adrc":
        s0 = np.concatenate([x0, np.zeros(6)])
        common = dict(
            params=sc.params,
            gains=resolve_gains(sc),
            dist=sc.dist,
            eso=EsoConfig(sc.bandwidth),
            mode=sc.fhat_mode,
            feedback_terms=sc.feedback_terms,
        )
        f_on = AdrcField(control=True, cancel=sc.cancel, **common)
        f_off = AdrcField(control=False, cancel=False, **common)
        return _run_sim(f_off, f_on, s0, sc, ADRC_LABELS), f_on
    raise ValueError(f"mode {sc.mode!r} has no trajectory simulation")


def _state_plots(name: str, csv: str, title: str) -> list[PlotSpec]:
    return [
        PlotSpec(f"{name}_x", csv, (X_COLS,), title + ": velocities", ("x",)),
        PlotSpec(f"{name}_yz", csv, (Y_COLS, Z_COLS), title + ": temperature differences", ("y", "z")),
    ]


def run(sc: Scenario, out_dir=None, render: bool = True) -> RunReport:
    """Execute ``sc`` and write its artifacts into ``out_dir``.

    Raises:
        InfeasibleBounds: ``gains = auto`` but the bounds are not certified.
        DivergenceError: the run blew up; partial artifacts are written first.
    """
    out = Path(out_dir or sc.out or f"out/{sc.name}")
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.scn").write_text(serialize(sc))
    report = RunReport(sc.name, sc.mode, sc.digest())
    if sc.mode == "lyapunov":
        _run_lyapunov(sc, out, report, render)
        _write_report(report, out)
        return report

    try:
        traj, f_on = simulate_scenario(sc)
    except DivergenceError as exc:
        report.diverged = True
        if exc.trajectory is not None and len(exc.trajectory):
            report.artifacts.append(str(exc.trajectory.to_csv(out / "trajectory.csv")))
        report.metrics["diverged_at"] = exc.t
        _write_report(report, out)
        raise

    gains = getattr(f_on, "gains", None)
    if gains is not None and sc.mode != "open":
        report.gains = [float(g) for g in np.atleast_1d(gains)]
    report.bounds = bounds_summary(sc, report.gains if sc.mode in ("proportional", "tracking", "adrc") else None)
    plots = _state_plots(sc.name, "trajectory.csv", sc.name)

    if sc.mode == "tracking":
        refs = sc.refs
        yr = np.array([refs(t) for t in traj.times])
        traj = traj.with_columns(["yr1", "yr2", "yr3"], yr)
        traj = traj.with_columns(["ey1", "ey2", "ey3"], traj.columns(Y_COLS) - yr)
        for i in (1, 2, 3):
            res = analysis.tracking_error(traj, refs, i, sc.steady_from)
            report.metrics[f"tracking_rms_y{i}"] = res.rms
            if res.reference_rms > 0:
                report.metrics[f"tracking_relative_rms_y{i}"] = res.relative_rms
        plots.append(PlotSpec(f"{sc.name}_tracking", "trajectory.csv", (("y2", "yr2"), ("ey2",)),
                              sc.name + ": y2 tracking", ("y2", "error")))
    if sc.mode == "adaptive":
        k_inf, settled = adaptive.gain_plateau(traj)
        report.gains = [float(v) for v in k_inf]
        report.metrics.update(
            settled=settled,
            settling_time=adaptive.settling_time(traj),
            gains_monotone=adaptive.gains_monotone(traj),
            final_gain_violations=gain_bounds(sc.params).check(k_inf),
        )
        plots.append(PlotSpec(f"{sc.name}_gains", "trajectory.csv", (adaptive.GAIN_LABELS,),
                              sc.name + ": adaptive gains", ("k",)))
    if sc.mode == "adrc":
        traj = adrc_columns(f_on, traj)
        after = traj.times >= sc.activation
        for i in (1, 2, 3):
            e = traj.column(f"e{i}")[after]
            tail = e[len(e) * 2 // 3:]
            report.metrics[f"mean_abs_e{i}_final_third"] = float(np.mean(np.abs(tail))) if tail.size else None
        plots.append(PlotSpec(f"{sc.name}_disturbance", "trajectory.csv",
                              (("f1", "fhat1"), ("f2", "fhat2"), ("f3", "fhat3")),
                              sc.name + ": disturbance and estimate", ("loop 1", "loop 2", "loop 3"),
                              styles={f"fhat{i}": {"linestyle": "--"} for i in (1, 2, 3)}))

    report.final_norm = float(np.linalg.norm(traj.final[:9]))
    report.metrics.update(analysis.norm_summary(traj))
    report.artifacts.append(str(traj.to_csv(out / "trajectory.csv")))

    if sc.table_offset is not None:
        try:
            table = analysis.steady_state_table(traj, sc.table_offset, sc.table_rows, sc.activation)
        except ValueError as exc:
            report.metrics["table_error"] = str(exc)
        else:
            report.artifacts.append(str(table.to_csv(out / "error_table.csv")))
            (out / "error_table.txt").write_text(table.to_text())
            report.artifacts.append(str(out / "error_table.txt"))
            report.metrics["table_max"] = table.max()
            report.metrics["table_monotone_decay"] = table.monotone_decay()

    report.artifacts += [str(p) for p in emit_plots(plots, out, render=render)]
    _write_report(report, out)
    return report


def _run_lyapunov(sc: Scenario, out: Path, report: RunReport, render: bool):
    gains = np.array(sc.gains) if sc.gains is not None else np.zeros(3)
    f = ControlledField(sc.params, gains)
    spec = analysis.lyapunov_spectrum(
        f,
        lambda t, x: jacobian(sc.params, gains, x),
        sc.x0,
        horizon=sc.horizon,
        renorm_dt=sc.renorm_dt,
        h=sc.h,
        transient=sc.transient,
    )
    report.gains = [float(g) for g in gains]
    report.metrics.update(
        exponents=[float(v) for v in spec.exponents],
        n_positive=spec.n_positive,
        exponent_sum=float(spec.exponents.sum()),
        jacobian_trace=sc.params.trace(gains),
        sum_relative_error=spec.sum_error,
    )
    hist = Trajectory(
        (np.arange(len(spec.history)) + 1) * sc.renorm_dt,
        spec.history,
        [f"lambda{i}" for i in range(1, 10)],
    )
    report.artifacts.append(str(hist.to_csv(out / "lyapunov_history.csv")))
    with (out / "lyapunov_exponents.csv").open("w") as fh:
        fh.write("index,exponent\n")
        for i, v in enumerate(spec.exponents, 1):
            fh.write(f"{i},{v:.17g}\n")
    report.artifacts.append(str(out / "lyapunov_exponents.csv"))
    specs = [PlotSpec(f"{sc.name}_convergence", "lyapunov_history.csv",
                      (tuple(f"lambda{i}" for i in range(1, 7)),), sc.name + ": running exponent estimates",
                      ("exponent",))]
    report.artifacts += [str(p) for p in emit_plots(specs, out, render=render)]


def _write_report(report: RunReport, out: Path):
    path = out / "report.json"
    report.artifacts.append(str(path))
    path.write_text(report.to_json())
