"""Command-line front end.

Exit codes: 0 success, 1 scenario diagnostics, 2 divergence, 3 infeasible bounds.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from thermoloop.integrator import DivergenceError
from thermoloop.runner import InfeasibleBounds, bounds_summary, run
from thermoloop.scenario import (
    Scenario,
    ScenarioError,
    bundled,
    bundled_names,
    load_scenario,
    parse_scenario,
    serialize,
)

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_DIVERGED, EXIT_INFEASIBLE = 0, 1, 2, 3

REPRODUCE = {
    "fig2": ["fig2_tracking"],
    "fig3": ["table1_adaptive"],
    "fig4": ["fig4_adaptive"],
    "fig5": ["fig5a_no_adrc", "table2_adrc"],
    "fig6": ["table2_adrc"],
    "table1": ["table1_adaptive"],
    "table2": ["table2_adrc"],
}

MODE_COMMANDS = {
    "simulate": ("open", "proportional", "tracking"),
    "adaptive": ("adaptive",),
    "adrc": ("adrc",),
    "lyapunov": ("lyapunov",),
}


def resolve_scenario(ref: str) -> Scenario:
    """A scenario file path, or the name of a bundled scenario."""
    path = Path(ref)
    if path.is_file():
        return load_scenario(path)
    return bundled(ref)


def _apply_flags(sc: Scenario, args) -> Scenario:
    kw = {}
    if getattr(args, "step", None) is not None:
        kw["h"] = args.step
    if getattr(args, "margin", None) is not None:
        kw["margin"] = args.margin
    if getattr(args, "mode", None) is not None:
        kw["fhat_mode"] = args.mode
    return replace(sc, **kw) if kw else sc


def _print_bounds(sc: Scenario, as_json: bool):
    info = bounds_summary(sc, list(sc.gains) if sc.gains is not None else None)
    if as_json:
        print(json.dumps(info, indent=2, default=float))
        return info
    print(f"scenario {sc.name}: R={sc.params.R} gamma={sc.params.gamma} eta={sc.params.eta}")
    print(f"psi = {', '.join(f'{v:.6g}' for v in info['psi'])}")
    print(f"{'inequality':<12}{'bound':>16}{'denominator':>16}")
    for name, val in info["k1_terms"].items():
        print(f"k1 {name:<9}{val:>16.8g}{info['k1_denominators'][name]:>16.8g}")
    if not info["feasible"]:
        for failure in info["failures"]:
            print(f"INFEASIBLE: {failure}")
        return info
    for name, val in info["k2_terms"].items():
        print(f"k2 {name:<9}{val:>16.8g}{info['k2_denominators'][name]:>16.8g}")
    print(f"k3 {'A8':<9}{info['K3']:>16.8g}{info['k3_denominator']:>16.8g}")
    print(f"(k3 bound with the gain-free denominator term's sign flipped: {info['k3_flipped_sign']:.8g})")
    k = info["composed_gains"]
    print(f"K1 = {info['K1']:.8g}; K2(k1) = {info['K2']:.8g}; K3(k1, k2) = {info['K3']:.8g}")
    print(f"gains at margin {info['margin']}: k = ({k[0]:.8g}, {k[1]:.8g}, {k[2]:.8g})")
    if "violations" in info:
        print("scenario gains:", "satisfy all bounds" if not info["violations"] else "; ".join(info["violations"]))
    return info


def _summarize(report):
    print(f"[{report.scenario}] mode={report.mode} digest={report.digest}")
    if report.gains is not None:
        print("  gains: " + ", ".join(f"{g:.6g}" for g in report.gains))
    if report.final_norm is not None:
        print(f"  final state norm: {report.final_norm:.6g}")
    for key, val in report.metrics.items():
        print(f"  {key}: {val}")
    for a in report.artifacts:
        print(f"  wrote {a}")


def _run_one(sc: Scenario, out, render: bool):
    report = run(sc, out, render=render)
    _summarize(report)
    table = Path(out or sc.out or f"out/{sc.name}") / "error_table.txt"
    if table.exists():
        print(table.read_text(), end="")
    return report


def apply_override(text: str, assignment: str) -> str:
    """Set ``section.key = value`` in scenario text, adding the key if needed."""
    target, value = assignment.split("=", 1)
    section, key = target.strip().split(".", 1)
    lines = text.splitlines()
    current, insert_at = None, None
    for i, line in enumerate(lines):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if current == section:
                insert_at = i + 1
            continue
        if current == section and "=" in s and s.split("=", 1)[0].strip() == key:
            lines[i] = f"{key} = {value.strip()}"
            return "\n".join(lines) + "\n"
    if insert_at is None:
        lines += ["", f"[{section}]", f"{key} = {value.strip()}"]
    else:
        lines.insert(insert_at, f"{key} = {value.strip()}")
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermoloop", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_required=True):
        p.add_argument("--scenario", required=scenario_required, help="scenario file or bundled name")
        p.add_argument("--out", help="output directory")
        p.add_argument("--step", type=float, help="override the integration step h")
        p.add_argument("--margin", type=float, help="bound margin multiplier for gains = auto")
        p.add_argument("--mode", choices=("proof", "verbatim"), help="disturbance-estimate formula")
        p.add_argument("--no-render", action="store_true", help="write the plot script but no PNG files")

    p = sub.add_parser("bounds", help="print the gain bounds for a scenario's parameters")
    p.add_argument("--scenario", required=True)
    p.add_argument("--margin", type=float)
    p.add_argument("--json", action="store_true", help="machine-readable output")

    for name, modes in MODE_COMMANDS.items():
        common(sub.add_parser(name, help=f"run a {'/'.join(modes)} scenario"))

    p = sub.add_parser("reproduce", help="rerun a figure or table with the bundled scenarios")
    p.add_argument("target", choices=sorted(REPRODUCE))
    p.add_argument("--out", default="out")
    p.add_argument("--step", type=float)
    p.add_argument("--no-render", action="store_true")

    p = sub.add_parser("sweep", help="run scenario variants on worker threads")
    p.add_argument("--scenario", action="append", required=True, help="repeatable")
    p.add_argument("--vary", help="section.key=v1;v2;... applied to each scenario")
    p.add_argument("--out", default="out/sweep")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--no-render", action="store_true")

    sub.add_parser("list", help="list bundled scenarios")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except ScenarioError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except InfeasibleBounds as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


def _dispatch(args) -> int:
    if args.command == "list":
        for name in bundled_names():
            print(name)
        return EXIT_OK
    if args.command == "bounds":
        sc = _apply_flags(resolve_scenario(args.scenario), args)
        info = _print_bounds(sc, args.json)
        return EXIT_OK if info["feasible"] else EXIT_INFEASIBLE
    if args.command in MODE_COMMANDS:
        sc = _apply_flags(resolve_scenario(args.scenario), args)
        if sc.mode not in MODE_COMMANDS[args.command]:
            raise ScenarioError([f"{args.scenario}: mode {sc.mode!r} cannot run under '{args.command}'"])
        _run_one(sc, args.out, not args.no_render)
        return EXIT_OK
    if args.command == "reproduce":
        for name in REPRODUCE[args.target]:
            sc = _apply_flags(bundled(name), args)
            _run_one(sc, Path(args.out) / args.target / name, not args.no_render)
        return EXIT_OK
    if args.command == "sweep":
        return _sweep(args)
    raise AssertionError(args.command)


def _sweep(args) -> int:
    jobs = []
    for ref in args.scenario:
        path = Path(ref)
        text = path.read_text() if path.is_file() else serialize(bundled(ref))
        if args.vary:
            target, values = args.vary.split("=", 1)
            for i, v in enumerate(values.split(";")):
                variant = apply_override(text, f"{target}={v}")
                sc = parse_scenario(variant, f"{ref}[{target}={v.strip()}]")
                jobs.append((replace(sc, name=f"{sc.name}_{i}"), v.strip()))
        else:
            jobs.append((parse_scenario(text, ref), ""))

    def one(job):
        sc, label = job
        try:
            return sc, label, run(sc, Path(args.out) / sc.name, render=not args.no_render), None
        except (DivergenceError, InfeasibleBounds) as exc:
            return sc, label, None, exc

    status = EXIT_OK
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        for sc, label, report, err in pool.map(one, jobs):
            tag = f"{sc.name}" + (f" ({label})" if label else "")
            if err is not None:
                print(f"{tag}: {type(err).__name__}: {err}")
                status = max(status, EXIT_DIVERGED if isinstance(err, DivergenceError) else EXIT_INFEASIBLE)
            else:
                print(f"{tag}: final norm {report.final_norm}, metrics {json.dumps(report.metrics, default=float)}")
    return status


if __name__ == "__main__":
    sys.exit(main())
