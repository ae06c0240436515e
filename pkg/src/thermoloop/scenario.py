"""Scenario files: flat ``key = value`` entries grouped in ``[section]`` blocks.

Example::

    [scenario]
    name = table1_adaptive
    mode = adaptive

    [params]
    R = 35, 45, 38
    gamma = 0.1, 0.3, 0.2
    eta = 0.1, 0.1, 0.2

    [control]
    alpha = 0.8, 0.8, 0.8
    activation = 30

    [integration]
    t1 = 70
    x0 = -8, -6, 5, 3, 7, 11, 10, -10, 2

Lines starting with ``#`` are comments.  Vectors are comma separated.
``gains = auto`` selects the bound-derived gains at the configured margin.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path

from thermoloop.adrc import FHAT_MODES, DisturbanceSet
from thermoloop.expr import ExpressionError
from thermoloop.model import ReferenceSignals, SystemParams

MODES = ("open", "proportional", "tracking", "adaptive", "adrc", "lyapunov")


class ScenarioError(ValueError):
    """Collected diagnostics, each naming the offending key and line."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("\n".join(diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Scenario:
    name: str
    mode: str
    params: SystemParams
    x0: tuple[float, ...] = (-8.0, -6.0, 5.0, 3.0, 7.0, 11.0, 10.0, -10.0, 2.0)
    t0: float = 0.0
    t1: float = 60.0
    h: float = 1e-3
    record_stride: int = 1
    gains: tuple[float, float, float] | None = None  # None means bound-derived
    margin: float = 1.01
    activation: float = 0.0
    alpha: tuple[float, float, float] = (0.8, 0.8, 0.8)
    k0: tuple[float, float, float] = (0.0, 0.0, 0.0)
    references: tuple[str, str, str] = ("0", "0", "0")
    disturbances: tuple[str, str, str] = ("0", "0", "0")
    bandwidth: float = 60.0
    fhat_mode: str = "proof"
    cancel: bool = True
    feedback_terms: int = 1
    table_offset: float | None = None
    table_rows: int = 10
    steady_from: float | None = None
    horizon: float = 500.0
    renorm_dt: float = 0.5
    transient: float = 100.0
    out: str = ""

    @property
    def refs(self) -> ReferenceSignals:
        return ReferenceSignals.parse(self.references)

    @property
    def dist(self) -> DisturbanceSet:
        return DisturbanceSet.parse(self.disturbances)

    def digest(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()[:16]

    def with_overrides(self, **kw) -> "Scenario":
        return replace(self, **kw)


# key -> (section, Scenario field, kind)
_KEYS = {
    ("scenario", "name"): ("name", "str"),
    ("scenario", "mode"): ("mode", "str"),
    ("params", "R"): ("R", "vec3"),
    ("params", "gamma"): ("gamma", "vec3"),
    ("params", "eta"): ("eta", "vec3"),
    ("params", "p"): ("p", "float"),
    ("control", "gains"): ("gains", "gains"),
    ("control", "margin"): ("margin", "float"),
    ("control", "activation"): ("activation", "float"),
    ("control", "alpha"): ("alpha", "vec3"),
    ("control", "k0"): ("k0", "vec3"),
    ("control", "bandwidth"): ("bandwidth", "float"),
    ("control", "fhat_mode"): ("fhat_mode", "str"),
    ("control", "cancel"): ("cancel", "bool"),
    ("control", "feedback_terms"): ("feedback_terms", "int"),
    ("references", "y1"): ("ref1", "expr"),
    ("references", "y2"): ("ref2", "expr"),
    ("references", "y3"): ("ref3", "expr"),
    ("disturbances", "f1"): ("dist1", "expr"),
    ("disturbances", "f2"): ("dist2", "expr"),
    ("disturbances", "f3"): ("dist3", "expr"),
    ("integration", "t0"): ("t0", "float"),
    ("integration", "t1"): ("t1", "float"),
    ("integration", "h"): ("h", "float"),
    ("integration", "record_stride"): ("record_stride", "int"),
    ("integration", "x0"): ("x0", "vec9"),
    ("lyapunov", "horizon"): ("horizon", "float"),
    ("lyapunov", "renorm_dt"): ("renorm_dt", "float"),
    ("lyapunov", "transient"): ("transient", "float"),
    ("output", "dir"): ("out", "str"),
    ("output", "table_offset"): ("table_offset", "float"),
    ("output", "table_rows"): ("table_rows", "int"),
    ("output", "steady_from"): ("steady_from", "float"),
}

_REQUIRED = {
    "open": (),
    "proportional": (),
    "tracking": ("gains",),
    "adaptive": ("alpha",),
    "adrc": ("gains",),
    "lyapunov": (),
}


def _convert(kind: str, raw: str):
    if kind == "str":
        return raw
    if kind == "float":
        return float(raw)
    if kind == "int":
        v = float(raw)
        if v != int(v):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(v)
    if kind == "bool":
        low = raw.lower()
        if low in ("on", "true", "yes", "1"):
            return True
        if low in ("off", "false", "no", "0"):
            return False
        raise ValueError(f"expected on/off, got {raw!r}")
    if kind in ("vec3", "vec9", "gains"):
        if kind == "gains" and raw.lower() == "auto":
            return None
        vals = tuple(float(v) for v in raw.split(","))
        n = 9 if kind == "vec9" else 3
        if len(vals) != n:
            raise ValueError(f"expected {n} comma-separated values, got {len(vals)}")
        return vals
    if kind == "expr":
        return raw
    raise AssertionError(kind)


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    """Parse and validate scenario text, collecting every diagnostic before raising."""
    diags: list[str] = []
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in {s for s, _ in _KEYS}:
                diags.append(f"{source}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in stripped:
            diags.append(f"{source}:{lineno}: expected 'key = value', got {stripped!r}")
            continue
        key, raw = (part.strip() for part in stripped.split("=", 1))
        spec = _KEYS.get((section, key))
        if spec is None:
            diags.append(f"{source}:{lineno}: unknown key {key!r} in section [{section}]")
            continue
        name, kind = spec
        if name in values:
            diags.append(f"{source}:{lineno}: duplicate key {key!r}")
            continue
        try:
            values[name] = _convert(kind, raw)
        except ValueError as exc:
            diags.append(f"{source}:{lineno}: {key}: {exc}")
            continue
        lines[name] = lineno

    def where(name):
        return f"{source}:{lines[name]}" if name in lines else source

    mode = values.get("mode")
    if mode is None:
        diags.append(f"{source}: missing required key 'mode' in [scenario]")
    elif mode not in MODES:
        diags.append(f"{where('mode')}: mode {mode!r} not one of {', '.join(MODES)}")
    for name in ("R", "gamma", "eta"):
        if name not in values:
            diags.append(f"{source}: missing required key {name!r} in [params]")
    for name in ("gamma", "eta"):
        vals = values.get(name)
        if vals is not None and not all(0 < v < 1 for v in vals):
            diags.append(f"{where(name)}: {name} out of (0,1): {vals}")
    if "R" in values and not all(v > 0 for v in values["R"]):
        diags.append(f"{where('R')}: R must be positive: {values['R']}")
    if "p" in values and not values["p"] > 0:
        diags.append(f"{where('p')}: p must be positive")
    if mode in _REQUIRED:
        for name in _REQUIRED[mode]:
            if name not in values:
                diags.append(f"{source}: mode {mode!r} requires key {name!r} in [control]")
    if "alpha" in values and not all(a > 0 for a in values["alpha"]):
        diags.append(f"{where('alpha')}: learning rates must be positive")
    if "fhat_mode" in values and values["fhat_mode"] not in FHAT_MODES:
        diags.append(f"{where('fhat_mode')}: fhat_mode must be one of {', '.join(FHAT_MODES)}")
    if "feedback_terms" in values and values["feedback_terms"] not in (1, 2):
        diags.append(f"{where('feedback_terms')}: feedback_terms must be 1 or 2")
    if "bandwidth" in values and not values["bandwidth"] > 0:
        diags.append(f"{where('bandwidth')}: bandwidth must be positive")
    if "h" in values and not values["h"] > 0:
        diags.append(f"{where('h')}: step size must be positive")
    if values.get("t1", 60.0) <= values.get("t0", 0.0):
        diags.append(f"{where('t1')}: t1 must exceed t0")

    refs = tuple(values.pop(f"ref{i}", "0") for i in (1, 2, 3))
    dists = tuple(values.pop(f"dist{i}", "0") for i in (1, 2, 3))
    for i, src in enumerate(refs, 1):
        try:
            ReferenceSignals.parse(["0", "0", "0"][: i - 1] + [src] + ["0"] * (3 - i))
        except ExpressionError as exc:
            diags.append(f"{where(f'ref{i}')}: y{i}: {exc}")
    for i, src in enumerate(dists, 1):
        try:
            DisturbanceSet.parse(["0"] * (i - 1) + [src] + ["0"] * (3 - i))
        except ExpressionError as exc:
            diags.append(f"{where(f'dist{i}')}: f{i}: {exc}")
    if diags:
        raise ScenarioError(diags)

    params = SystemParams(values.pop("R"), values.pop("gamma"), values.pop("eta"), values.pop("p", 10.0))
    kwargs = {k: v for k, v in values.items()}
    kwargs.setdefault("name", Path(source).stem if source != "<scenario>" else "scenario")
    return Scenario(params=params, references=refs, disturbances=dists, **kwargs)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(float(x)) for x in v)
    return str(v)


def serialize(sc: Scenario) -> str:
    """Canonical text form; ``parse_scenario(serialize(sc)) == sc``."""
    defaults = {f.name: f.default for f in fields(Scenario) if f.name not in ("name", "mode", "params")}
    flat = {f.name: getattr(sc, f.name) for f in fields(Scenario)}
    flat.update(R=sc.params.R, gamma=sc.params.gamma, eta=sc.params.eta, p=sc.params.p)
    for i in range(3):
        flat[f"ref{i + 1}"] = sc.references[i]
        flat[f"dist{i + 1}"] = sc.disturbances[i]
    out: list[str] = []
    current = None
    for (section, key), (name, kind) in _KEYS.items():
        value = flat[name]
        always = name in ("name", "mode", "R", "gamma", "eta", "p", "gains") or name in _REQUIRED.get(sc.mode, ())
        if name.startswith(("ref", "dist")):
            if value == "0":
                continue
        elif not always and name in defaults and value == defaults[name]:
            continue
        if section != current:
            if out:
                out.append("")
            out.append(f"[{section}]")
            current = section
        if kind == "gains" and value is None:
            text = "auto"
        elif kind == "float":
            text = repr(float(value))
        else:
            text = _fmt(value)
        out.append(f"{key} = {text}")
    return "\n".join(out) + "\n"


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), str(path))


def bundled_names() -> list[str]:
    pkg = resources.files("thermoloop") / "scenarios"
    return sorted(p.name[:-4] for p in pkg.iterdir() if p.name.endswith(".scn"))


def bundled(name: str) -> Scenario:
    pkg = resources.files("thermoloop") / "scenarios"
    res = pkg / f"{name}.scn"
    if not res.is_file():
        raise FileNotFoundError(f"no bundled scenario {name!r}; have {', '.join(bundled_names())}")
    return parse_scenario(res.read_text(encoding="utf-8"), f"{name}.scn")
