from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoloop.model import SystemParams
from thermoloop.scenario import (
    MODES,
    Scenario,
    ScenarioError,
    bundled,
    bundled_names,
    parse_scenario,
    serialize,
)

MINIMAL = """\
[scenario]
name = demo
mode = adaptive

[params]
R = 35, 45, 38
gamma = 0.1, 0.3, 0.2
eta = 0.1, 0.1, 0.2

[control]
alpha = 0.8, 0.8, 0.8
"""


def diagnostics(text):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text, "s.scn")
    return info.value.diagnostics


def test_table1_bundle_values():
    sc = bundled("table1_adaptive")
    assert sc.mode == "adaptive"
    assert sc.params.R == (35, 45, 38)
    assert sc.params.gamma == (0.1, 0.3, 0.2)
    assert sc.params.eta == (0.1, 0.1, 0.2)
    assert sc.params.p == 10.0
    assert sc.alpha == (0.8, 0.8, 0.8)
    assert sc.x0 == (-8, -6, 5, 3, 7, 11, 10, -10, 2)
    assert sc.activation == 30.0 and sc.h == 1e-3


def test_table2_bundle_disturbances():
    sc = bundled("table2_adrc")
    assert sc.disturbances == ("30*sin(x*z)", "x*y*cos(5*t)", "30*sin(3*t)")
    assert sc.gains == (48, 46, 50) and sc.bandwidth == 60.0 and sc.activation == 40.0
    np.testing.assert_allclose(sc.dist(np.ones(9), 0.0), [30 * np.sin(1.0), 1.0, 0.0])


def test_gamma_out_of_range():
    d = diagnostics(MINIMAL.replace("gamma = 0.1, 0.3, 0.2", "gamma = 1.5, 0.3, 0.2"))
    assert d == ["s.scn:7: gamma out of (0,1): (1.5, 0.3, 0.2)"]


def test_diagnostics_collected_with_lines():
    text = MINIMAL.replace("eta = 0.1, 0.1, 0.2", "eta = 0.1, 0.1\ncolour = red") + "\n[extras]\n"
    d = diagnostics(text)
    assert any(x.startswith("s.scn:8: eta: expected 3") for x in d)
    assert any(x.startswith("s.scn:9: unknown key 'colour'") for x in d)
    assert any("unknown section [extras]" in x for x in d)


def test_mode_required_keys():
    d = diagnostics(MINIMAL.replace("mode = adaptive", "mode = adrc"))
    assert d == ["s.scn: mode 'adrc' requires key 'gains' in [control]"]
    d = diagnostics(MINIMAL.replace("alpha = 0.8, 0.8, 0.8", "activation = 1"))
    assert d == ["s.scn: mode 'adaptive' requires key 'alpha' in [control]"]


def test_expression_diagnostics():
    d = diagnostics(MINIMAL + "\n[disturbances]\nf2 = sin(x1)\n")
    assert len(d) == 1 and d[0].startswith("s.scn:14: f2:") and "x1" in d[0]
    d = diagnostics(MINIMAL + "\n[references]\ny1 = y*t\n")
    assert d[0].startswith("s.scn:14: y1:")


def test_duplicate_and_malformed():
    d = diagnostics(MINIMAL + "alpha = 1, 1, 1\nnot a pair\n")
    assert any("duplicate key 'alpha'" in x for x in d)
    assert any("expected 'key = value'" in x for x in d)


def test_gains_auto():
    sc = parse_scenario(MINIMAL.replace("mode = adaptive", "mode = proportional") + "gains = auto\n")
    assert sc.gains is None
    assert "gains = auto" in serialize(sc)


@pytest.mark.parametrize("name", bundled_names())
def test_bundled_round_trip(name):
    sc = bundled(name)
    text = serialize(sc)
    again = parse_scenario(text, f"{name}.scn")
    assert again == sc
    assert serialize(again) == text


def test_digest_tracks_content():
    sc = bundled("table1_adaptive")
    assert sc.digest() == bundled("table1_adaptive").digest()
    assert replace(sc, h=5e-4).digest() != sc.digest()


def test_unknown_bundle():
    with pytest.raises(FileNotFoundError):
        bundled("nope")


unit = st.floats(0.01, 0.99)
vec = st.tuples(unit, unit, unit)


@settings(max_examples=60, deadline=None)
@given(
    mode=st.sampled_from(MODES),
    R=st.tuples(*[st.floats(1, 100)] * 3),
    gamma=vec,
    eta=vec,
    h=st.floats(1e-5, 1e-2),
    gains=st.one_of(st.none(), st.tuples(*[st.floats(0, 1e4)] * 3)),
    cancel=st.booleans(),
    refs=st.sampled_from(["0", "sin(t)", "15*sin(2*t)+12*cos(3*t)"]),
)
def test_round_trip_property(mode, R, gamma, eta, h, gains, cancel, refs):
    sc = Scenario(
        name="gen", mode=mode, params=SystemParams(R, gamma, eta), h=h,
        gains=gains if gains is not None or mode not in ("tracking", "adrc") else (1.0, 2.0, 3.0),
        cancel=cancel, references=("0", refs, "0"),
    )
    assert parse_scenario(serialize(sc)) == sc
