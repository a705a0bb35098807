import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tsxplain.core import Attribution, BadParams, CounterfactualResult, RangeViolation, ShapeMismatch
from tsxplain.viz import (
    DIVERGING,
    SEQUENTIAL,
    NothingChanged,
    PlotStyle,
    colormap_hex,
    render_attribution,
    render_counterfactual,
)

NS = "{http://www.w3.org/2000/svg}"


def oracle_hex(v, cmap):
    """Linear blend between anchor colours, written independently."""
    anchors = {"diverging": [(-1, "1F77B4"), (0, "FFFFFF"), (1, "D62728")],
               "sequential": [(0, "FFFFFF"), (1, "D62728")]}[cmap]
    v = min(max(v, anchors[0][0]), anchors[-1][0])
    for (v0, c0), (v1, c1) in zip(anchors, anchors[1:]):
        if v0 <= v <= v1:
            f = (v - v0) / (v1 - v0)
            rgb = [int(c0[i:i + 2], 16) + (int(c1[i:i + 2], 16) - int(c0[i:i + 2], 16)) * f for i in (0, 2, 4)]
            return "#" + "".join(f"{int(np.floor(c + 0.5)):02X}" for c in rgb)


def parse(svg):
    return ET.fromstring(svg.encode())


def rows(root):
    return [g for g in root.iter(f"{NS}g") if g.get("class") == "channel-row"]


def heat_fills(root, d):
    row = rows(root)[d]
    (heat,) = [g for g in row if g.get("class") == "heatmap"]
    return [r.get("fill") for r in heat]


def test_colormap_endpoints():
    assert colormap_hex(-1, DIVERGING) == "#1F77B4"
    assert colormap_hex(0, DIVERGING) == "#FFFFFF"
    assert colormap_hex(1, DIVERGING) == "#D62728"
    assert colormap_hex(0, SEQUENTIAL) == "#FFFFFF"
    assert colormap_hex(1, SEQUENTIAL) == "#D62728"


@given(st.floats(-1, 1))
def test_colormap_matches_oracle(v):
    assert colormap_hex(v, DIVERGING) == oracle_hex(v, "diverging")
    assert colormap_hex(abs(v), SEQUENTIAL) == oracle_hex(abs(v), "sequential")


def test_attribution_svg_structure_and_colours():
    x = np.sin(np.linspace(0, 3, 12))[None]
    scores = np.linspace(-1, 1, 12)[None]
    svg = render_attribution(x, Attribution(scores, "signed"))
    root = parse(svg)
    assert root.tag == f"{NS}svg"
    fills = heat_fills(root, 0)
    assert len(fills) == 12
    assert fills[0] == "#1F77B4" and fills[-1] == "#D62728"
    assert fills == [oracle_hex(v, "diverging") for v in scores[0]]
    assert any(g.get("class") == "colorbar" for g in root.iter(f"{NS}g"))


def test_zero_unit_attribution_is_white():
    x = np.random.default_rng(0).normal(size=(2, 8))
    root = parse(render_attribution(x, Attribution(np.zeros((2, 8)), "unit")))
    assert set(heat_fills(root, 0) + heat_fills(root, 1)) == {"#FFFFFF"}


def test_byte_determinism():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 20))
    a = Attribution(rng.uniform(size=(3, 20)), "unit")
    assert render_attribution(x, a) == render_attribution(x.copy(), a)
    cf = x.copy()
    cf[1] += 1
    r = CounterfactualResult.from_diff(x, cf, 1)
    assert render_counterfactual(x, r, original_label=0) == render_counterfactual(x, r, original_label=0)


def test_one_row_per_channel():
    x = np.zeros((3, 10))
    root = parse(render_attribution(x, Attribution(np.zeros((3, 10)), "unit")))
    assert [g.get("data-channel") for g in rows(root)] == ["0", "1", "2"]


def test_counterfactual_rows_are_changed_channels():
    x = np.zeros((3, 10))
    cf = x.copy()
    cf[0, 2] = 1.0
    cf[2] = 0.5
    root = parse(render_counterfactual(x, CounterfactualResult.from_diff(x, cf, 1)))
    assert [g.get("data-channel") for g in rows(root)] == ["0", "2"]
    lines = [p for p in root.iter(f"{NS}polyline")]
    assert {p.get("class") for p in lines} == {"original", "counterfactual"}
    assert {p.get("stroke") for p in lines if p.get("class") == "counterfactual"} == {"#E377C2"}
    assert any(g.get("class") == "legend" for g in root.iter(f"{NS}g"))


def test_univariate_counterfactual_single_row():
    x = np.zeros((1, 10))
    cf = x + 1
    root = parse(render_counterfactual(x, CounterfactualResult.from_diff(x, cf, 1), original_label=0))
    assert len(rows(root)) == 1
    texts = " ".join(t.text for t in root.iter(f"{NS}text"))
    assert "class 0" in texts and "class 1" in texts


def test_errors():
    x = np.zeros((1, 5))
    with pytest.raises(NothingChanged):
        render_counterfactual(x, CounterfactualResult.from_diff(x, x.copy(), 1))
    with pytest.raises(ShapeMismatch):
        render_attribution(x, Attribution(np.zeros((1, 6)), "unit"))
    with pytest.raises(RangeViolation):
        # bypass construction-time checking to reach the renderer's own check
        bad = Attribution(np.zeros((1, 5)), "unit")
        object.__setattr__(bad, "scores", np.full((1, 5), 3.0))
        render_attribution(x, bad)
    with pytest.raises(BadParams):
        render_attribution(x, Attribution(np.zeros((1, 5)), "signed"), PlotStyle(colormap=SEQUENTIAL))


def test_title_escaped():
    x = np.zeros((1, 4))
    svg = render_attribution(x, Attribution(np.zeros((1, 4)), "unit"), PlotStyle(title="a < b & c"))
    assert "a &lt; b &amp; c" in svg
    parse(svg)
