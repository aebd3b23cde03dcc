import math
import xml.etree.ElementTree as ET

import pytest

from spinevo.errors import HintMismatch, LayoutError
from spinevo.genome import parse
from spinevo.layout import direction, emit_diagram, emit_dot, emit_svg, layout_network

SVG = "{http://www.w3.org/2000/svg}"


def test_rightwards():
    plan = layout_network(parse("<A|B>AB500#0"))
    assert plan.positions == {"A": (0.0, 0.0), "B": (1.0, 0.0)}


def test_downwards():
    plan = layout_network(parse("<A|B>AB500#4"))
    assert plan.positions["B"] == (0.0, -1.0)


def test_chain_collinear():
    plan = layout_network(parse("<A|C>AB500BC500#00"))
    assert [plan.positions[s] for s in "ABC"] == [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]


@pytest.mark.parametrize("hint", range(16))
def test_direction_is_clockwise_steps(hint):
    dx, dy = direction(hint)
    theta = math.radians(22.5 * hint)
    assert dx == pytest.approx(math.cos(theta), abs=1e-12)
    assert dy == pytest.approx(-math.sin(theta), abs=1e-12)


def test_reverse_placement_and_every_edge_once():
    # the second coupling's lower letter is placed from its partner
    g = parse("<A|D>AB100BD100CD100#040")
    plan = layout_network(g)
    assert plan.positions["D"] == (1.0, -1.0)
    assert plan.positions["C"] == (0.0, -1.0)
    assert sorted((e.site_a, e.site_b) for e in plan.edges) == [("A", "B"), ("B", "D"), ("C", "D")]


def test_later_pass_places_detached_edge():
    g = parse("<A|D>AB100CD100BC100#000")
    plan = layout_network(g)
    assert plan.positions["D"] == (3.0, 0.0)


def test_disconnected_network_rejected():
    with pytest.raises(LayoutError):
        layout_network(parse("<A|D>AB100CD100#00"))


def test_missing_hints():
    with pytest.raises(HintMismatch):
        layout_network(parse("<A|B>AB500"))


def test_svg_contents_and_determinism():
    g = parse("<A|C>AB500BC500#00")
    svg = emit_svg(layout_network(g), g)
    root = ET.fromstring(svg.split("\n", 1)[1])
    assert len(root.findall(f".//{SVG}circle")) == 3
    assert len(root.findall(f".//{SVG}line")) == 2
    labels = [t.text for t in root.findall(f".//{SVG}text")]
    assert labels.count("500") == 2
    assert emit_svg(layout_network(g), g) == svg


def test_negative_label_and_onsite_marker():
    g = parse("<A|C>AA070AB500CB500#00")
    svg, dot = emit_diagram(g)
    assert ">-500<" in svg
    assert 'label="-500"' in dot
    assert "A (70)" in svg


def test_dot_without_hints():
    g = parse("<A|C>AB500BC500")
    svg, dot = emit_diagram(g)
    assert svg is None
    assert dot == emit_dot(g)
    assert "A -- B" in dot and "B -- C" in dot
    assert dot.startswith("graph spin_network {")


def test_bundled_networks_lay_out():
    from importlib.resources import files

    from spinevo.genome import parse_lines

    for name in ("chain7.genome", "pst7.genome", "shoelace9.genome", "gate4x4.genome"):
        text = files("spinevo.data").joinpath(name).read_text()
        for g in parse_lines(text.splitlines()):
            plan = layout_network(g)
            assert set(plan.positions) == set(g.sites)
            coords = list(plan.positions.values())
            assert len(set(coords)) == len(coords)
