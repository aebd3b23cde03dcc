"""Network diagrams from a genome's hex layout hints.

Hint h points the coupling at h * 22.5 degrees clockwise from rightwards, from
the alphabetically lower site towards the higher one: ``0`` is right, ``4`` is
down, ``8`` is left, ``c`` is up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .errors import HintMismatch, LayoutError
from .genome import Genome

STEP_DEGREES = 22.5


@dataclass(frozen=True)
class Edge:
    site_a: str
    site_b: str
    value: int
    angle: float  # degrees clockwise from rightwards


@dataclass(frozen=True)
class LayoutPlan:
    positions: dict[str, tuple[float, float]]  # y points up
    edges: tuple[Edge, ...]


def direction(hint: int) -> tuple[float, float]:
    theta = math.radians(hint * STEP_DEGREES)
    return round(math.cos(theta), 12) + 0.0, round(-math.sin(theta), 12) + 0.0


def layout_network(g: Genome) -> LayoutPlan:
    """Place sites by walking the couplings in genome order.

    The first site of the first coupling sits at the origin.  Each coupling with
    exactly one placed endpoint puts the other endpoint one unit away along its
    hinted direction.  Couplings whose endpoints are both still unplaced are
    retried on the next pass; if a whole pass places nothing, the network is
    disconnected and a LayoutError is raised.
    """
    offsite = g.offsite
    if g.layout_hints is None:
        raise HintMismatch("genome has no layout hints")
    if len(g.layout_hints) != len(offsite):
        raise HintMismatch(f"{len(g.layout_hints)} hints for {len(offsite)} couplings")
    edges = tuple(
        Edge(*c.pair, c.value, h * STEP_DEGREES) for c, h in zip(offsite, g.layout_hints)
    )
    if not edges:
        return LayoutPlan({g.sites[0]: (0.0, 0.0)}, ())
    pos: dict[str, tuple[float, float]] = {edges[0].site_a: (0.0, 0.0)}
    pending = list(zip(edges, g.layout_hints))
    while pending:
        left = []
        for edge, hint in pending:
            a, b = edge.site_a, edge.site_b
            dx, dy = direction(hint)
            if a in pos and b not in pos:
                x, y = pos[a]
                pos[b] = (round(x + dx, 12) + 0.0, round(y + dy, 12) + 0.0)
            elif b in pos and a not in pos:
                x, y = pos[b]
                pos[a] = (round(x - dx, 12) + 0.0, round(y - dy, 12) + 0.0)
            elif a not in pos and b not in pos:
                left.append((edge, hint))
        if len(left) == len(pending):
            orphan = left[0][0]
            raise LayoutError(f"coupling {orphan.site_a}{orphan.site_b} is not connected to the placed network")
        pending = left
    for c in g.couplings:
        if c.is_onsite and c.site_a not in pos:
            raise LayoutError(f"site {c.site_a} has only an on-site term")
    return LayoutPlan(pos, edges)


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def emit_svg(plan: LayoutPlan, g: Genome, unit: float = 80.0, radius: float = 14.0) -> str:
    xs = [p[0] for p in plan.positions.values()]
    ys = [p[1] for p in plan.positions.values()]
    margin = 2 * radius + 10
    x0, y1 = min(xs), max(ys)
    width = (max(xs) - x0) * unit + 2 * margin
    height = (y1 - min(ys)) * unit + 2 * margin

    def px(site):
        x, y = plan.positions[site]
        return (x - x0) * unit + margin, (y1 - y) * unit + margin

    onsite = {c.site_a: c.value for c in g.couplings if c.is_onsite}
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_fmt(width)}" height="{_fmt(height)}">',
        f"<title>{escape(str(g))}</title>",
        '<g stroke="black" stroke-width="2">',
    ]
    for e in plan.edges:
        (ax, ay), (bx, by) = px(e.site_a), px(e.site_b)
        lines.append(f'<line x1="{_fmt(ax)}" y1="{_fmt(ay)}" x2="{_fmt(bx)}" y2="{_fmt(by)}"/>')
    lines.append("</g>")
    lines.append('<g font-family="sans-serif" font-size="11" fill="#333333" text-anchor="middle">')
    for e in plan.edges:
        (ax, ay), (bx, by) = px(e.site_a), px(e.site_b)
        lines.append(f'<text x="{_fmt((ax + bx) / 2)}" y="{_fmt((ay + by) / 2 - 4)}">{e.value}</text>')
    lines.append("</g>")
    lines.append('<g font-family="sans-serif" font-size="13" text-anchor="middle">')
    for site in sorted(plan.positions):
        x, y = px(site)
        label = site if site not in onsite else f"{site} ({onsite[site]})"
        lines.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(radius)}" fill="white" stroke="black"/>')
        lines.append(f'<text x="{_fmt(x)}" y="{_fmt(y + 4.5)}">{escape(label)}</text>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_dot(g: Genome, plan: LayoutPlan | None = None) -> str:
    lines = ["graph spin_network {", f'  label="{str(g)}";', "  node [shape=circle];"]
    onsite = {c.site_a: c.value for c in g.couplings if c.is_onsite}
    for site in g.sites:
        attrs = []
        if site in onsite:
            attrs.append(f'xlabel="{onsite[site]}"')
        if plan is not None and site in plan.positions:
            x, y = plan.positions[site]
            attrs.append(f'pos="{_fmt(x)},{_fmt(y)}!"')
        lines.append(f"  {site}" + (f" [{', '.join(attrs)}]" if attrs else "") + ";")
    for c in g.offsite:
        a, b = c.pair
        lines.append(f'  {a} -- {b} [label="{c.value}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit_diagram(g: Genome) -> tuple[str | None, str]:
    """(svg, dot).  Without layout hints only DOT is produced and svg is None."""
    if g.layout_hints is None:
        return None, emit_dot(g)
    plan = layout_network(g)
    return emit_svg(plan, g), emit_dot(g, plan)
