"""Deterministic SVG drawings of scenes, traces and ports."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from .components import Bumper, MovingWall, OneWayGate, Parabola, Wall

PARABOLA_SAMPLES = 64


@dataclass(frozen=True)
class RenderSpec:
    width: int = 800
    height: int = 800
    margin: int = 20
    styles: Dict[str, str] = field(
        default_factory=lambda: {
            "wall": 'stroke="#222" stroke-width="1.5"',
            "parabola": 'stroke="#1f5fbf" stroke-width="1.5" fill="none"',
            "gate": 'stroke="#2a9d3a" stroke-width="1.5" stroke-dasharray="4,2"',
            "moving_wall": 'stroke="#c2561a" stroke-width="2"',
            "bumper": 'stroke="#a01a7d" stroke-width="3"',
            "trace": 'stroke="#d11" stroke-width="0.8" fill="none" opacity="0.8"',
            "port": 'stroke="#777" stroke-width="1" stroke-dasharray="2,2"',
        }
    )


def _f(x) -> float:
    return float(x)


def _shapes(c) -> List[List[tuple]]:
    """Polylines (world coordinates, floats) for one component."""
    if isinstance(c, Parabola):
        pts = []
        for k in range(PARABOLA_SAMPLES):
            x = Fraction(c.x0) + (Fraction(c.x1) - Fraction(c.x0)) * Fraction(k, PARABOLA_SAMPLES - 1)
            pts.append((_f(x), _f(Fraction(c.a) * x * x + Fraction(c.b) * x + Fraction(c.c))))
        return [pts]
    if isinstance(c, OneWayGate):
        return [[(_f(c.start.x), _f(c.start.y)), (_f(c.end.x), _f(c.end.y))]]
    return [[(_f(c.a.x), _f(c.a.y)), (_f(c.b.x), _f(c.b.y))]]


def _num(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def render_svg(components: Sequence, trace_points: Optional[Sequence] = None, target=None, ports: Sequence = (), spec: RenderSpec = RenderSpec()) -> str:
    """SVG 1.1 text.  Same inputs give byte-identical output."""
    polys = [(c.kind, _shapes(c)) for c in components]
    trace = [(_f(p.x), _f(p.y)) for p in trace_points or []]
    tgt = (_f(target.x), _f(target.y)) if target is not None else None
    port_lines = []
    for p in ports:
        a, b = p.line
        port_lines.append([(_f(a.x), _f(a.y)), (_f(b.x), _f(b.y))])
    xs, ys = [], []
    for _, shapes in polys:
        for poly in shapes:
            xs += [q[0] for q in poly]
            ys += [q[1] for q in poly]
    for q in trace + ([tgt] if tgt else []) + [q for ln in port_lines for q in ln]:
        xs.append(q[0])
        ys.append(q[1])
    if not xs:
        xs, ys = [0.0], [0.0]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1e-9)
    inner = min(spec.width, spec.height) - 2 * spec.margin
    k = inner / span

    def sx(x):
        return spec.margin + (x - x0) * k

    def sy(y):
        return spec.height - spec.margin - (y - y0) * k

    def path(poly):
        return " ".join(f"{_num(sx(x))},{_num(sy(y))}" for x, y in poly)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{spec.width}" height="{spec.height}" '
        f'viewBox="0 0 {spec.width} {spec.height}">',
        f'<rect x="0" y="0" width="{spec.width}" height="{spec.height}" fill="white"/>',
    ]
    for (kind, shapes), c in zip(polys, components):
        style = spec.styles.get(kind, spec.styles["wall"])
        for poly in shapes:
            out.append(f'<polyline id="{c.id}" points="{path(poly)}" fill="none" {style}/>')
    for ln in port_lines:
        out.append(f'<polyline class="port" points="{path(ln)}" {spec.styles["port"]}/>')
    if len(trace) > 1:
        out.append(f'<polyline class="trace" points="{path(trace)}" {spec.styles["trace"]}/>')
    if tgt:
        out.append(f'<circle class="target" cx="{_num(sx(tgt[0]))}" cy="{_num(sy(tgt[1]))}" r="4" fill="#e8b400" stroke="#000"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
