"""Minimal SVG emission for packings, superpositions and loop ensembles."""

from __future__ import annotations

import numpy as np

from .packing import DoubleCirclePacking
from .superposition import SuperpositionGraph

__all__ = ["packing_svg", "superposition_svg", "loops_svg"]

_HEADER = ('<?xml version="1.0" encoding="UTF-8"?>\n'
           '<svg xmlns="http://www.w3.org/2000/svg" viewBox="{vb}" '
           'width="{w}" height="{w}">\n')


def _viewbox(points, pad=0.08):
    xs = [z.real for z in points]
    ys = [z.imag for z in points]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    side = max(x1 - x0, y1 - y0, 1e-9)
    m = pad * side
    return f"{x0 - m} {-(y1 + m)} {side + 2 * m} {side + 2 * m}", side


def _circle(c, r, color, width):
    return (f'<circle cx="{c.real:.6f}" cy="{-c.imag:.6f}" r="{r:.6f}" '
            f'fill="none" stroke="{color}" stroke-width="{width:.6f}"/>\n')


def _segment(a, b, color, width):
    return (f'<line x1="{a.real:.6f}" y1="{-a.imag:.6f}" x2="{b.real:.6f}" '
            f'y2="{-b.imag:.6f}" stroke="{color}" stroke-width="{width:.6f}"/>\n')


def packing_svg(p: DoubleCirclePacking, path=None) -> str:
    """Both packings: primal circles red, dual circles blue, edges thin."""
    g = p.graph
    pts = list(p.vc_euclid) + [c for c in p.fc_euclid if np.isfinite(c.real)]
    vb, side = _viewbox(pts)
    lw = side / 600.0
    out = [_HEADER.format(vb=vb, w=720)]
    for e in range(g.n_edges):
        u, v = g.edge_endpoints(e)
        out.append(_segment(p.vc_euclid[u], p.vc_euclid[v], "#444444", lw))
    for v in range(g.n_vertices):
        out.append(_circle(p.vc_euclid[v], p.vr_euclid[v], "#cc2222", lw))
    for f in range(g.n_faces):
        if f == g.outer_face or not np.isfinite(p.fr_euclid[f]):
            continue
        out.append(_circle(p.fc_euclid[f], p.fr_euclid[f], "#2244cc", lw))
    out.append("</svg>\n")
    svg = "".join(out)
    if path:
        with open(path, "w") as fh:
            fh.write(svg)
    return svg


def superposition_svg(sg: SuperpositionGraph, path=None) -> str:
    """Primal segments black, dual segments gray, whites as dots."""
    g = sg.graph
    pts = list(sg.black_pos) + list(sg.white_pos)
    vb, side = _viewbox(pts)
    lw = side / 600.0
    out = [_HEADER.format(vb=vb, w=720)]
    for w in range(sg.n_white):
        (u, v), duals = sg.white_endpoints(w)
        out.append(_segment(sg.black_pos[u], sg.black_pos[v], "#000000", lw))
        for f in duals:
            out.append(_segment(sg.white_pos[w], sg.black_pos[f], "#999999", lw))
    for w in range(sg.n_white):
        z = sg.white_pos[w]
        out.append(f'<circle cx="{z.real:.6f}" cy="{-z.imag:.6f}" '
                   f'r="{2*lw:.6f}" fill="#ffffff" stroke="#000000" '
                   f'stroke-width="{lw/2:.6f}"/>\n')
    out.append("</svg>\n")
    svg = "".join(out)
    if path:
        with open(path, "w") as fh:
            fh.write(svg)
    return svg


def loops_svg(sg: SuperpositionGraph, decomposition, path=None) -> str:
    """Symmetric-difference loops, colored by traversal orientation."""
    pts = list(sg.black_pos) + list(sg.white_pos)
    vb, side = _viewbox(pts)
    lw = side / 300.0
    out = [_HEADER.format(vb=vb, w=720)]
    for w in range(sg.n_white):
        (u, v), _ = sg.white_endpoints(w)
        out.append(_segment(sg.black_pos[u], sg.black_pos[v], "#dddddd", lw / 3))
    for poly, closed in zip(decomposition.vertex_cycles, decomposition.closed):
        area = 0.0
        for i in range(len(poly)):
            a, b = poly[i], poly[(i + 1) % len(poly)]
            area += a.real * b.imag - b.real * a.imag
        color = "#cc4411" if area > 0 else "#1166aa"
        for i in range(len(poly) if closed else len(poly) - 1):
            out.append(_segment(poly[i], poly[(i + 1) % len(poly)], color, lw))
    out.append("</svg>\n")
    svg = "".join(out)
    if path:
        with open(path, "w") as fh:
            fh.write(svg)
    return svg
