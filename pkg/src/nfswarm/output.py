"""Trace, field-grid and SVG writers."""
from __future__ import annotations

import math
import os
import tempfile
from pathlib import Path
from typing import Callable
from xml.sax.saxutils import quoteattr

import numpy as np

TRACE_HEADER = "time,agent,x,y,heading,phi,grad_x,grad_y,fiedler,events"


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def write_trace(trace) -> str:
    """CSV with one row per agent per record, ordered by time then agent id."""
    if not trace.records:
        raise ValueError("empty trace")
    lines = [TRACE_HEADER]
    for rec in trace.records:
        global_ev = sorted({kind for who, kind in rec.events if who == -1})
        for i in range(len(rec.positions)):
            own = sorted({kind for who, kind in rec.events if who == i})
            flags = "|".join(sorted(set(own) | set(global_ev)))
            x, y = rec.positions[i]
            gx, gy = rec.gradients[i]
            lines.append(",".join([fmt(rec.time), str(i), fmt(x), fmt(y), fmt(rec.headings[i]),
                                   fmt(rec.phi[i]), fmt(gx), fmt(gy), fmt(rec.fiedler), flags]))
    return "\n".join(lines) + "\n"


def export_field_grid(field_fn: Callable[[np.ndarray], float], bounds, n: int,
                      workspace_radius: float = math.inf) -> str:
    """Sample ``field_fn`` on an ``n x n`` grid, rows by y then x.

    ``bounds`` is ``(xmin, xmax, ymin, ymax)``. Samples outside the workspace
    disk are written as 1, the admissible maximum.
    """
    if n < 2:
        raise ValueError("grid resolution must be at least 2")
    xmin, xmax, ymin, ymax = bounds
    xs = np.linspace(xmin, xmax, n)
    ys = np.linspace(ymin, ymax, n)
    lines = ["x,y,value"]
    for y in ys:
        for x in xs:
            if math.hypot(x, y) > workspace_radius:
                v = 1.0
            else:
                v = field_fn(np.array([x, y]))
            lines.append(f"{fmt(x)},{fmt(y)},{fmt(v)}")
    return "\n".join(lines) + "\n"


def grid_values(text: str) -> np.ndarray:
    """Parse a grid document back into an ``(n*n, 3)`` array."""
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    return np.array(rows, dtype=float)


def _arrow(x, y, th, length, colour):
    x2, y2 = x + length * math.cos(th), y + length * math.sin(th)
    return (f'<line class="arrow" x1="{x:.6g}" y1="{y:.6g}" x2="{x2:.6g}" y2="{y2:.6g}" '
            f'stroke={quoteattr(colour)} stroke-width="0.04" marker-end="url(#head)"/>')


def render_svg(trace, spec) -> str:
    """Plot of workspace, obstacles, trajectories and final links.

    The y axis is flipped so the picture uses the usual math orientation.
    Unicycle runs add heading arrows at the first and last pose of each agent.
    """
    if not trace.records:
        raise ValueError("empty trace")
    rw = spec.workspace_radius
    pad = 0.05 * rw
    first, last = trace.records[0], trace.records[-1]
    n = len(first.positions)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{-rw - pad:.6g} {-rw - pad:.6g} '
        f'{2 * (rw + pad):.6g} {2 * (rw + pad):.6g}" width="600" height="600">',
        '<defs><marker id="head" markerWidth="4" markerHeight="4" refX="2" refY="2" orient="auto">'
        '<path d="M0,0 L4,2 L0,4 z"/></marker></defs>',
        '<g transform="scale(1,-1)">',
        f'<circle class="workspace" cx="0" cy="0" r="{rw:.6g}" fill="none" stroke="black" stroke-width="0.03"/>',
    ]
    for ox, oy in spec.obstacles:
        out.append(f'<circle class="obstacle" cx="{ox:.6g}" cy="{oy:.6g}" r="0.08" fill="black"/>')
    for i in range(n):
        pts = " ".join(f"{r.positions[i][0]:.6g},{r.positions[i][1]:.6g}" for r in trace.records)
        colour = "red" if (spec.mode == "rendezvous" and i == spec.informed) else "steelblue"
        out.append(f'<polyline class="trajectory" points="{pts}" fill="none" '
                   f'stroke={quoteattr(colour)} stroke-width="0.03"/>')
    for i, j in sorted(last.links):
        (x1, y1), (x2, y2) = last.positions[i], last.positions[j]
        out.append(f'<line class="link" x1="{x1:.6g}" y1="{y1:.6g}" x2="{x2:.6g}" y2="{y2:.6g}" '
                   'stroke="gray" stroke-width="0.02"/>')
    if spec.mode == "rendezvous":
        length = 0.06 * rw
        for rec in (first, last):
            for i in range(n):
                x, y = rec.positions[i]
                out.append(_arrow(x, y, rec.headings[i], length, "darkgreen"))
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
