"""Deterministic SVG rendering of layouts and sampling trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import OVERLAP_TOL, PlacementInstance, bounding_boxes, check_positions


@dataclass(frozen=True)
class RenderOptions:
    frame_px: int = 480          # drawable square per layout frame
    margin_px: int = 12
    show_nets: bool = False
    highlight_overlaps: bool = False
    labels: bool = False


def _fmt(v: float) -> str:
    return f"{v:.4f}"


class _Frame:
    """Maps normalized [-1, 1]^2 coordinates into a pixel frame (y flipped)."""

    def __init__(self, ox: float, oy: float, side: float):
        self.ox, self.oy, self.side = ox, oy, side

    def pt(self, x: float, y: float) -> tuple[float, float]:
        return self.ox + (x + 1.0) / 2.0 * self.side, self.oy + (1.0 - y) / 2.0 * self.side

    def rect(self, left: float, bottom: float, right: float, top: float) -> str:
        x, y = self.pt(left, top)
        w = (right - left) / 2.0 * self.side
        h = (top - bottom) / 2.0 * self.side
        return f'x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}"'


def _frame_elements(instance: PlacementInstance, positions: np.ndarray, frame: _Frame,
                    options: RenderOptions) -> list[str]:
    positions = check_positions(instance, positions)
    boxes = bounding_boxes(instance, positions)
    parts = [
        f'<rect class="canvas" {frame.rect(-1.0, -1.0, 1.0, 1.0)} '
        'fill="#ffffff" stroke="#222222" stroke-width="1"/>'
    ]
    for i, (l, b, r, t) in enumerate(boxes):
        parts.append(
            f'<rect class="macro" {frame.rect(l, b, r, t)} '
            'fill="#9ecae1" fill-opacity="0.85" stroke="#31708f" stroke-width="0.8"/>'
        )
        if options.labels:
            cx, cy = frame.pt(*positions[i])
            parts.append(
                f'<text class="label" x="{_fmt(cx)}" y="{_fmt(cy)}" font-size="9" '
                f'text-anchor="middle">{instance.macros[i].id}</text>'
            )
    if options.show_nets:
        offs = instance.edge_pin_offsets
        for k, (ma, _, mb, _) in enumerate(instance.netlist.edges):
            ax, ay = frame.pt(*(positions[ma] + offs[k, 0:2]))
            bx, by = frame.pt(*(positions[mb] + offs[k, 2:4]))
            parts.append(
                f'<line class="net" x1="{_fmt(ax)}" y1="{_fmt(ay)}" x2="{_fmt(bx)}" y2="{_fmt(by)}" '
                'stroke="#d95f02" stroke-width="0.5" stroke-opacity="0.6"/>'
            )
    if options.highlight_overlaps:
        l, b = boxes[:, 0], boxes[:, 1]
        r, t = boxes[:, 2], boxes[:, 3]
        n = instance.num_macros
        for i in range(n):
            for j in range(i + 1, n):
                wl, wr = max(l[i], l[j]), min(r[i], r[j])
                wb, wt = max(b[i], b[j]), min(t[i], t[j])
                if wr - wl > OVERLAP_TOL and wt - wb > OVERLAP_TOL:
                    parts.append(
                        f'<rect class="overlap" {frame.rect(wl, wb, wr, wt)} '
                        'fill="#e41a1c" fill-opacity="0.55"/>'
                    )
    return parts


def render_svg(instance: PlacementInstance, positions: np.ndarray,
               options: RenderOptions = RenderOptions()) -> str:
    """Single-layout SVG document; element counts mirror the geometry exactly."""
    m, side = options.margin_px, options.frame_px
    total = side + 2 * m
    frame = _Frame(m, m, side)
    body = _frame_elements(instance, positions, frame, options)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" '
        f'viewBox="0 0 {total} {total}">\n  '
        + "\n  ".join(body)
        + "\n</svg>\n"
    )


def render_trace_svg(instance: PlacementInstance, frames,
                     options: RenderOptions = RenderOptions()) -> str:
    """Trajectory contact sheet: one <g class="frame"> per sampling step state."""
    n = len(frames)
    if n == 0:
        raise ValueError("trace has no frames")
    cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    m, side = options.margin_px, options.frame_px
    cell = side + 2 * m
    parts = []
    for idx, positions in enumerate(frames):
        gx, gy = (idx % cols) * cell, (idx // cols) * cell
        frame = _Frame(m, m, side)
        body = "\n    ".join(_frame_elements(instance, positions, frame, options))
        parts.append(
            f'<g class="frame" transform="translate({gx},{gy})">\n    {body}\n  </g>'
        )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * cell}" height="{rows * cell}" '
        f'viewBox="0 0 {cols * cell} {rows * cell}">\n  '
        + "\n  ".join(parts)
        + "\n</svg>\n"
    )
