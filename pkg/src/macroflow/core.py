"""Domain types and placement-quality metrics.

Geometry convention: every canvas is mapped to the normalized frame
[-1, 1] x [-1, 1] and all placements store macro *centers* in that frame.
Canvas / macro / pin dimensions are kept in physical units; conversion to
the normalized frame happens through the canvas scale factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class ConfigError(ValueError):
    """A configuration is inconsistent or physically impossible."""


@dataclass(frozen=True)
class Canvas:
    """Placement region, described by its physical dimensions."""

    width: float = 2.0
    height: float = 2.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"canvas dimensions must be positive, got {self.width} x {self.height}")

    @property
    def scale(self) -> np.ndarray:
        """Physical-to-normalized scale per axis (a full canvas spans 2.0)."""
        return np.array([2.0 / self.width, 2.0 / self.height])


@dataclass(frozen=True, eq=False)
class Macro:
    """A movable rectangular block with pins given as offsets from its center."""

    id: int
    width: float
    height: float
    pins: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"macro {self.id}: dimensions must be positive")
        pins = np.asarray(self.pins, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "pins", pins)
        if pins.size and (
            np.any(np.abs(pins[:, 0]) > self.width / 2 + 1e-12)
            or np.any(np.abs(pins[:, 1]) > self.height / 2 + 1e-12)
        ):
            raise ValueError(f"macro {self.id}: pin offsets exceed the macro bounding box")

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True, eq=False)
class Netlist:
    """Two-pin connections, stored as rows (macro_a, pin_a, macro_b, pin_b)."""

    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 4), dtype=np.int64))

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 4)
        object.__setattr__(self, "edges", edges)

    def __len__(self) -> int:
        return self.edges.shape[0]


@dataclass(frozen=True, eq=False)
class PlacementInstance:
    """Canvas, macro set and netlist: the conditioning input of the placer."""

    canvas: Canvas
    macros: tuple[Macro, ...]
    netlist: Netlist = field(default_factory=Netlist)

    def __post_init__(self):
        object.__setattr__(self, "macros", tuple(self.macros))
        if not self.macros:
            raise ValueError("instance needs at least one macro")
        for m in self.macros:
            if m.width > self.canvas.width + 1e-12 or m.height > self.canvas.height + 1e-12:
                raise ValueError(f"macro {m.id} ({m.width} x {m.height}) does not fit the canvas")
        n = len(self.macros)
        for k, (ma, pa, mb, pb) in enumerate(self.netlist.edges):
            for side, (mi, pi) in (("a", (ma, pa)), ("b", (mb, pb))):
                if not 0 <= mi < n:
                    raise ValueError(f"edge {k}: macro_{side} index {mi} out of range (have {n} macros)")
                if not 0 <= pi < len(self.macros[mi].pins):
                    raise ValueError(
                        f"edge {k}: pin_{side} index {pi} out of range "
                        f"(macro {mi} has {len(self.macros[mi].pins)} pins)"
                    )
            if ma == mb and pa == pb:
                raise ValueError(f"edge {k} connects a pin to itself")

    @property
    def num_macros(self) -> int:
        return len(self.macros)

    @cached_property
    def sizes(self) -> np.ndarray:
        """Physical (width, height) per macro, shape (N, 2)."""
        return np.array([[m.width, m.height] for m in self.macros])

    @cached_property
    def half_extents(self) -> np.ndarray:
        """Normalized-frame half width/height per macro, shape (N, 2)."""
        return self.sizes * self.canvas.scale / 2.0

    @cached_property
    def norm_sizes(self) -> np.ndarray:
        """Normalized-frame (width, height) per macro, shape (N, 2)."""
        return self.sizes * self.canvas.scale

    @cached_property
    def edge_pin_offsets(self) -> np.ndarray:
        """Normalized pin offsets per edge, shape (E, 4): (dxa, dya, dxb, dyb)."""
        edges = self.netlist.edges
        out = np.zeros((len(edges), 4))
        scale = self.canvas.scale
        for k, (ma, pa, mb, pb) in enumerate(edges):
            out[k, 0:2] = self.macros[ma].pins[pa] * scale
            out[k, 2:4] = self.macros[mb].pins[pb] * scale
        return out


def check_positions(instance: PlacementInstance, positions: np.ndarray) -> np.ndarray:
    """Validate and return macro-center positions as an (N, 2) float array."""
    positions = np.asarray(positions, dtype=float)
    if positions.shape != (instance.num_macros, 2):
        raise ValueError(
            f"positions shape {positions.shape} does not match instance with "
            f"{instance.num_macros} macros (expected ({instance.num_macros}, 2))"
        )
    if not np.all(np.isfinite(positions)):
        raise ValueError("positions contain non-finite values")
    return positions


def bounding_boxes(instance: PlacementInstance, positions: np.ndarray) -> np.ndarray:
    """Per-macro (left, bottom, right, top) in the normalized frame, shape (N, 4)."""
    positions = check_positions(instance, positions)
    half = instance.half_extents
    return np.concatenate([positions - half, positions + half], axis=1)


def hpwl(instance: PlacementInstance, positions: np.ndarray) -> float:
    """Half-perimeter wirelength over all two-pin nets.

    Each netlist edge is one net; its length is the Manhattan bounding box of
    the two pin positions (macro center plus normalized pin offset).
    """
    positions = check_positions(instance, positions)
    edges = instance.netlist.edges
    if len(edges) == 0:
        return 0.0
    offs = instance.edge_pin_offsets
    pa = positions[edges[:, 0]] + offs[:, 0:2]
    pb = positions[edges[:, 2]] + offs[:, 2:4]
    return float(np.sum(np.abs(pa - pb)))


# Overlap extents at or below this size (normalized units) count as zero, so
# that abutting grid-aligned macros are not flagged by float rounding.
OVERLAP_TOL = 1e-9


def total_overlap(instance: PlacementInstance, positions: np.ndarray, tol: float = OVERLAP_TOL) -> float:
    """Sum of pairwise axis-aligned intersection areas (normalized units)."""
    boxes = bounding_boxes(instance, positions)
    n = instance.num_macros
    if n < 2:
        return 0.0
    l, b, r, t = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    wx = np.minimum(r[:, None], r[None, :]) - np.maximum(l[:, None], l[None, :])
    wy = np.minimum(t[:, None], t[None, :]) - np.maximum(b[:, None], b[None, :])
    wx = np.where(wx > tol, wx, 0.0)
    wy = np.where(wy > tol, wy, 0.0)
    areas = wx * wy
    iu = np.triu_indices(n, k=1)
    return float(np.sum(areas[iu]))


def overlap_ratio(instance: PlacementInstance, positions: np.ndarray, tol: float = OVERLAP_TOL) -> float:
    """Total overlap area divided by total macro area (both normalized units)."""
    total_area = float(np.prod(instance.norm_sizes, axis=1).sum())
    return total_overlap(instance, positions, tol) / total_area


def in_canvas(instance: PlacementInstance, positions: np.ndarray, tol: float = OVERLAP_TOL) -> bool:
    """True iff every macro bounding box lies inside the normalized canvas."""
    boxes = bounding_boxes(instance, positions)
    return bool(
        np.all(boxes[:, 0] >= -1.0 - tol)
        and np.all(boxes[:, 1] >= -1.0 - tol)
        and np.all(boxes[:, 2] <= 1.0 + tol)
        and np.all(boxes[:, 3] <= 1.0 + tol)
    )


def is_legal(instance: PlacementInstance, positions: np.ndarray, tol: float = OVERLAP_TOL) -> bool:
    """True iff the placement has zero overlap and stays inside the canvas."""
    return in_canvas(instance, positions, tol) and total_overlap(instance, positions, tol) == 0.0


def boundary_distances(instance: PlacementInstance, positions: np.ndarray) -> np.ndarray:
    """Distance from each macro's bounding box to the nearest canvas edge.

    Negative values mean the box protrudes past that edge.
    """
    boxes = bounding_boxes(instance, positions)
    gaps = np.stack(
        [boxes[:, 0] + 1.0, boxes[:, 1] + 1.0, 1.0 - boxes[:, 2], 1.0 - boxes[:, 3]],
        axis=1,
    )
    return np.min(gaps, axis=1)
