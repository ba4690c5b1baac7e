"""Occupancy grid over the normalized canvas.

Anchors are cell lower-left corners: a macro anchored at cell (row, col) has
its bounding-box lower-left corner on that cell's lower-left corner and covers
the ceil(size / cell) cells it spans. Shared by the synthetic generator and
the legalizing projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Canvas, ConfigError, Macro

# Slack when converting a size to covered cells, so exact multiples of the
# cell size do not spill into an extra cell.
_SPAN_EPS = 1e-9


@dataclass
class OccupancyGrid:
    """Boolean per-cell occupancy of the canvas, row 0 at the bottom."""

    cols: int
    rows: int
    canvas: Canvas = field(default_factory=Canvas)
    cells: np.ndarray | None = None

    def __post_init__(self):
        if self.cols < 1 or self.rows < 1:
            raise ConfigError(f"grid resolution must be >= 1, got {self.cols} x {self.rows}")
        if self.cells is None:
            self.cells = np.zeros((self.rows, self.cols), dtype=bool)
        elif self.cells.shape != (self.rows, self.cols):
            raise ConfigError(f"cells shape {self.cells.shape} != ({self.rows}, {self.cols})")

    @property
    def cell_size(self) -> tuple[float, float]:
        """(width, height) of one cell in normalized units."""
        return 2.0 / self.cols, 2.0 / self.rows

    def spans(self, macro: Macro) -> tuple[int, int]:
        """Number of (columns, rows) the macro covers when grid-anchored."""
        wn, hn = macro.width * 2.0 / self.canvas.width, macro.height * 2.0 / self.canvas.height
        if wn > 2.0 + _SPAN_EPS or hn > 2.0 + _SPAN_EPS:
            raise ConfigError(f"macro {macro.id} is larger than the canvas")
        cw, ch = self.cell_size
        sx = max(1, int(np.ceil(wn / cw - _SPAN_EPS)))
        sy = max(1, int(np.ceil(hn / ch - _SPAN_EPS)))
        return sx, sy

    def anchor_centers(self, macro: Macro) -> np.ndarray:
        """Macro-center position for every anchor cell, shape (rows, cols, 2)."""
        cw, ch = self.cell_size
        half = macro.width / self.canvas.width, macro.height / self.canvas.height
        cx = -1.0 + np.arange(self.cols) * cw + half[0]
        cy = -1.0 + np.arange(self.rows) * ch + half[1]
        out = np.empty((self.rows, self.cols, 2))
        out[:, :, 0] = cx[None, :]
        out[:, :, 1] = cy[:, None]
        return out

    def anchor_boundary_distances(self, macro: Macro) -> np.ndarray:
        """Distance of the anchored macro box to the nearest canvas edge, per anchor.

        Clamped at zero; anchors where the box protrudes map to zero as well
        (they are excluded by the position mask anyway).
        """
        cw, ch = self.cell_size
        wn, hn = macro.width * 2.0 / self.canvas.width, macro.height * 2.0 / self.canvas.height
        left = np.arange(self.cols) * cw
        bottom = np.arange(self.rows) * ch
        right_gap = 2.0 - left - wn
        top_gap = 2.0 - bottom - hn
        dx = np.minimum(left, right_gap)
        dy = np.minimum(bottom, top_gap)
        return np.maximum(np.minimum(dx[None, :], dy[:, None]), 0.0)

    def mark(self, row: int, col: int, macro: Macro) -> None:
        """Occupy the cells covered by the macro anchored at (row, col)."""
        sx, sy = self.spans(macro)
        if row < 0 or col < 0 or row + sy > self.rows or col + sx > self.cols:
            raise ValueError(f"anchor ({row}, {col}) puts macro {macro.id} outside the grid")
        self.cells[row : row + sy, col : col + sx] = True

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.cols, self.rows, self.canvas, self.cells.copy())


def position_mask(grid: OccupancyGrid, macro: Macro) -> np.ndarray:
    """Boolean (rows, cols) mask of anchors where the macro fits legally.

    An anchor is legal iff the anchored box stays inside the canvas and covers
    no occupied cell.
    """
    sx, sy = grid.spans(macro)
    mask = np.zeros((grid.rows, grid.cols), dtype=bool)
    if sy > grid.rows or sx > grid.cols:
        return mask
    windows = sliding_window_view(grid.cells, (sy, sx))
    mask[: grid.rows - sy + 1, : grid.cols - sx + 1] = ~windows.any(axis=(2, 3))
    return mask
