"""Synthetic layout and netlist generation.

Layouts are built by placing macros largest-first on an occupancy grid,
sampling each position from the legal anchors with probability proportional
to a boundary-proximity score, so large blocks gravitate to the canvas edges
the way hand layouts do. A rejection-sampling generator with uniform
positions is kept as the ablation baseline. The netlist is then derived from
the finished layout by connecting spatially proximate pins, which makes the
layout a high-quality placement for exactly that netlist.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import Canvas, Macro, Netlist, PlacementInstance
from .grid import OccupancyGrid, position_mask


class GenerationError(RuntimeError):
    """Layout generation ran out of feasible positions or retries."""


@dataclass(frozen=True)
class GenConfig:
    """Knobs for synthetic instance generation."""

    canvas: Canvas = field(default_factory=Canvas)
    grid_cols: int = 64
    grid_rows: int = 64
    epsilon: float = 1e-6            # score stabilizer, keeps 1/d^2 finite at the edge
    macro_count: tuple[int, int] = (8, 32)
    macro_size: tuple[float, float] = (0.05, 0.35)   # physical units
    pins_per_macro: tuple[int, int] = (2, 8)
    pin_degree_cap: int = 4
    proximity_threshold: float = 0.15                # normalized units
    max_instance_retries: int = 64
    rejection_budget: int = 1000                     # per-macro tries, random baseline
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.proximity_threshold <= 0:
            raise ValueError("proximity threshold must be positive")
        if self.macro_size[0] <= 0 or self.macro_size[1] > min(self.canvas.width, self.canvas.height):
            raise ValueError("macro size range must be positive and fit the canvas")
        if self.macro_count[0] < 1 or self.macro_count[0] > self.macro_count[1]:
            raise ValueError("invalid macro count range")


def boundary_score(distance, epsilon: float):
    """Score 1 / (d + eps)^2: maximal flush against the boundary, decaying inward."""
    return 1.0 / (np.asarray(distance, dtype=float) + epsilon) ** 2


def sample_position(mask: np.ndarray, scores: np.ndarray, rng: np.random.Generator) -> tuple[int, int]:
    """Draw one anchor cell with probability proportional to mask * score."""
    weights = np.where(mask, scores, 0.0).ravel()
    total = weights.sum()
    if total <= 0:
        raise GenerationError("no legal position left for this macro")
    flat = rng.choice(weights.size, p=weights / total)
    return int(flat // mask.shape[1]), int(flat % mask.shape[1])


def _descending_size_order(macros) -> np.ndarray:
    areas = np.array([m.area for m in macros])
    return np.argsort(-areas, kind="stable")


def place_macros_masked(config: GenConfig, macros, rng: np.random.Generator) -> np.ndarray:
    """Place the given macros largest-first via mask + boundary-weighted sampling.

    Raises GenerationError when some macro has an empty position mask; callers
    regenerate the whole instance rather than backtracking.
    """
    grid = OccupancyGrid(config.grid_cols, config.grid_rows, config.canvas)
    positions = np.zeros((len(macros), 2))
    for i in _descending_size_order(macros):
        macro = macros[i]
        mask = position_mask(grid, macro)
        scores = boundary_score(grid.anchor_boundary_distances(macro), config.epsilon)
        row, col = sample_position(mask, scores, rng)
        positions[i] = grid.anchor_centers(macro)[row, col]
        grid.mark(row, col, macro)
    return positions


def place_macros_random(config: GenConfig, macros, rng: np.random.Generator) -> np.ndarray:
    """Uniform rejection-sampling baseline: continuous positions, no boundary bias."""
    scale = config.canvas.scale
    positions = np.zeros((len(macros), 2))
    order = _descending_size_order(macros)
    placed: list[int] = []
    for i in order:
        macro = macros[i]
        half = np.array([macro.width, macro.height]) * scale / 2.0
        lo, hi = -1.0 + half, 1.0 - half
        for _ in range(config.rejection_budget):
            center = rng.uniform(lo, hi)
            ok = True
            for j in placed:
                other = macros[j]
                oh = np.array([other.width, other.height]) * scale / 2.0
                if np.all(np.abs(center - positions[j]) < half + oh):
                    ok = False
                    break
            if ok:
                positions[i] = center
                placed.append(i)
                break
        else:
            raise GenerationError(f"rejection budget exhausted on macro {macro.id}")
    return positions


def _sample_macros(config: GenConfig, rng: np.random.Generator) -> list[Macro]:
    count = int(rng.integers(config.macro_count[0], config.macro_count[1] + 1))
    lo, hi = config.macro_size
    dims = rng.uniform(lo, hi, size=(count, 2))
    return [Macro(id=i, width=float(w), height=float(h)) for i, (w, h) in enumerate(dims)]


def _layout(config: GenConfig, rng: np.random.Generator, placer) -> tuple[PlacementInstance, np.ndarray]:
    for _ in range(config.max_instance_retries):
        macros = _sample_macros(config, rng)
        try:
            positions = placer(config, macros, rng)
        except GenerationError:
            continue
        return PlacementInstance(config.canvas, tuple(macros)), positions
    raise GenerationError(f"no legal layout after {config.max_instance_retries} instance retries")


def generate_layout(config: GenConfig, rng: np.random.Generator) -> tuple[PlacementInstance, np.ndarray]:
    """Mask-guided, boundary-biased layout; the instance carries no netlist yet."""
    return _layout(config, rng, place_macros_masked)


def random_layout(config: GenConfig, rng: np.random.Generator) -> tuple[PlacementInstance, np.ndarray]:
    """Uniform-random legal layout (ablation baseline); no netlist yet."""
    return _layout(config, rng, place_macros_random)


def build_netlist(
    positions: np.ndarray,
    macros,
    config: GenConfig,
    rng: np.random.Generator,
) -> tuple[tuple[Macro, ...], Netlist]:
    """Reverse-engineer pins and connections from a finished layout.

    Pins are sampled uniformly inside each macro; pin pairs on distinct macros
    closer than the proximity threshold become edges, nearest pairs first,
    respecting the per-pin degree cap. An empty netlist is permitted.
    """
    scale = np.asarray(config.canvas.scale)
    pinned = []
    pin_macro, pin_index, pin_abs = [], [], []
    for i, macro in enumerate(macros):
        n_pins = int(rng.integers(config.pins_per_macro[0], config.pins_per_macro[1] + 1))
        offsets = rng.uniform(
            [-macro.width / 2, -macro.height / 2],
            [macro.width / 2, macro.height / 2],
            size=(n_pins, 2),
        )
        pinned.append(replace(macro, pins=offsets))
        for p in range(n_pins):
            pin_macro.append(i)
            pin_index.append(p)
            pin_abs.append(positions[i] + offsets[p] * scale)

    pin_macro = np.array(pin_macro)
    pin_index = np.array(pin_index)
    pin_abs = np.array(pin_abs).reshape(-1, 2)
    total = len(pin_macro)

    dists = np.linalg.norm(pin_abs[:, None, :] - pin_abs[None, :, :], axis=2)
    ii, jj = np.triu_indices(total, k=1)
    keep = (pin_macro[ii] != pin_macro[jj]) & (dists[ii, jj] < config.proximity_threshold)
    ii, jj = ii[keep], jj[keep]

    # Nearest pairs first; index tuple breaks distance ties deterministically.
    order = np.lexsort((pin_index[jj], pin_macro[jj], pin_index[ii], pin_macro[ii], dists[ii, jj]))
    degree = np.zeros(total, dtype=int)
    edges = []
    for k in order:
        a, b = ii[k], jj[k]
        if degree[a] >= config.pin_degree_cap or degree[b] >= config.pin_degree_cap:
            continue
        degree[a] += 1
        degree[b] += 1
        edges.append((pin_macro[a], pin_index[a], pin_macro[b], pin_index[b]))

    edge_arr = np.array(edges, dtype=np.int64).reshape(-1, 4)
    return tuple(pinned), Netlist(edge_arr)


def generate_sample(
    config: GenConfig,
    rng: np.random.Generator,
    mode: str = "masked",
) -> tuple[PlacementInstance, np.ndarray]:
    """One full (instance, reference placement) training record."""
    if mode == "masked":
        bare, positions = generate_layout(config, rng)
    elif mode == "random":
        bare, positions = random_layout(config, rng)
    else:
        raise ValueError(f"unknown generation mode {mode!r} (expected 'masked' or 'random')")
    macros, netlist = build_netlist(positions, bare.macros, config, rng)
    return PlacementInstance(config.canvas, macros, netlist), positions


def generate_dataset(
    config: GenConfig,
    count: int,
    mode: str = "masked",
    seed: int | None = None,
) -> tuple[list[tuple[PlacementInstance, np.ndarray]], dict]:
    """Generate `count` records with independent per-record seed streams.

    Returns the records plus summary stats (empty netlists are legal but worth
    surfacing in the dataset manifest).
    """
    root = np.random.SeedSequence(config.seed if seed is None else seed)
    records = []
    empty_netlists = 0
    for seq in root.spawn(count):
        instance, positions = generate_sample(config, np.random.default_rng(seq), mode)
        records.append((instance, positions))
        if len(instance.netlist) == 0:
            empty_netlists += 1
    stats = {
        "count": count,
        "mode": mode,
        "empty_netlists": empty_netlists,
        "mean_macros": float(np.mean([r[0].num_macros for r in records])) if records else 0.0,
        "mean_edges": float(np.mean([len(r[0].netlist) for r in records])) if records else 0.0,
    }
    return records, stats
