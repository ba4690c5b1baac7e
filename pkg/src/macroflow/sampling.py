"""Inference: source priors, Euler ODE integration, and hard-constraint sampling.

The hard-constraint sampler runs, at every step, the extrapolate -> project ->
re-interpolate correction: the model's velocity is used to predict the final
layout, that prediction is legalized by a greedy grid projection, and the
trajectory is re-anchored on the straight line between the retained initial
draw and the legalized prediction. Because the last step lands exactly on a
projected state, the returned placement is overlap-free by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, PlacementInstance, check_positions
from .grid import OccupancyGrid, position_mask

PRIOR_KINDS = ("standard_gaussian", "truncated_gaussian", "narrow_gaussian", "uniform")


class ProjectionError(RuntimeError):
    """The greedy legalizer found no feasible cell even after grid refinement."""


@dataclass(frozen=True)
class SourcePrior:
    """Base distribution for trajectory starts; coordinates are i.i.d."""

    kind: str = "uniform"
    mean: float = 0.0
    std: float = 1.0
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}, expected one of {PRIOR_KINDS}")


def make_prior(spec) -> SourcePrior:
    """Resolve a prior name (or pass through a SourcePrior)."""
    if isinstance(spec, SourcePrior):
        return spec
    if spec == "narrow_gaussian":
        return SourcePrior("narrow_gaussian", std=0.5)
    return SourcePrior(str(spec))


def sample_prior(prior, n_macros: int, rng: np.random.Generator) -> np.ndarray:
    """Draw (n_macros, 2) initial positions from the source prior."""
    prior = make_prior(prior)
    shape = (n_macros, 2)
    if prior.kind in ("standard_gaussian", "narrow_gaussian"):
        return rng.normal(prior.mean, prior.std, size=shape)
    if prior.kind == "uniform":
        return rng.uniform(prior.low, prior.high, size=shape)
    # truncated gaussian: redraw out-of-range coordinates
    out = rng.normal(prior.mean, prior.std, size=shape)
    bad = (out < prior.low) | (out > prior.high)
    while np.any(bad):
        out[bad] = rng.normal(prior.mean, prior.std, size=int(bad.sum()))
        bad = (out < prior.low) | (out > prior.high)
    return out


@dataclass(frozen=True)
class SamplerConfig:
    prior: SourcePrior | str = "uniform"
    steps: int = 50
    mode: str = "hard_constraint"           # "free" or "hard_constraint"
    grid_cols: int = 64
    grid_rows: int = 64
    boundary_weight: float = 0.1            # lambda_b in the projection cost
    max_refinements: int = 3
    project_every: int = 1                  # apply projection every k-th step (final step always)
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        mode = {"hard": "hard_constraint"}.get(self.mode, self.mode)
        if mode not in ("free", "hard_constraint"):
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "prior", make_prior(self.prior))


@dataclass
class TrajectoryState:
    """Current point of one sampling trajectory; x0 is retained for re-interpolation."""

    x0: np.ndarray
    x: np.ndarray
    t: float


def extrapolate(x_t: np.ndarray, t: float, velocity: np.ndarray) -> np.ndarray:
    """Predicted final layout x_t + (1 - t) * v; a no-op at t == 1."""
    if t >= 1.0:
        return np.array(x_t, copy=True)
    return x_t + (1.0 - t) * velocity


def corrected_velocity(x_t: np.ndarray, t: float, corrected_final: np.ndarray) -> np.ndarray:
    """Velocity that would carry x_t exactly onto the corrected final state."""
    if t >= 1.0:
        raise ValueError("corrected velocity is undefined at t == 1")
    return (corrected_final - x_t) / (1.0 - t)


def project(
    instance: PlacementInstance,
    predicted: np.ndarray,
    grid_cols: int = 64,
    grid_rows: int = 64,
    boundary_weight: float = 0.1,
    max_refinements: int = 3,
) -> np.ndarray:
    """Greedy grid legalization of an arbitrary (possibly illegal) placement.

    Macros are processed in descending size order; each one takes the feasible
    anchor cell minimizing

        cost(cell) = ||center(cell) - target_i||^2 + lambda_b * dist(cell, boundary)^2

    where target_i is the predicted center clamped into the canvas and
    dist(cell, boundary) is the anchored box's distance to the nearest canvas
    edge. Ties resolve to the first cell in row-major order. If any macro runs
    out of feasible cells the whole projection retries at doubled resolution,
    up to `max_refinements` times.
    """
    predicted = check_positions(instance, predicted)
    norm_sizes = instance.norm_sizes
    if float(np.prod(norm_sizes, axis=1).sum()) > 4.0:
        raise ConfigError("total macro area exceeds the canvas area; no legal placement exists")
    half = instance.half_extents
    order = np.argsort(-np.prod(norm_sizes, axis=1), kind="stable")

    for refinement in range(max_refinements + 1):
        cols, rows = grid_cols << refinement, grid_rows << refinement
        grid = OccupancyGrid(cols, rows, instance.canvas)
        result = np.zeros_like(predicted)
        ok = True
        for i in order:
            macro = instance.macros[i]
            mask = position_mask(grid, macro)
            if not mask.any():
                ok = False
                break
            target = np.clip(predicted[i], -1.0 + half[i], 1.0 - half[i])
            centers = grid.anchor_centers(macro)
            dist = grid.anchor_boundary_distances(macro)
            cost = ((centers[:, :, 0] - target[0]) ** 2 + (centers[:, :, 1] - target[1]) ** 2
                    + boundary_weight * dist**2)
            flat = int(np.argmin(np.where(mask, cost, np.inf)))
            row, col = flat // cols, flat % cols
            result[i] = centers[row, col]
            grid.mark(row, col, macro)
        if ok:
            return result
    raise ProjectionError(
        f"no feasible cell found after {max_refinements} grid refinements "
        f"(finest grid {grid_cols << max_refinements} x {grid_rows << max_refinements})"
    )


def constrained_step(
    state: TrajectoryState,
    model,
    instance: PlacementInstance,
    config: SamplerConfig,
) -> TrajectoryState:
    """One extrapolate -> project -> re-interpolate update of the trajectory."""
    dt = 1.0 / config.steps
    t_next = state.t + dt
    v = model.velocity(state.x, state.t, instance)
    predicted = extrapolate(state.x, state.t, v)
    try:
        corrected = project(
            instance,
            predicted,
            config.grid_cols,
            config.grid_rows,
            config.boundary_weight,
            config.max_refinements,
        )
    except ProjectionError as err:
        raise ProjectionError(f"at t={state.t:.4f} (step {round(state.t * config.steps)}): {err}") from err
    x_next = (1.0 - t_next) * state.x0 + t_next * corrected
    return TrajectoryState(state.x0, x_next, t_next)


def euler_sample(
    model,
    instance: PlacementInstance,
    config: SamplerConfig,
    rng: np.random.Generator | None = None,
    trace: list | None = None,
) -> np.ndarray:
    """Plain N-step Euler integration of the learned velocity field."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    x = sample_prior(config.prior, instance.num_macros, rng)
    if trace is not None:
        trace.append(x.copy())
    dt = 1.0 / config.steps
    for k in range(config.steps):
        v = model.velocity(x, k * dt, instance)
        if not np.all(np.isfinite(v)):
            raise FloatingPointError(f"non-finite velocity at step {k}")
        x = x + dt * v
        if trace is not None:
            trace.append(x.copy())
    return x


def constrained_sample(
    model,
    instance: PlacementInstance,
    config: SamplerConfig,
    rng: np.random.Generator | None = None,
    trace: list | None = None,
) -> np.ndarray:
    """Hard-constraint guided sampling; the result is legal whenever projection succeeds."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    x0 = sample_prior(config.prior, instance.num_macros, rng)
    state = TrajectoryState(x0, x0.copy(), 0.0)
    if trace is not None:
        trace.append(state.x.copy())
    dt = 1.0 / config.steps
    for k in range(config.steps):
        final = k == config.steps - 1
        if final or k % config.project_every == 0:
            state = constrained_step(state, model, instance, config)
        else:
            v = model.velocity(state.x, state.t, instance)
            state = TrajectoryState(state.x0, state.x + dt * v, state.t + dt)
        if trace is not None:
            trace.append(state.x.copy())
    return state.x


def sample(
    model,
    instance: PlacementInstance,
    config: SamplerConfig,
    rng: np.random.Generator | None = None,
    trace: list | None = None,
) -> np.ndarray:
    """Dispatch on the configured mode."""
    if config.mode == "free":
        return euler_sample(model, instance, config, rng, trace)
    return constrained_sample(model, instance, config, rng, trace)
