"""scikit-learn style estimator wrapping training and sampling.

fit(X, y) learns the velocity field from (instance, placement) pairs and
predict(X) samples placements for new instances, so the placer drops into
pipelines, grid searches and clones like any other estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .core import PlacementInstance, check_positions, hpwl
from .network import ModelConfig, VelocityModel
from .sampling import SamplerConfig, sample
from .training import TrainConfig, train


def check_instances(X) -> list[PlacementInstance]:
    """Validate that X is a non-empty sequence of placement instances."""
    instances = list(X)
    if not instances:
        raise ValueError("X must contain at least one placement instance")
    for i, inst in enumerate(instances):
        if not isinstance(inst, PlacementInstance):
            raise TypeError(f"X[{i}] is {type(inst).__name__}, expected PlacementInstance")
    return instances


def check_placements(X, y) -> list[np.ndarray]:
    """Validate that y holds one (N_i, 2) placement per instance in X."""
    targets = list(y)
    if len(targets) != len(X):
        raise ValueError(f"X and y have different lengths ({len(X)} vs {len(targets)})")
    return [check_positions(inst, pos) for inst, pos in zip(X, targets)]


class FlowMatchingPlacer(BaseEstimator):
    """Generative macro placer: velocity-field regression + guided ODE sampling.

    Parameters mirror the training and sampling configuration; see
    SamplerConfig / TrainConfig / ModelConfig for semantics. With
    mode="hard_constraint" (the default) every predicted placement is legal.
    """

    def __init__(
        self,
        hidden_dim: int = 64,
        num_blocks: int = 3,
        num_heads: int = 4,
        time_dim: int = 32,
        prior: str = "uniform",
        steps: int = 50,
        mode: str = "hard_constraint",
        grid_cols: int = 64,
        grid_rows: int = 64,
        boundary_weight: float = 0.1,
        epochs: int = 20,
        batch_size: int = 8,
        learning_rate: float = 1e-3,
        seed: int = 0,
    ):
        self.hidden_dim = hidden_dim
        self.num_blocks = num_blocks
        self.num_heads = num_heads
        self.time_dim = time_dim
        self.prior = prior
        self.steps = steps
        self.mode = mode
        self.grid_cols = grid_cols
        self.grid_rows = grid_rows
        self.boundary_weight = boundary_weight
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    def _sampler_config(self) -> SamplerConfig:
        return SamplerConfig(
            prior=self.prior,
            steps=self.steps,
            mode=self.mode,
            grid_cols=self.grid_cols,
            grid_rows=self.grid_rows,
            boundary_weight=self.boundary_weight,
        )

    def fit(self, X, y):
        """Train the velocity field on (instance, reference placement) pairs."""
        instances = check_instances(X)
        targets = check_placements(instances, y)
        self.model_ = VelocityModel(
            ModelConfig(
                hidden_dim=self.hidden_dim,
                num_blocks=self.num_blocks,
                num_heads=self.num_heads,
                time_dim=self.time_dim,
            ),
            seed=self.seed,
        )
        config = TrainConfig(
            prior=self.prior,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            seed=self.seed,
        )
        self.loss_history_ = train(config, list(zip(instances, targets)), self.model_)
        return self

    def predict(self, X) -> list[np.ndarray]:
        """Sample one placement per instance; deterministic for a fitted estimator."""
        if not hasattr(self, "model_"):
            raise NotFittedError("this FlowMatchingPlacer is not fitted yet; call fit first")
        instances = check_instances(X)
        config = self._sampler_config()
        out = []
        for i, inst in enumerate(instances):
            rng = np.random.default_rng(np.random.SeedSequence((self.seed, i)))
            out.append(sample(self.model_, inst, config, rng))
        return out

    def score(self, X, y=None) -> float:
        """Negative mean wirelength of predicted placements (higher is better)."""
        instances = check_instances(X)
        placements = self.predict(instances)
        return -float(np.mean([hpwl(inst, pos) for inst, pos in zip(instances, placements)]))
