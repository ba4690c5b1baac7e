"""Conditional flow-matching training.

Training pairs interpolate linearly between a source draw and a reference
placement; the regression target is the constant difference between the two
endpoints. The loss is plain mean squared error over every macro coordinate
in the batch, optimized with adaptive-moment gradient steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .core import ConfigError, PlacementInstance, check_positions
from .sampling import SourcePrior, make_prior, sample_prior


@dataclass(frozen=True)
class TrainConfig:
    prior: SourcePrior | str = "uniform"
    batch_size: int = 8
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 20
    seed: int = 0
    checkpoint_every: int = 0      # epochs between checkpoint writes; 0 = final only

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        object.__setattr__(self, "prior", make_prior(self.prior))


def make_training_pair(
    instance: PlacementInstance,
    target_positions: np.ndarray,
    prior,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float, np.ndarray]:
    """Draw (x_t, t, target velocity) for one record.

    t is uniform on [0, 1], the source point comes from the prior, and the
    target velocity is exactly endpoint difference (constant along the path).
    """
    x1 = check_positions(instance, target_positions)
    t = float(rng.uniform())
    x0 = sample_prior(prior, instance.num_macros, rng)
    x_t = (1.0 - t) * x0 + t * x1
    return x_t, t, x1 - x0


def cfm_loss(model, batch) -> Tensor:
    """Mean squared velocity error over all macro coordinates in the batch.

    `batch` rows are (instance, x_t, t, target). The model only needs a
    `forward(x_t, t, instance)` returning a tape tensor or a plain array, so
    oracle stand-ins work too.
    """
    total_sse = None
    total_coords = 0
    for instance, x_t, t, target in batch:
        out = model.forward(x_t, t, instance)
        if not isinstance(out, Tensor):
            out = Tensor(out)
        diff = out - Tensor(np.asarray(target, dtype=np.float64))
        sse = (diff * diff).sum()
        total_sse = sse if total_sse is None else total_sse + sse
        total_coords += int(np.asarray(target).size)
    if total_sse is None:
        raise ValueError("empty batch")
    loss = total_sse / total_coords
    if not np.isfinite(loss.data):
        raise FloatingPointError("non-finite training loss")
    return loss


class Adam:
    """Adaptive-moment estimation over a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, p in self.params.items():
            g = p.grad
            if g is None:          # detached parameters simply do not move
                continue
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1**self.t)
            v_hat = self.v[k] / (1 - b2**self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(
    config: TrainConfig,
    dataset,
    model,
    checkpoint_path=None,
) -> list[tuple[int, float]]:
    """Run the flow-matching optimization loop; returns the (step, loss) history.

    The model is updated in place. Fully seeded: identical config + dataset +
    initial parameters reproduce the loss history exactly.
    """
    if not dataset:
        raise ConfigError("training dataset is empty")
    for idx, (instance, positions) in enumerate(dataset):
        try:
            check_positions(instance, positions)
        except ValueError as err:
            raise ConfigError(f"dataset record {idx}: {err}") from err

    rng = np.random.default_rng(config.seed)
    optimizer = Adam(model.params, config.learning_rate, config.beta1, config.beta2, config.adam_eps)
    history: list[tuple[int, float]] = []
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        for start in range(0, len(order), config.batch_size):
            batch = []
            for idx in order[start : start + config.batch_size]:
                instance, x1 = dataset[idx]
                x_t, t, target = make_training_pair(instance, x1, config.prior, rng)
                batch.append((instance, x_t, t, target))
            model.zero_grad()
            loss = cfm_loss(model, batch)
            loss.backward()
            optimizer.step()
            step += 1
            history.append((step, float(loss.data)))
        if checkpoint_path and config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
            model.save(checkpoint_path)
    if checkpoint_path:
        model.save(checkpoint_path)
    return history
