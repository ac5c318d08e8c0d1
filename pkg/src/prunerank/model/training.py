"""Deterministic single-threaded training loop with Adam.

Shuffling is derived from (seed, epoch) only, batches run serially, and all
arithmetic is float64, so two runs with the same inputs produce bit-identical
parameters. Training aborts with a diagnostic if the loss stops being finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig, TrainConfig
from .network import Params, TrainItem, batch_gradients, init_params, zeros_like_params


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainStep:
    step: int
    label_loss: float
    rank_loss: float
    total_loss: float


@dataclass
class TrainLog:
    steps: list[TrainStep] = field(default_factory=list)

    def append(self, step: TrainStep) -> None:
        self.steps.append(step)

    def totals(self) -> list[float]:
        return [s.total_loss for s in self.steps]


class AdamState:
    def __init__(self, params: Params):
        self.m = zeros_like_params(params)
        self.v = zeros_like_params(params)
        self.t = 0

    def update(self, params: Params, grads: Params, cfg: TrainConfig) -> None:
        self.t += 1
        bc1 = 1.0 - cfg.beta1 ** self.t
        bc2 = 1.0 - cfg.beta2 ** self.t
        for name, g in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            params[name] -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)


def train(train_cfg: TrainConfig, model_cfg: ModelConfig,
          dataset: list[TrainItem],
          params: Params | None = None) -> tuple[Params, TrainLog]:
    """Train from a seeded init (or from `params` if given) and return the
    final parameters plus the per-step loss log."""
    if not dataset:
        raise ValueError("dataset must be non-empty")
    if params is None:
        params = init_params(model_cfg, train_cfg.seed)
    adam = AdamState(params)
    log = TrainLog()
    step = 0
    for epoch in range(train_cfg.epochs):
        order = np.random.default_rng([train_cfg.seed, epoch]).permutation(len(dataset))
        for start in range(0, len(dataset), train_cfg.batch_size):
            batch = [dataset[i] for i in order[start:start + train_cfg.batch_size]]
            grads, label_loss, rank_loss, total = batch_gradients(params, model_cfg, batch)
            if not math.isfinite(total):
                raise TrainingDiverged(
                    f"non-finite loss at step {step} (epoch {epoch}): "
                    f"label={label_loss} rank={rank_loss}")
            adam.update(params, grads, train_cfg)
            step += 1
            log.append(TrainStep(step=step, label_loss=label_loss,
                                 rank_loss=rank_loss, total_loss=total))
    return params, log
