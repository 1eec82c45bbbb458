from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .model import EncoderModel
from .objectives import mse_loss_and_grad, triplet_loss_and_grad


class EncoderDivergedError(FloatingPointError):
    """Training produced a non-finite loss or parameter."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    batch_size: int = 128
    max_epochs: int = 200
    early_stop_delta: float = 0.0005
    early_stop_patience: int = 10
    update_interval: int = 10
    optimizer: str = "adam"

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {sorted(OPTIMIZERS)}")


@dataclass
class TrainResult:
    model: EncoderModel
    losses: list = field(default_factory=list)
    stopped_early: bool = False

    @property
    def epochs(self) -> int:
        return len(self.losses)


class SGD:
    """Plain gradient step with a fixed learning rate."""

    def __init__(self, n: int, lr: float):
        self.lr = lr

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        params -= self.lr * grad


class Adam:
    def __init__(self, n: int, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


OPTIMIZERS = {"sgd": SGD, "adam": Adam}


class EarlyStopping:
    """Stop once the best loss has not dropped by more than ``delta`` for
    ``patience`` consecutive epochs."""

    def __init__(self, delta: float, patience: int):
        self.delta = delta
        self.patience = patience
        self.best = np.inf
        self.stale = 0

    def __call__(self, loss: float) -> bool:
        if loss < self.best - self.delta:
            self.best = loss
            self.stale = 0
        else:
            self.best = min(self.best, loss)
            self.stale += 1
        return self.stale >= self.patience


def train(model: EncoderModel, data, objective: str, cfg: TrainConfig, rng: np.random.Generator,
          margin: float | None = None) -> TrainResult:
    """Fit ``model`` in place by minibatch descent (plain or Adam) on shuffled data.

    ``data`` is an (n, T, D) trajectory array for ``"mse"`` and an
    (anchors, positives, negatives) tuple for ``"triplet"``; the margin stays
    fixed for the whole call.
    """
    if objective == "mse":
        x = np.asarray(data, dtype=float)
        n = len(x)

        def batch_loss(idx):
            return mse_loss_and_grad(model, x[idx])

    elif objective == "triplet":
        if margin is None or not margin > 0:
            raise ValueError("triplet training needs a positive margin")
        a, p, ng = (np.asarray(v, dtype=float) for v in data)
        n = len(a)

        def batch_loss(idx):
            return triplet_loss_and_grad(model, a[idx], p[idx], ng[idx], margin)

    else:
        raise ValueError(f"unknown objective {objective!r}")
    if n == 0:
        raise ValueError("no training data")

    opt = OPTIMIZERS[cfg.optimizer](len(model.params), cfg.learning_rate)
    stopper = EarlyStopping(cfg.early_stop_delta, cfg.early_stop_patience)
    result = TrainResult(model)
    for _ in range(cfg.max_epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            loss, grad = batch_loss(idx)
            if not np.isfinite(loss):
                raise EncoderDivergedError(f"{objective} loss became {loss} after {result.epochs} epochs")
            opt.step(model.params, grad)
            total += loss * len(idx)
        if not np.all(np.isfinite(model.params)):
            raise EncoderDivergedError(f"non-finite encoder parameters after {result.epochs + 1} epochs")
        epoch_loss = total / n
        result.losses.append(epoch_loss)
        if stopper(epoch_loss):
            result.stopped_early = True
            break
    return result


def update_schedule(base: int) -> Iterator[int]:
    """Encoder update iterations with linearly growing gaps: base, 3 base, 6 base, ..."""
    if base < 1:
        raise ValueError("update interval must be >= 1")
    n = 0
    it = 0
    while True:
        n += 1
        it += n * base
        yield it


def schedule_until(base: int, last: int) -> set:
    out = set()
    for u in update_schedule(base):
        if u > last:
            return out
        out.add(u)
