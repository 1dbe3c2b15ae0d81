"""Plain gradient descent / mini-batch SGD with recorded trajectories."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

__all__ = ["TrainConfig", "Trajectory", "NonFiniteLoss", "random_init", "train"]


class NonFiniteLoss(FloatingPointError):
    """Loss or gradient became NaN/Inf; usually the learning rate is too large."""

    def __init__(self, iteration: int, message: str | None = None, partial=None):
        self.iteration = iteration
        self.partial = partial      # trajectory recorded before the failure
        super().__init__(message or f"non-finite loss or gradient at iteration {iteration}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-5
    iterations: int = 10_000
    batch_size: int | None = None   # None: full batch
    seed: int = 0
    record_every: int = 100

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")


class Trajectory(NamedTuple):
    iters: np.ndarray
    loss: np.ndarray
    param_error: np.ndarray
    final: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "loss", "param_error"])
            for it, lo, pe in zip(self.iters, self.loss, self.param_error):
                w.writerow([int(it), repr(float(lo)), repr(float(pe))])


def random_init(k: int, d: int, seed=None) -> np.ndarray:
    """``k`` rows drawn uniformly from the unit sphere in ``R^d``."""
    if k > d:
        raise ValueError("need k <= d")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    A = rng.standard_normal((k, d))
    return A / np.linalg.norm(A, axis=1, keepdims=True)


def train(objective: Callable, init, cfg: TrainConfig, n: int | None = None,
          metric: Callable | None = None, callback: Callable | None = None) -> Trajectory:
    """Run ``A <- A - lr * grad`` for ``cfg.iterations`` steps.

    ``objective(A, idx)`` returns ``(loss, grad)``; ``idx`` is ``None`` for a
    full batch or an index array drawn uniformly without replacement from
    ``range(n)``. ``metric(A)`` fills the ``param_error`` column (NaN when
    absent). ``callback(t, A)`` runs before step ``t`` and may return a
    replacement iterate. The iterate before step ``t`` is recorded when
    ``t % record_every == 0``; the final iterate is always recorded.
    """
    A = np.array(init, dtype=float, copy=True)
    if cfg.batch_size is not None:
        if n is None:
            raise ValueError("mini-batch training needs the sample count n")
        if cfg.batch_size > n:
            raise ValueError(f"batch_size {cfg.batch_size} exceeds n={n}")
    rng = np.random.default_rng(cfg.seed)
    iters, losses, errs = [], [], []

    def record(t, loss):
        iters.append(t)
        losses.append(loss)
        errs.append(metric(A) if metric is not None else np.nan)

    def partial():
        return Trajectory(np.array(iters), np.array(losses), np.array(errs), A) if iters else None

    for t in range(cfg.iterations):
        if callback is not None:
            replaced = callback(t, A)
            if replaced is not None:
                A = np.array(replaced, dtype=float)
        idx = None if cfg.batch_size is None else rng.choice(n, cfg.batch_size, replace=False)
        loss, grad = objective(A, idx)
        if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
            raise NonFiniteLoss(t, partial=partial())
        if t % cfg.record_every == 0:
            record(t, float(loss))
        A = A - cfg.learning_rate * grad

    loss, _ = objective(A, None)
    if not np.isfinite(loss):
        raise NonFiniteLoss(cfg.iterations, partial=partial())
    record(cfg.iterations, float(loss))
    return Trajectory(np.array(iters), np.array(losses), np.array(errs), A)
