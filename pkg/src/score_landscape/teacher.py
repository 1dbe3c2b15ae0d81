"""Ground-truth one-hidden-layer networks and labelled datasets."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import expit

__all__ = [
    "ACTIVATIONS",
    "Activation",
    "NonSmoothActivation",
    "TeacherNet",
    "Dataset",
    "TeacherStats",
    "sample_input",
    "generate",
    "make_dataset",
    "estimate_kappa",
]


class NonSmoothActivation(ValueError):
    """The activation has no classical fourth derivative."""


class Activation(NamedTuple):
    name: str
    f: object
    df: object
    d4f: object | None


def _softplus_d4(t):
    s = expit(t)
    return s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s)


ACTIVATIONS = {
    "relu": Activation("relu", lambda t: np.maximum(t, 0.0), lambda t: (t > 0).astype(float), None),
    "softplus": Activation("softplus", lambda t: np.logaddexp(0.0, t), expit, _softplus_d4),
    "quartic": Activation("quartic", lambda t: t**4, lambda t: 4.0 * t**3,
                          lambda t: np.full_like(np.asarray(t, dtype=float), 24.0)),
    # not a teacher activation; handy for closed-form least-squares checks
    "identity": Activation("identity", lambda t: np.asarray(t, dtype=float),
                           lambda t: np.ones_like(np.asarray(t, dtype=float)),
                           lambda t: np.zeros_like(np.asarray(t, dtype=float))),
}


def get_activation(act) -> Activation:
    if isinstance(act, Activation):
        return act
    try:
        return ACTIVATIONS[act]
    except KeyError:
        raise ValueError(f"unknown activation {act!r}; choose from {sorted(ACTIVATIONS)}") from None


@dataclass(frozen=True)
class TeacherNet:
    """``y = sum_i w_i g(<a_i, x>) + eta`` with ``eta ~ N(0, noise_std^2)``."""

    w_star: np.ndarray
    A_star: np.ndarray
    activation: str = "relu"
    noise_std: float = 0.0

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w_star, dtype=float))
        A = np.atleast_2d(np.asarray(self.A_star, dtype=float))
        k, d = A.shape
        if w.shape != (k,):
            raise ValueError(f"w_star has shape {w.shape}, expected ({k},)")
        if k > d:
            raise ValueError("teacher needs k <= d hidden units")
        if np.any(np.linalg.norm(A, axis=1) == 0):
            raise ValueError("teacher rows must be nonzero")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        get_activation(self.activation)
        object.__setattr__(self, "w_star", w)
        object.__setattr__(self, "A_star", A)

    @classmethod
    def identity(cls, d: int, activation: str = "relu", noise_std: float = 0.0) -> "TeacherNet":
        return cls(np.ones(d), np.eye(d), activation, noise_std)

    @property
    def k(self) -> int:
        return self.A_star.shape[0]

    @property
    def d(self) -> int:
        return self.A_star.shape[1]

    def predict(self, X) -> np.ndarray:
        """Noiseless network output."""
        g = get_activation(self.activation).f
        return g(np.asarray(X, dtype=float) @ self.A_star.T) @ self.w_star


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} input rows but {y.shape[0]} labels")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.seed)

    def to_csv(self, path) -> None:
        """Header ``x_0,...,x_{d-1},y``; 17 significant digits per value."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x_{j}" for j in range(self.d)] + ["y"])
            for row, target in zip(self.X, self.y):
                w.writerow([repr(float(v)) for v in row] + [repr(float(target))])

    @classmethod
    def from_csv(cls, path, seed: int | None = None) -> "Dataset":
        with open(Path(path), newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[-1] != "y" or any(h != f"x_{j}" for j, h in enumerate(header[:-1])):
                raise ValueError(f"unexpected dataset header: {header}")
            rows = np.array([[float(v) for v in r] for r in reader if r], dtype=float)
        d = len(header) - 1
        rows = rows.reshape(-1, d + 1)
        return cls(rows[:, :d], rows[:, d], seed)


class TeacherStats(NamedTuple):
    kappa: np.ndarray
    stderr: np.ndarray


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_input(dist, n: int, seed=None) -> np.ndarray:
    """``n`` i.i.d. rows from ``dist``; deterministic for a fixed integer seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return dist.sample(n, _rng(seed))


def generate(teacher: TeacherNet, X, seed=None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != teacher.d:
        raise ValueError(f"inputs have dimension {X.shape[1]}, teacher expects {teacher.d}")
    y = teacher.predict(X)
    if teacher.noise_std > 0:
        y = y + teacher.noise_std * _rng(seed).standard_normal(X.shape[0])
    return y


def make_dataset(teacher: TeacherNet, dist, n: int, seed: int) -> Dataset:
    """Draw inputs and labels from one seeded stream."""
    rng = np.random.default_rng(seed)
    X = sample_input(dist, n, rng)
    return Dataset(X, generate(teacher, X, rng), seed)


def estimate_kappa(teacher: TeacherNet, dist, n_mc: int = 100_000, seed=None) -> TeacherStats:
    """Monte Carlo estimate of ``kappa_i = w_i E[g''''(<a_i, x>)]`` with standard errors."""
    act = get_activation(teacher.activation)
    if act.d4f is None:
        raise NonSmoothActivation(f"{act.name} has no classical fourth derivative")
    if n_mc < 10_000:
        raise ValueError("use at least 1e4 Monte Carlo samples")
    X = sample_input(dist, n_mc, seed)
    vals = act.d4f(X @ teacher.A_star.T) * teacher.w_star
    return TeacherStats(vals.mean(axis=0), vals.std(axis=0, ddof=1) / np.sqrt(n_mc))
