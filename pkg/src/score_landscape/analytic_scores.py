"""Closed-form score tensors for the reference input distributions.

Convention: ``S_m(x) = (-1)**m * grad^m f(x) / f(x)``, so ``S_1 = -grad log f``
and, for a standard Gaussian, ``S_2 = x x^T - I``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .tensor import outer, sym

__all__ = [
    "Gaussian",
    "GaussianMixture",
    "SymmetricExponential",
    "gaussian_score",
    "gaussian_t1",
    "gaussian_t2",
    "mixture_score",
    "mixture_posterior",
    "laplace_score4",
    "score",
    "weighted_score4_sum",
]

SUPPORTED_ORDERS = (1, 2, 4)


@dataclass(frozen=True)
class Gaussian:
    """Standard normal ``N(0, I_d)``."""

    dim: int

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((n, self.dim))

    def logpdf(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return -0.5 * np.sum(X * X, axis=1) - 0.5 * self.dim * np.log(2 * np.pi)


@dataclass(frozen=True)
class GaussianMixture:
    """Two-component mixture ``p N(mu1, I) + (1 - p) N(mu2, I)``."""

    mu1: np.ndarray
    mu2: np.ndarray
    weight: float = 0.5

    def __post_init__(self):
        mu1 = np.asarray(self.mu1, dtype=float)
        mu2 = np.asarray(self.mu2, dtype=float)
        if mu1.shape != mu2.shape or mu1.ndim != 1:
            raise ValueError("mixture means must be 1-d vectors of the same length")
        if not 0.0 < self.weight < 1.0:
            raise ValueError("mixture weight must lie strictly in (0, 1)")
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "mu2", mu2)

    @classmethod
    def symmetric(cls, dim: int, shift: float = 1.0) -> "GaussianMixture":
        """``0.5 N(shift * 1, I) + 0.5 N(-shift * 1, I)``."""
        mu = np.full(dim, float(shift))
        return cls(mu, -mu, 0.5)

    @property
    def dim(self) -> int:
        return self.mu1.shape[0]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        first = rng.random(n) < self.weight
        Z = rng.standard_normal((n, self.dim))
        return Z + np.where(first[:, None], self.mu1, self.mu2)

    def logpdf(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        c = -0.5 * self.dim * np.log(2 * np.pi)
        l1 = np.log(self.weight) - 0.5 * np.sum((X - self.mu1) ** 2, axis=1)
        l2 = np.log1p(-self.weight) - 0.5 * np.sum((X - self.mu2) ** 2, axis=1)
        return logsumexp(np.stack([l1, l2]), axis=0) + c


@dataclass(frozen=True)
class SymmetricExponential:
    """Independent Laplace(0, 1) coordinates, ``f(x_i) = exp(-|x_i|) / 2``."""

    dim: int

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.laplace(size=(n, self.dim))

    def logpdf(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return -np.sum(np.abs(X), axis=1) - self.dim * np.log(2.0)


def _check_order(m: int) -> None:
    if m not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported score order {m}; expected one of {SUPPORTED_ORDERS}")


def gaussian_score(m: int, x) -> np.ndarray:
    """Score tensor of order ``m`` for ``N(0, I_d)`` evaluated at ``x``."""
    _check_order(m)
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    if m == 1:
        return x.copy()
    eye = np.eye(d)
    if m == 2:
        return np.outer(x, x) - eye
    return (outer([x, x, x, x])
            - 6.0 * sym(np.multiply.outer(np.outer(x, x), eye))
            + 3.0 * sym(np.multiply.outer(eye, eye)))


def _check_same_dim(*vs):
    shapes = {np.shape(v) for v in vs}
    if len(shapes) != 1 or len(next(iter(shapes))) != 1:
        raise ValueError("x, u, v must be vectors of the same dimension")


def gaussian_t2(x, u) -> float:
    """``S_4(x)(u, u, u, u)`` for a standard Gaussian."""
    _check_same_dim(x, u)
    ux = float(np.dot(u, x))
    uu = float(np.dot(u, u))
    return ux**4 - 6.0 * uu * ux**2 + 3.0 * uu**2


def gaussian_t1(x, u, v) -> float:
    """``S_4(x)(u, u, v, v)`` for a standard Gaussian."""
    _check_same_dim(x, u, v)
    ux, vx, uv = float(np.dot(u, x)), float(np.dot(v, x)), float(np.dot(u, v))
    uu, vv = float(np.dot(u, u)), float(np.dot(v, v))
    return (ux**2 * vx**2 - uu * vx**2 - 4.0 * ux * vx * uv - vv * ux**2
            + uu * vv + 2.0 * uv**2)


def mixture_posterior(X, dist: GaussianMixture) -> np.ndarray:
    """Posterior probability of the first component, stable for large ``|x|``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    l1 = np.log(dist.weight) - 0.5 * np.sum((X - dist.mu1) ** 2, axis=1)
    l2 = np.log1p(-dist.weight) - 0.5 * np.sum((X - dist.mu2) ** 2, axis=1)
    return expit(l1 - l2)


def mixture_score(m: int, x, dist: GaussianMixture) -> np.ndarray:
    _check_order(m)
    x = np.asarray(x, dtype=float)
    p1 = float(mixture_posterior(x, dist)[0])
    return (p1 * gaussian_score(m, x - dist.mu1)
            + (1.0 - p1) * gaussian_score(m, x - dist.mu2))


def laplace_score4(x) -> np.ndarray:
    """``sgn(x)^{⊗4}``, with ``sgn(0) = 0``."""
    s = np.sign(np.asarray(x, dtype=float))
    return outer([s, s, s, s])


def score(dist, m: int, x) -> np.ndarray:
    """Dispatch to the closed form for ``dist``."""
    if isinstance(dist, Gaussian):
        return gaussian_score(m, x)
    if isinstance(dist, GaussianMixture):
        return mixture_score(m, x, dist)
    if isinstance(dist, SymmetricExponential):
        if m != 4:
            raise ValueError("only the fourth-order Laplace score is provided")
        return laplace_score4(x)
    raise TypeError(f"no analytic score for {type(dist).__name__}")


def _gaussian_weighted_sum4(X: np.ndarray, w: np.ndarray) -> np.ndarray:
    d = X.shape[1]
    eye = np.eye(d)
    T4 = np.einsum("s,si,sj,sk,sl->ijkl", w, X, X, X, X, optimize=True)
    T2 = np.einsum("s,si,sj->ij", w, X, X)
    return (T4 - 6.0 * sym(np.multiply.outer(T2, eye))
            + 3.0 * w.sum() * sym(np.multiply.outer(eye, eye)))


def weighted_score4_sum(dist, X, weights) -> np.ndarray:
    """``sum_s weights[s] * S_4(X[s])`` without materialising per-sample tensors."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    w = np.asarray(weights, dtype=float)
    if w.shape != (X.shape[0],):
        raise ValueError("one weight per sample row is required")
    if isinstance(dist, Gaussian):
        return _gaussian_weighted_sum4(X, w)
    if isinstance(dist, GaussianMixture):
        p1 = mixture_posterior(X, dist)
        return (_gaussian_weighted_sum4(X - dist.mu1, w * p1)
                + _gaussian_weighted_sum4(X - dist.mu2, w * (1.0 - p1)))
    if isinstance(dist, SymmetricExponential):
        S = np.sign(X)
        return np.einsum("s,si,sj,sk,sl->ijkl", w, S, S, S, S, optimize=True)
    raise TypeError(f"no analytic score for {type(dist).__name__}")
