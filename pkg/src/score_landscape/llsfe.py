"""Second-degree local-likelihood score-function estimator.

At a query point ``x`` the log-density is fitted locally by a quadratic under
a Gaussian kernel of bandwidth ``h``. With kernel-weighted moments

    M_j = sum_i (X_i - x)^{⊗j} exp(-||X_i - x||^2 / (2 h^2)),   j = 0, 1, 2

and local covariance ``C = M2/M0 - (M1/M0)(M1/M0)^T`` the fitted gradient and
Hessian of ``log f`` are

    a1 = C^{-1} M1/M0,        A2 = I/h^2 - C^{-1}.

Score tensors are assembled from ``(a1, A2)`` through the partition
expansion of ``S_m`` in log-density derivatives; third and fourth
derivatives are not estimated at degree 2 and enter as zero.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .tensor import sym

__all__ = [
    "EstimatorConfig",
    "MomentTriple",
    "LocalFit",
    "PARTITIONS",
    "EstimatorError",
    "InsufficientMass",
    "SingularLocalCovariance",
    "default_bandwidth",
    "local_moments",
    "local_fit",
    "estimate_score",
    "assemble_score",
    "estimate_scores",
]

# (partition of m, coefficient c_m(partition)) read off the S_2 and S_4 expansions.
PARTITIONS = {
    1: [((1,), 1)],
    2: [((1, 1), 1), ((2,), 1)],
    4: [((1, 1, 1, 1), 1), ((2, 1, 1), 6), ((2, 2), 3), ((3, 1), 4), ((4,), 1)],
}


class EstimatorError(ArithmeticError):
    """The local fit is undefined at the query point."""


class InsufficientMass(EstimatorError):
    """Too little kernel mass, or no spread of samples, near the query point."""


class SingularLocalCovariance(EstimatorError):
    """Local covariance is numerically singular (degenerate point or ``h`` too small)."""


@dataclass(frozen=True)
class EstimatorConfig:
    """Settings for the degree-2 estimator.

    ``bandwidth=None`` picks :func:`default_bandwidth` from the sample size.
    ``min_effective_mass=None`` means ``1e-8 * n``.
    """

    bandwidth: float | None = None
    degree: int = 2
    min_effective_mass: float | None = None
    max_condition: float = 1e12

    def __post_init__(self):
        if self.degree != 2:
            raise ValueError("only the degree-2 estimator is implemented")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.min_effective_mass is not None and not self.min_effective_mass > 0:
            raise ValueError("min_effective_mass must be positive")

    def resolve_bandwidth(self, n: int, d: int) -> float:
        return self.bandwidth if self.bandwidth is not None else default_bandwidth(n, d, self.degree)

    def resolve_min_mass(self, n: int) -> float:
        return self.min_effective_mass if self.min_effective_mass is not None else 1e-8 * n


class MomentTriple(NamedTuple):
    M0: float
    M1: np.ndarray
    M2: np.ndarray


class LocalFit(NamedTuple):
    a1_hat: np.ndarray
    A2_hat: np.ndarray
    h: float


def default_bandwidth(n: int, d: int, degree: int = 2) -> float:
    """Rate-optimal scaling ``h = n^{-1/(2p + 2 + d)}``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return float(n ** (-1.0 / (2 * degree + 2 + d)))


def _as_samples(samples, x):
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    x = np.asarray(x, dtype=float)
    if X.shape[1] != x.shape[-1]:
        raise ValueError(f"sample dimension {X.shape[1]} != query dimension {x.shape[-1]}")
    return X, x


def local_moments(samples, x, cfg: EstimatorConfig = EstimatorConfig()) -> MomentTriple:
    X, x = _as_samples(samples, x)
    h = cfg.resolve_bandwidth(*X.shape)
    D = X - x
    w = np.exp(-np.sum(D * D, axis=1) / (2.0 * h * h))
    return MomentTriple(float(w.sum()), w @ D, (D * w[:, None]).T @ D)


def _fit_from_moments(M0, M1, M2, h, min_mass, max_cond):
    """Vectorised closed form; returns (a1, A2, status) with status 0 ok, 1 mass, 2 singular."""
    q, d = M1.shape
    status = np.zeros(q, dtype=np.int8)
    status[~(M0 >= min_mass)] = 1
    safe = np.where(M0 > 0, M0, 1.0)
    m1 = M1 / safe[:, None]
    C = M2 / safe[:, None, None] - np.einsum("qi,qj->qij", m1, m1)
    C = 0.5 * (C + np.swapaxes(C, 1, 2))
    evals, evecs = np.linalg.eigh(C)
    top = evals[:, -1]
    status[(status == 0) & ~(top > 0)] = 1
    bad = (status == 0) & ~(evals[:, 0] * max_cond > top)
    status[bad] = 2
    ok = status == 0
    inv = np.where(ok[:, None], 1.0 / np.where(ok[:, None], evals, 1.0), 0.0)
    P = np.einsum("qik,qk,qjk->qij", evecs, inv, evecs)
    a1 = np.einsum("qij,qj->qi", P, m1)
    A2 = np.eye(d) / h**2 - P
    A2 = 0.5 * (A2 + np.swapaxes(A2, 1, 2))
    return a1, A2, status


def local_fit(samples, x, cfg: EstimatorConfig = EstimatorConfig()) -> LocalFit:
    X, x = _as_samples(samples, x)
    n, d = X.shape
    h = cfg.resolve_bandwidth(n, d)
    mom = local_moments(X, x, cfg)
    a1, A2, status = _fit_from_moments(
        np.array([mom.M0]), mom.M1[None], mom.M2[None], h, cfg.resolve_min_mass(n), cfg.max_condition)
    if status[0] == 1:
        raise InsufficientMass(f"kernel mass {mom.M0:.3g} carries no usable spread at x={x}")
    if status[0] == 2:
        raise SingularLocalCovariance(f"local covariance is singular at x={x} (h={h:.3g})")
    return LocalFit(a1[0], A2[0], h)


def assemble_score(a1, A2, m: int) -> np.ndarray:
    """``sum_λ (-1)^m c_m(λ) sym(⊗_{j∈λ} Â_j)`` with ``Â_3 = Â_4 = 0``."""
    if m not in PARTITIONS:
        raise ValueError(f"unsupported score order {m}")
    a1 = np.asarray(a1, dtype=float)
    A2 = np.asarray(A2, dtype=float)
    factors = {1: a1, 2: A2}
    out = np.zeros((a1.shape[0],) * m)
    for parts, coef in PARTITIONS[m]:
        if any(j not in factors for j in parts):
            continue  # truncated: degree-2 fit has no third/fourth derivative
        term = factors[parts[0]]
        for j in parts[1:]:
            term = np.multiply.outer(term, factors[j])
        out += coef * sym(term)
    return (-1) ** m * out


def estimate_score(samples, x, cfg: EstimatorConfig = EstimatorConfig(), m: int = 2) -> np.ndarray:
    if m not in PARTITIONS:
        raise ValueError(f"unsupported score order {m}")
    fit = local_fit(samples, x, cfg)
    return assemble_score(fit.a1_hat, fit.A2_hat, m)


def _batch_score4(a1, A2):
    # Same expansion as assemble_score(m=4), vectorised over the leading axis.
    d = a1.shape[1]
    t1 = np.einsum("qi,qj,qk,ql->qijkl", a1, a1, a1, a1)
    t2 = np.einsum("qij,qk,ql->qijkl", A2, a1, a1)
    t3 = np.einsum("qij,qkl->qijkl", A2, A2)
    return t1 + 6.0 * _batch_sym4(t2) + 3.0 * _batch_sym4(t3)


def _batch_sym4(t):
    out = np.zeros_like(t)
    for p in itertools.permutations(range(1, 5)):
        out += np.transpose(t, (0,) + p)
    return out / 24.0


def estimate_scores(samples, queries, cfg: EstimatorConfig = EstimatorConfig(), m: int = 4,
                    chunk: int = 256):
    """Estimate ``S_m`` at many query points at once.

    Returns ``(scores, ok)``: ``scores`` has shape ``(q,) + (d,) * m`` and rows
    where the fit failed are zero with ``ok`` False.
    """
    if m not in PARTITIONS:
        raise ValueError(f"unsupported score order {m}")
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    Q = np.atleast_2d(np.asarray(queries, dtype=float))
    if X.shape[1] != Q.shape[1]:
        raise ValueError("samples and queries differ in dimension")
    n, d = X.shape
    h = cfg.resolve_bandwidth(n, d)
    min_mass = cfg.resolve_min_mass(n)
    out = np.zeros((Q.shape[0],) + (d,) * m)
    ok = np.zeros(Q.shape[0], dtype=bool)
    for start in range(0, Q.shape[0], chunk):
        q = Q[start:start + chunk]
        D = X[None, :, :] - q[:, None, :]
        w = np.exp(-np.einsum("qni,qni->qn", D, D) / (2.0 * h * h))
        M0 = w.sum(axis=1)
        M1 = np.einsum("qn,qni->qi", w, D)
        M2 = np.einsum("qn,qni,qnj->qij", w, D, D)
        a1, A2, status = _fit_from_moments(M0, M1, M2, h, min_mass, cfg.max_condition)
        good = status == 0
        sl = slice(start, start + q.shape[0])
        ok[sl] = good
        if m == 1:
            s = -a1
        elif m == 2:
            s = np.einsum("qi,qj->qij", a1, a1) + A2
        else:
            s = _batch_score4(a1, A2)
        s[~good] = 0.0
        out[sl] = s
    return out, ok
