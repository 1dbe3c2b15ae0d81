"""Landscape-designed loss for one-hidden-layer networks, plus baselines.

The designed loss is

    L(A) = s * ( sum_{i != j} E[y S_4(x)(a_i, a_i, a_j, a_j)]
                 - mu * sum_i E[y S_4(x)(a_i, a_i, a_i, a_i)] )
           + lam * sum_i (||a_i||^2 - 1)^2

with ``s = ±1`` chosen so that the effective weights ``kappa_i`` are positive.
It is linear in ``S_4``, so every empirical evaluation reduces to the moment
tensor ``T = mean_s y_s S_4(X_s)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analytic_scores import Gaussian, GaussianMixture, SymmetricExponential, mixture_posterior, weighted_score4_sum
from .llsfe import EstimatorConfig, estimate_scores
from .teacher import Dataset, NonSmoothActivation, TeacherNet, TeacherStats, get_activation

__all__ = [
    "AnalyticScores",
    "GaussianAssumed",
    "EstimatedScores",
    "LossConfig",
    "ScoreTensorBatch",
    "MissingScores",
    "RankDeficientDesign",
    "score_moment",
    "loss_from_moment",
    "grad_from_moment",
    "loss_L",
    "grad_L",
    "loss_L_contraction",
    "sample_terms",
    "DesignedLoss",
    "loss_tensor_form",
    "loss_l2",
    "grad_l2",
    "param_error",
    "recover_w",
]


class MissingScores(ValueError):
    """Score tensors are not available for every sample."""


class RankDeficientDesign(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class AnalyticScores:
    """Exact scores of a known input distribution."""

    dist: object


@dataclass(frozen=True)
class GaussianAssumed:
    """Standard-Gaussian scores regardless of the real input law (the G baseline)."""


@dataclass(frozen=True)
class EstimatedScores:
    """LLSFE scores; ``reference`` is the sample the estimator fits on (default: the data inputs)."""

    config: EstimatorConfig = field(default_factory=EstimatorConfig)
    reference: np.ndarray | None = None


@dataclass(frozen=True)
class LossConfig:
    """Regularisation weights, score provider and tensor-term sign.

    For guidance, the landscape theory asks for ``mu < c / kappa_ratio`` and
    ``lam >= kappa_max / c`` with ``c <= 0.01``; neither is enforced.
    """

    mu: float = 30.0
    lam: float = 1000.0
    score_provider: object = field(default_factory=GaussianAssumed)
    sign: float = 1.0

    def __post_init__(self):
        if not (self.mu > 0 and self.lam > 0):
            raise ValueError("mu and lam must be positive")
        if self.sign not in (1.0, -1.0):
            raise ValueError("sign must be +1 or -1")


@dataclass
class ScoreTensorBatch:
    """Per-sample order-4 score tensors aligned with a dataset; ``valid`` marks usable rows."""

    tensors: np.ndarray
    valid: np.ndarray

    @classmethod
    def from_provider(cls, provider, X) -> "ScoreTensorBatch":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n, d = X.shape
        if isinstance(provider, EstimatedScores):
            ref = X if provider.reference is None else provider.reference
            S, ok = estimate_scores(ref, X, provider.config, m=4)
            return cls(S, ok)
        dist = _analytic_dist(provider, d)
        S = np.empty((n, d, d, d, d))
        for s in range(n):
            S[s] = weighted_score4_sum(dist, X[s:s + 1], np.ones(1))
        return cls(S, np.ones(n, dtype=bool))

    @property
    def n_failed(self) -> int:
        return int(np.count_nonzero(~self.valid))


def _analytic_dist(provider, d):
    if isinstance(provider, GaussianAssumed):
        return Gaussian(d)
    if isinstance(provider, AnalyticScores):
        return provider.dist
    raise TypeError(f"{type(provider).__name__} is not an analytic score provider")


def score_moment(data: Dataset, scores, idx=None) -> np.ndarray:
    """``T = mean_s y_s S_4(X_s)`` over usable samples (optionally the rows ``idx``)."""
    X, y = data.X, data.y
    if idx is not None:
        X, y = X[idx], y[idx]
    if isinstance(scores, ScoreTensorBatch):
        S, ok = scores.tensors, scores.valid
        if S.shape[0] != data.n:
            raise MissingScores(f"{S.shape[0]} score tensors for {data.n} samples")
        if idx is not None:
            S, ok = S[idx], ok[idx]
        if S.shape[1:] != (data.d,) * 4:
            raise ValueError("score tensors must be order 4 with the data dimension")
        if not ok.any():
            raise MissingScores("no usable score tensors")
        return np.tensordot(y[ok], S[ok], axes=(0, 0)) / ok.sum()
    if isinstance(scores, EstimatedScores):
        batch = ScoreTensorBatch.from_provider(scores, data.X)
        return score_moment(data, batch, idx)
    dist = _analytic_dist(scores, data.d)
    return weighted_score4_sum(dist, X, y) / X.shape[0]


def _check_A(A, d):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] != d:
        raise ValueError(f"A has {A.shape[1]} columns, data dimension is {d}")
    return A


def _pair_weights(k, mu):
    return np.ones((k, k)) - (1.0 + mu) * np.eye(k)


def loss_from_moment(A, T, cfg: LossConfig) -> float:
    A = _check_A(A, T.shape[0])
    R = np.einsum("abcd,lc,ld->lab", T, A, A)
    Q = np.einsum("lab,ia,ib->il", R, A, A)
    reg = np.sum((np.sum(A * A, axis=1) - 1.0) ** 2)
    return float(cfg.sign * np.sum(_pair_weights(A.shape[0], cfg.mu) * Q) + cfg.lam * reg)


def grad_from_moment(A, T, cfg: LossConfig) -> np.ndarray:
    # Uses the full index symmetry of T (mean of symmetric score tensors).
    A = _check_A(A, T.shape[0])
    W = _pair_weights(A.shape[0], cfg.mu)
    R = np.einsum("abcd,lc,ld->lab", T, A, A)
    tensor_part = 4.0 * np.einsum("il,lab,ib->ia", W, R, A)
    norms = np.sum(A * A, axis=1)
    return cfg.sign * tensor_part + 4.0 * cfg.lam * (norms - 1.0)[:, None] * A


def loss_L(A, data: Dataset, scores, cfg: LossConfig) -> float:
    """Empirical designed loss; ``scores`` is a :class:`ScoreTensorBatch` or a provider."""
    return loss_from_moment(A, score_moment(data, scores), cfg)


def grad_L(A, data: Dataset, scores, cfg: LossConfig) -> np.ndarray:
    return grad_from_moment(A, score_moment(data, scores), cfg)


def _contractions(dist, X, U):
    """Per-sample ``S_4(x)(u_i, u_i, u_j, u_j)`` for all row pairs, shape (n, k, k)."""
    if isinstance(dist, SymmetricExponential):
        P = np.sign(X) @ U.T
        P2 = P * P
        return np.einsum("si,sj->sij", P2, P2)
    if isinstance(dist, GaussianMixture):
        p1 = mixture_posterior(X, dist)[:, None, None]
        return (p1 * _contractions(Gaussian(dist.dim), X - dist.mu1, U)
                + (1.0 - p1) * _contractions(Gaussian(dist.dim), X - dist.mu2, U))
    if isinstance(dist, Gaussian):
        P = X @ U.T                     # (n, k): <u_i, x>
        G = U @ U.T                     # <u_i, u_j>
        nn = np.diag(G)
        P2 = P * P
        return (np.einsum("si,sj->sij", P2, P2)
                - nn[None, :, None] * P2[:, None, :]
                - 4.0 * np.einsum("si,sj,ij->sij", P, P, G)
                - nn[None, None, :] * P2[:, :, None]
                + (np.outer(nn, nn) + 2.0 * G * G)[None])
    raise TypeError(f"no closed-form contractions for {type(dist).__name__}")


def sample_terms(A, data: Dataset, provider, cfg: LossConfig, chunk: int = 4096) -> np.ndarray:
    """Per-sample tensor part of the loss, ``s * y_s * sum_ij W_ij S_4(X_s)(a_i, a_i, a_j, a_j)``.

    Evaluated contraction-first, so no order-4 tensor is ever built. Its mean
    plus the regulariser is the designed loss.
    """
    A = _check_A(A, data.d)
    dist = _analytic_dist(provider, data.d)
    W = _pair_weights(A.shape[0], cfg.mu)
    out = np.empty(data.n)
    for start in range(0, data.n, chunk):
        sl = slice(start, start + chunk)
        out[sl] = np.einsum("s,sij,ij->s", data.y[sl], _contractions(dist, data.X[sl], A), W)
    return cfg.sign * out


def loss_L_contraction(A, data: Dataset, provider, cfg: LossConfig, chunk: int = 4096) -> float:
    """Same value as :func:`loss_L`, evaluating t1/t2 per sample without building tensors."""
    A = _check_A(A, data.d)
    reg = np.sum((np.sum(A * A, axis=1) - 1.0) ** 2)
    return float(np.mean(sample_terms(A, data, provider, cfg, chunk)) + cfg.lam * reg)


class DesignedLoss:
    """Loss/gradient callback over a fixed dataset for :func:`optimizer.train`.

    Full-batch calls reuse the cached moment tensor; mini-batch calls rebuild it
    from the requested rows. Estimated scores are computed once for all rows,
    or passed in precomputed as ``scores``.
    """

    def __init__(self, data: Dataset, cfg: LossConfig, scores: ScoreTensorBatch | None = None):
        self.data = data
        self.cfg = cfg
        provider = cfg.score_provider
        if scores is not None:
            self.scores = scores
        elif isinstance(provider, EstimatedScores):
            self.scores = ScoreTensorBatch.from_provider(provider, data.X)
        else:
            self.scores = provider
        self.T = score_moment(data, self.scores)

    @property
    def n_failed(self) -> int:
        return self.scores.n_failed if isinstance(self.scores, ScoreTensorBatch) else 0

    def __call__(self, A, idx=None):
        T = self.T if idx is None else score_moment(self.data, self.scores, idx)
        return loss_from_moment(A, T, self.cfg), grad_from_moment(A, T, self.cfg)


def loss_tensor_form(A, teacher: TeacherNet, kappa: TeacherStats, cfg: LossConfig) -> float:
    """Population loss written through ``kappa_i = w_i E[g''''(<a_i*, x>)]``."""
    if get_activation(teacher.activation).d4f is None:
        raise NonSmoothActivation(f"{teacher.activation} has no classical fourth derivative")
    A = _check_A(A, teacher.d)
    kap = np.asarray(kappa.kappa if isinstance(kappa, TeacherStats) else kappa, dtype=float)
    C2 = (teacher.A_star @ A.T) ** 2    # C2[i, j] = <a_i*, a_j>^2
    row = C2.sum(axis=1)
    cross = row**2 - np.sum(C2**2, axis=1)   # sum_{j != l} C2[i,j] C2[i,l]
    quartic = np.sum(C2**2, axis=1)
    reg = np.sum((np.sum(A * A, axis=1) - 1.0) ** 2)
    return float(cfg.sign * (kap @ cross - cfg.mu * (kap @ quartic)) + cfg.lam * reg)


def loss_l2(A, w, data: Dataset, activation) -> float:
    g = get_activation(activation).f
    resid = g(data.X @ np.atleast_2d(A).T) @ np.asarray(w, dtype=float) - data.y
    return float(np.mean(resid**2))


def grad_l2(A, w, data: Dataset, activation) -> np.ndarray:
    """Gradient of :func:`loss_l2` in ``A`` with ``w`` held fixed."""
    act = get_activation(activation)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    w = np.asarray(w, dtype=float)
    Z = data.X @ A.T
    resid = act.f(Z) @ w - data.y
    return (2.0 / data.n) * (act.df(Z) * resid[:, None] * w[None, :]).T @ data.X


def param_error(A, A_star) -> float:
    """``min(1 - min_i max_j |M_ij|, 1 - min_j max_i |M_ij|)`` with ``A = M A_star``.

    Zero exactly when ``M`` is a signed permutation. Can dip below zero when
    the dominant coefficients exceed one in magnitude.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    A_star = np.atleast_2d(np.asarray(A_star, dtype=float))
    if A_star.shape[0] != A_star.shape[1]:
        raise ValueError("parameter error needs a square A_star (k = d)")
    try:
        M = np.abs(np.linalg.solve(A_star.T, A.T).T)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("A_star is singular") from exc
    return float(min(1.0 - M.max(axis=1).min(), 1.0 - M.max(axis=0).min()))


def recover_w(A, data: Dataset, activation, rcond: float = 1e-10) -> np.ndarray:
    """Least-squares output weights once the hidden layer ``A`` is fixed."""
    g = get_activation(activation).f
    design = g(data.X @ np.atleast_2d(A).T)
    s = np.linalg.svd(design, compute_uv=False)
    if s.size == 0 or s[-1] <= rcond * s[0]:
        raise RankDeficientDesign("design matrix lacks full column rank")
    w, *_ = np.linalg.lstsq(design, data.y, rcond=None)
    return w
