"""Experiment drivers behind the ``score-landscape`` command.

Every runner takes an :class:`ExperimentSpec` and returns a :class:`Result`
holding CSV rows plus a flat summary. Randomness comes from one master seed:
the stream for trial ``j`` at sample-size index ``i`` is
``SeedSequence(seed, spawn_key=(i, j))``, so any single trial can be replayed
without running the others. Trials run on a thread pool capped by the
``SCORE_LANDSCAPE_THREADS`` environment variable and are merged in
``(i, j)`` order, which keeps output byte-identical across schedules.
"""

from __future__ import annotations

import dataclasses
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .analytic_scores import Gaussian, GaussianMixture, SymmetricExponential, mixture_posterior, score
from .landscape_loss import (
    AnalyticScores,
    DesignedLoss,
    EstimatedScores,
    GaussianAssumed,
    LossConfig,
    RankDeficientDesign,
    ScoreTensorBatch,
    _contractions,
    grad_L,
    grad_l2,
    loss_L,
    loss_l2,
    loss_tensor_form,
    param_error,
    recover_w,
    sample_terms,
)
from .llsfe import EstimatorConfig, EstimatorError, assemble_score, local_fit
from .optimizer import NonFiniteLoss, TrainConfig, random_init, train
from .teacher import TeacherNet, TeacherStats, make_dataset
from .tensor import frobenius_norm, spectral_norm_matrix

__all__ = [
    "KINDS",
    "DEFAULTS",
    "ConfigError",
    "NumericalFailure",
    "ExperimentSpec",
    "Result",
    "make_distribution",
    "trial_seed",
    "run",
    "run_score_error",
    "run_landscape_race",
    "run_train_llsfe",
    "run_stein_check",
    "run_grad_check",
    "write_result",
]

KINDS = ("score-error", "landscape-race", "train-llsfe", "stein-check", "grad-check")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment settings."""


class NumericalFailure(ArithmeticError):
    """An experiment could not produce trustworthy numbers."""


# Per-experiment defaults layered under config-file and command-line values.
DEFAULTS = {
    "score-error": dict(dist="gaussian", dim=2, n_list=(128, 256, 512, 1024, 2048, 4096), trials=500,
                        bandwidth="0.7"),
    "landscape-race": dict(dist="laplace", dim=10, n_list=(8192,), mu=30.0, lam=2000.0),
    "train-llsfe": dict(dist="gaussian", dim=2, n_list=(8192,), mu=30.0, lam=2000.0, bandwidth="0.5"),
    "stein-check": dict(dist="gaussian,mixture", dim=2, mc_samples=100_000),
    "grad-check": dict(dist="mixture", dim=3, n_list=(64,), trials=5, mu=30.0, lam=2000.0,
                       activation="softplus", noise_std=0.1, sign=1.0, mc_samples=100_000),
}


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    dist: str = "gaussian"
    dim: int = 2
    neurons: int | None = None
    n_list: tuple = (128, 256, 512, 1024, 2048, 4096)
    trials: int = 500
    percentiles: tuple = (95, 75, 50, 25, 5)
    mu: float = 30.0
    lam: float = 2000.0
    sign: float = -1.0
    lr: float = 5e-5
    lr_l2: float = 5e-3
    iters: int = 10_000
    batch: int | None = None
    record_every: int = 100
    activation: str = "relu"
    noise_std: float = 0.0
    bandwidth: str = "0.7"
    query: str = "random"
    mc_samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment {self.kind!r}; choose from {', '.join(KINDS)}")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "percentiles", tuple(float(p) for p in self.percentiles))
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ConfigError("sample sizes must be positive")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ConfigError("sample sizes must be strictly increasing")
        if self.dim < 1 or self.k < 1 or self.k > self.dim:
            raise ConfigError("need 1 <= neurons <= dim")
        if not (self.mu > 0 and self.lam > 0):
            raise ConfigError("mu and lambda must be positive")
        if self.sign not in (1.0, -1.0):
            raise ConfigError("sign must be 1 or -1")
        if self.lr < 0 or self.lr_l2 < 0 or self.iters < 0 or self.record_every < 1:
            raise ConfigError("learning rates and iteration counts must be non-negative")
        if self.batch is not None and self.batch < 1:
            raise ConfigError("batch must be positive or 'full'")
        if any(not 0 <= p <= 100 for p in self.percentiles):
            raise ConfigError("percentiles must lie in [0, 100]")
        for name in self.dist_names:
            make_distribution(name, self.dim)
        self.estimator_config()
        self.query_point()

    @classmethod
    def for_kind(cls, kind: str, **overrides) -> "ExperimentSpec":
        if kind not in DEFAULTS:
            raise ConfigError(f"unknown experiment {kind!r}; choose from {', '.join(KINDS)}")
        return cls(kind=kind, **{**DEFAULTS[kind], **overrides})

    @property
    def k(self) -> int:
        return self.dim if self.neurons is None else self.neurons

    @property
    def dist_names(self) -> list[str]:
        return [s.strip() for s in self.dist.split(",") if s.strip()]

    def single_dist(self):
        names = self.dist_names
        if len(names) != 1:
            raise ConfigError(f"{self.kind} takes exactly one distribution")
        return make_distribution(names[0], self.dim)

    def single_n(self) -> int:
        if len(self.n_list) != 1:
            raise ConfigError(f"{self.kind} takes exactly one sample size")
        return self.n_list[0]

    def estimator_config(self) -> EstimatorConfig:
        if self.bandwidth == "rule":
            return EstimatorConfig()
        try:
            h = float(self.bandwidth)
        except ValueError:
            raise ConfigError(f"bandwidth must be a number or 'rule', got {self.bandwidth!r}") from None
        if not h > 0:
            raise ConfigError("bandwidth must be positive")
        return EstimatorConfig(bandwidth=h)

    def query_point(self) -> np.ndarray | None:
        if self.query == "random":
            return None
        if self.query.startswith("fixed:"):
            try:
                x = np.array([float(v) for v in self.query[6:].split(",")])
            except ValueError:
                raise ConfigError(f"bad query coordinates {self.query!r}") from None
            if x.shape != (self.dim,):
                raise ConfigError(f"query point needs {self.dim} coordinates")
            return x
        raise ConfigError("query must be 'random' or 'fixed:<c1>,<c2>,...'")

    def loss_config(self, provider) -> LossConfig:
        return LossConfig(self.mu, self.lam, provider, self.sign)

    def as_pairs(self) -> list[tuple[str, str]]:
        out = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(_fmt(x) for x in v)
            elif v is None:
                v = "full" if f.name == "batch" else "auto"
            key = "lambda" if f.name == "lam" else f.name.replace("_", "-")
            out.append((key, _fmt(v) if not isinstance(v, str) else v))
        return out


@dataclass
class Result:
    header: list
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    ok: bool = True


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    return str(v)


def write_result(result: Result, spec: ExperimentSpec, stream=None) -> str:
    """Render ``result`` as CSV with ``# config:`` and ``# summary:`` comment blocks."""
    buf = io.StringIO()
    for key, value in spec.as_pairs():
        buf.write(f"# config: {key}={value}\n")
    buf.write(",".join(result.header) + "\n")
    for row in result.rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    for key, value in result.summary.items():
        buf.write(f"# summary: {key}={_fmt(value)}\n")
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def make_distribution(name: str, dim: int):
    if name == "gaussian":
        return Gaussian(dim)
    if name == "mixture":
        return GaussianMixture.symmetric(dim)
    if name == "laplace":
        return SymmetricExponential(dim)
    raise ConfigError(f"unknown distribution {name!r}; choose gaussian, mixture or laplace")


def trial_seed(master: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _workers() -> int:
    raw = os.environ.get("SCORE_LANDSCAPE_THREADS")
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            raise ConfigError("SCORE_LANDSCAPE_THREADS must be an integer") from None
    return cap


def _pool_map(fn: Callable, items: list) -> list:
    workers = min(_workers(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- score error

def _score_error_trial(args):
    dist, n, query, cfg, ss = args
    rng = np.random.default_rng(ss)
    X = dist.sample(n, rng)
    x = dist.sample(1, rng)[0] if query is None else query
    try:
        fit = local_fit(X, x, cfg)
    except EstimatorError:
        return None
    e2 = spectral_norm_matrix(assemble_score(fit.a1_hat, fit.A2_hat, 2) - score(dist, 2, x))
    e4 = frobenius_norm(assemble_score(fit.a1_hat, fit.A2_hat, 4) - score(dist, 4, x))
    return e2, e4


def run_score_error(spec: ExperimentSpec) -> Result:
    """Percentiles of the order-2 (spectral) and order-4 (Frobenius) errors per sample size."""
    dist = spec.single_dist()
    if isinstance(dist, SymmetricExponential):
        raise ConfigError("score-error needs orders 2 and 4; the Laplace law only provides order 4")
    cfg, query = spec.estimator_config(), spec.query_point()
    jobs = [(dist, n, query, cfg, trial_seed(spec.seed, i, j))
            for i, n in enumerate(spec.n_list) for j in range(spec.trials)]
    out = _pool_map(_score_error_trial, jobs)
    res = Result(["n", "order", "percentile", "error"])
    medians = {2: [], 4: []}
    for i, n in enumerate(spec.n_list):
        chunk = [r for r in out[i * spec.trials:(i + 1) * spec.trials] if r is not None]
        res.summary[f"failed_n{n}"] = spec.trials - len(chunk)
        if not chunk:
            medians[2].append(np.nan)
            medians[4].append(np.nan)
            continue
        errs = np.array(chunk)
        for col, order in ((0, 2), (1, 4)):
            for p in spec.percentiles:
                res.rows.append((n, order, p, float(np.percentile(errs[:, col], p))))
            medians[order].append(float(np.median(errs[:, col])))
    logn = np.log(spec.n_list)
    for order, med in medians.items():
        med = np.array(med)
        good = np.isfinite(med)
        slope = float(np.polyfit(logn[good], np.log(med[good]), 1)[0]) if good.sum() >= 2 else np.nan
        res.summary[f"slope_order{order}"] = slope
        res.summary[f"median_decreasing_order{order}"] = bool(np.all(np.diff(med) < 0))
    if not all(np.isfinite(res.summary[f"slope_order{o}"]) for o in (2, 4)):
        res.ok = False
    return res


# --------------------------------------------------------------- training runs

def _record(res: Result, method: str, traj) -> None:
    for it, err in zip(traj.iters, traj.param_error):
        res.rows.append((int(it), method, float(err)))


def _run_method(name, objective, init, tcfg, n, metric, callback=None):
    try:
        traj = train(objective, init, tcfg, n=n, metric=metric, callback=callback)
        return name, traj, None
    except NonFiniteLoss as exc:
        return name, exc.partial, exc.iteration


def _train_config(spec: ExperimentSpec, lr: float) -> TrainConfig:
    return TrainConfig(lr, spec.iters, spec.batch, _int_seed(trial_seed(spec.seed, 2)), spec.record_every)


def _l2_method(spec, data, teacher, init):
    state = {"w": np.ones(spec.k)}

    def refresh(A):
        try:
            state["w"] = recover_w(A, data, spec.activation)
        except RankDeficientDesign:
            pass

    def objective(A, idx=None):
        sub = data if idx is None else data.subset(idx)
        return loss_l2(A, state["w"], sub, spec.activation), grad_l2(A, state["w"], sub, spec.activation)

    def callback(t, A):
        if t % 100 == 0:
            refresh(A)

    return objective, callback


def _race(spec: ExperimentSpec, methods: dict, data, teacher, init) -> Result:
    metric = lambda A: param_error(A, teacher.A_star)
    jobs = []
    for name, (objective, callback, lr) in methods.items():
        jobs.append((name, objective, init, _train_config(spec, lr), data.n, metric, callback))
    results = _pool_map(lambda job: _run_method(*job), jobs)
    res = Result(["iter", "method", "param_error"])
    for name, traj, diverged_at in results:
        if traj is not None:
            _record(res, name, traj)
        if diverged_at is None:
            res.summary[f"final_{name}"] = float(traj.param_error[-1])
            res.summary[f"status_{name}"] = "ok"
        else:
            res.summary[f"final_{name}"] = np.nan
            res.summary[f"status_{name}"] = f"diverged_at_{diverged_at}"
            res.ok = False
    return res


def _setup(spec: ExperimentSpec):
    dist = spec.single_dist()
    n = spec.single_n()
    if spec.batch is not None and spec.batch > n:
        raise ConfigError(f"batch {spec.batch} exceeds the sample size {n}")
    teacher = TeacherNet(np.ones(spec.k), np.eye(spec.dim)[:spec.k], spec.activation, spec.noise_std)
    data = make_dataset(teacher, dist, n, _int_seed(trial_seed(spec.seed, 0)))
    init = random_init(spec.k, spec.dim, np.random.default_rng(trial_seed(spec.seed, 1)))
    return dist, teacher, data, init


def _check_square(spec):
    if spec.k != spec.dim:
        raise ConfigError("parameter error needs neurons == dim")


def run_landscape_race(spec: ExperimentSpec) -> Result:
    """Train the l2 baseline, the Gaussian-score loss and the matched-score loss from one init."""
    _check_square(spec)
    dist, teacher, data, init = _setup(spec)
    l2_obj, l2_cb = _l2_method(spec, data, teacher, init)
    methods = {
        "l2": (l2_obj, l2_cb, spec.lr_l2),
        "gaussian": (DesignedLoss(data, spec.loss_config(GaussianAssumed())), None, spec.lr),
        "designed": (DesignedLoss(data, spec.loss_config(AnalyticScores(dist))), None, spec.lr),
    }
    return _race(spec, methods, data, teacher, init)


def run_train_llsfe(spec: ExperimentSpec) -> Result:
    """Train the loss built from estimated scores against the Gaussian-score baseline."""
    _check_square(spec)
    _, teacher, data, init = _setup(spec)
    provider = EstimatedScores(spec.estimator_config())
    batch = ScoreTensorBatch.from_provider(provider, data.X)
    failed = batch.n_failed
    if failed > 0.01 * data.n:
        raise NumericalFailure(f"score estimation failed at {failed} of {data.n} samples")
    estimated = DesignedLoss(data, spec.loss_config(provider), batch)
    methods = {
        "llsfe": (estimated, None, spec.lr),
        "gaussian": (DesignedLoss(data, spec.loss_config(GaussianAssumed())), None, spec.lr),
    }
    res = _race(spec, methods, data, teacher, init)
    res.summary["estimator_failures"] = failed
    return res


# ------------------------------------------------------------ verification

def _score2_probe(dist, X, u, v):
    """Per-sample ``S_2(x)(u, v)``."""
    if isinstance(dist, GaussianMixture):
        p = mixture_posterior(X, dist)
        return (p * _score2_probe(Gaussian(dist.dim), X - dist.mu1, u, v)
                + (1 - p) * _score2_probe(Gaussian(dist.dim), X - dist.mu2, u, v))
    return (X @ u) * (X @ v) - u @ v


def _test_functions(d):
    """Polynomial test functions: value, Hessian probe and fourth-derivative probe ``(a, a, b, b)``."""
    u = np.ones(d) / np.sqrt(d)
    fns = {
        "square_e1": (
            lambda X: X[:, 0] ** 2,
            lambda X, a, b: np.full(len(X), 2.0 * a[0] * b[0]),
            lambda X, a, b: np.zeros(len(X)),
        ),
        "quartic_diag": (
            lambda X: (X @ u) ** 4,
            lambda X, a, b: 12.0 * (X @ u) ** 2 * (u @ a) * (u @ b),
            lambda X, a, b: np.full(len(X), 24.0 * (u @ a) ** 2 * (u @ b) ** 2),
        ),
    }
    if d >= 2:
        fns["cross_12"] = (
            lambda X: X[:, 0] ** 2 * X[:, 1] ** 2,
            lambda X, a, b: (2 * X[:, 1] ** 2 * a[0] * b[0] + 2 * X[:, 0] ** 2 * a[1] * b[1]
                             + 4 * X[:, 0] * X[:, 1] * (a[0] * b[1] + a[1] * b[0])),
            lambda X, a, b: np.full(len(X), 4.0 * (a[0] ** 2 * b[1] ** 2 + a[1] ** 2 * b[0] ** 2
                                                   + 4 * a[0] * a[1] * b[0] * b[1])),
        )
    return fns


def run_stein_check(spec: ExperimentSpec) -> Result:
    """z-scores of ``mean(g S_m - grad^m g)`` along probe directions; zero in expectation."""
    d = spec.dim
    probes = {"e1": np.eye(d)[0], "diag": np.ones(d) / np.sqrt(d)}
    pairs = [("e1", "e1"), ("diag", "diag"), ("e1", "diag")]
    res = Result(["dist", "function", "order", "probe", "z"])
    worst = 0.0
    for di, name in enumerate(spec.dist_names):
        dist = make_distribution(name, d)
        if isinstance(dist, SymmetricExponential):
            raise ConfigError("stein-check needs smooth densities (gaussian or mixture)")
        X = dist.sample(spec.mc_samples, np.random.default_rng(trial_seed(spec.seed, di)))
        U = np.stack([probes["e1"], probes["diag"]])
        C4 = _contractions(dist, X, U)          # S_4(x)(u_i, u_i, u_j, u_j)
        index = {"e1": 0, "diag": 1}
        for fname, (g, hess, d4) in _test_functions(d).items():
            gx = g(X)
            for a, b in pairs:
                pa, pb = probes[a], probes[b]
                for order in (2, 4):
                    if order == 2:
                        r = gx * _score2_probe(dist, X, pa, pb) - hess(X, pa, pb)
                        label = f"{a}.{b}"
                    else:
                        r = gx * C4[:, index[a], index[b]] - d4(X, pa, pb)
                        label = f"{a}.{a}.{b}.{b}"
                    sd = r.std(ddof=1)
                    z = 0.0 if sd == 0 else float(r.mean() / (sd / np.sqrt(len(r))))
                    worst = max(worst, abs(z))
                    res.rows.append((name, fname, order, label, z))
    res.summary["max_abs_z"] = worst
    return res


def _fd_grad(f, A, step=1e-5):
    g = np.zeros_like(A)
    for idx in np.ndindex(A.shape):
        E = np.zeros_like(A)
        E[idx] = step
        g[idx] = (f(A + E) - f(A - E)) / (2 * step)
    return g


def gradient_rel_error(g, fd) -> float:
    """Largest entrywise relative gap, floored so exact zeros do not blow up."""
    floor = 1e-8 * max(1.0, float(np.abs(g).max()))
    return float(np.max(np.abs(g - fd) / np.maximum(np.abs(g), floor)))


def run_grad_check(spec: ExperimentSpec) -> Result:
    """Analytic vs finite-difference gradients, then the population tensor form for a quartic teacher."""
    res = Result(["check", "case", "value", "threshold", "passed"])
    dist = spec.single_dist()
    n = spec.single_n()
    d, k = spec.dim, spec.k
    for t in range(spec.trials):
        rng = np.random.default_rng(trial_seed(spec.seed, 0, t))
        teacher = TeacherNet(rng.standard_normal(k), rng.standard_normal((k, d)), spec.activation, spec.noise_std)
        data = make_dataset(teacher, dist, n, _int_seed(trial_seed(spec.seed, 1, t)))
        cfg = spec.loss_config(AnalyticScores(dist))
        A = rng.standard_normal((k, d))
        g = grad_L(A, data, cfg.score_provider, cfg)
        fd = _fd_grad(lambda B: loss_L(B, data, cfg.score_provider, cfg), A)
        err = gradient_rel_error(g, fd)
        res.rows.append(("gradient", t, err, 1e-5, err < 1e-5))
    res.summary["max_gradient_rel_error"] = max(r[2] for r in res.rows)

    # quartic teacher: kappa_i = 24 w_i exactly, so the tensor form is the population loss
    rng = np.random.default_rng(trial_seed(spec.seed, 2))
    A_star = np.linalg.qr(rng.standard_normal((d, d)))[0][:k]
    teacher = TeacherNet(np.ones(k), A_star, "quartic")
    data = make_dataset(teacher, Gaussian(d), spec.mc_samples, _int_seed(trial_seed(spec.seed, 3)))
    kappa = TeacherStats(24.0 * teacher.w_star, np.zeros(k))
    cfg = LossConfig(spec.mu, spec.lam, GaussianAssumed(), 1.0)
    worst = 0.0
    for t in range(20):
        A = rng.standard_normal((k, d)) / np.sqrt(d)
        terms = sample_terms(A, data, GaussianAssumed(), cfg)
        reg = cfg.lam * float(np.sum((np.sum(A * A, axis=1) - 1.0) ** 2))
        boot = stats.bootstrap((terms,), np.mean, n_resamples=200, batch=20, method="percentile",
                               rng=np.random.default_rng(trial_seed(spec.seed, 4, t)))
        se = float(boot.standard_error)
        gap = abs(terms.mean() + reg - loss_tensor_form(A, teacher, kappa, cfg))
        ratio = gap / se
        worst = max(worst, ratio)
        res.rows.append(("tensor_form", t, ratio, 3.0, ratio < 3.0))
    res.summary["max_tensor_form_gap_in_se"] = worst
    res.summary["all_passed"] = all(r[4] for r in res.rows)
    return res


_RUNNERS = {
    "score-error": run_score_error,
    "landscape-race": run_landscape_race,
    "train-llsfe": run_train_llsfe,
    "stein-check": run_stein_check,
    "grad-check": run_grad_check,
}


def run(spec: ExperimentSpec) -> Result:
    return _RUNNERS[spec.kind](spec)
