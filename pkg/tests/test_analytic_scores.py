import itertools

import mpmath
import numpy as np
import pytest

from score_landscape.analytic_scores import (
    Gaussian,
    GaussianMixture,
    SymmetricExponential,
    gaussian_score,
    gaussian_t1,
    gaussian_t2,
    laplace_score4,
    mixture_posterior,
    mixture_score,
    score,
    weighted_score4_sum,
)
from score_landscape.tensor import contract, is_symmetric, outer, sym


def test_gaussian_score2_example():
    np.testing.assert_array_equal(gaussian_score(2, [1.0, 0.0]), [[0.0, 0.0], [0.0, -1.0]])


def test_gaussian_score1_is_x():
    np.testing.assert_array_equal(gaussian_score(1, [0.5, -2.0]), [0.5, -2.0])


def test_gaussian_score4_origin_1d():
    assert gaussian_score(4, [0.0]).item() == 3.0


def test_unsupported_order():
    with pytest.raises(ValueError):
        gaussian_score(3, [0.0, 1.0])


def test_gaussian_score4_symmetric(rng):
    assert is_symmetric(gaussian_score(4, rng.standard_normal(3)))


def test_gaussian_score4_stein_monte_carlo():
    # E[(a.x)^4 S_4(x)] = E[grad^4 (a.x)^4] = 24 a^{⊗4}; compare along two probes.
    rng = np.random.default_rng(7)
    d, n = 3, 100_000
    a = np.array([0.6, -0.3, 0.5])
    b = np.array([0.2, 0.7, -0.4])
    X = rng.standard_normal((n, d))
    g = (X @ a) ** 4
    for probe in ([a, a, a, a], [a, a, b, b]):
        vals = np.array([contract(gaussian_score(4, x), probe) for x in X[:20_000]])
        # cross-check the loop against the closed-form t-functions, then use those for all n
        t = gaussian_t2 if probe[2] is a else (lambda x, u: gaussian_t1(x, u, b))
        np.testing.assert_allclose(vals[:50], [t(x, a) for x in X[:50]], rtol=1e-10, atol=1e-10)
        full = np.array([t(x, a) for x in X]) * g
        target = 24.0 * contract(outer([a, a, a, a]), probe)
        z = (full.mean() - target) / (full.std(ddof=1) / np.sqrt(n))
        assert abs(z) < 3


def test_t_functions_at_origin():
    e1, e2 = np.eye(2)
    assert gaussian_t2(np.zeros(2), e1) == 3.0
    assert gaussian_t1(np.zeros(2), e1, e2) == 1.0


def test_t_functions_match_contractions(rng):
    for _ in range(20):
        x, u, v = rng.standard_normal((3, 5))
        S = gaussian_score(4, x)
        assert gaussian_t1(x, u, v) == pytest.approx(contract(S, [u, u, v, v]), abs=1e-10, rel=1e-10)
        assert gaussian_t2(x, u) == pytest.approx(contract(S, [u, u, u, u]), abs=1e-10, rel=1e-10)


def test_t_functions_dimension_mismatch():
    with pytest.raises(ValueError):
        gaussian_t2(np.zeros(2), np.zeros(3))


def test_mixture_degenerate_reduces_to_gaussian(rng):
    x = rng.standard_normal(3)
    dist = GaussianMixture(np.zeros(3), np.zeros(3), 0.3)
    for m in (1, 2, 4):
        np.testing.assert_allclose(mixture_score(m, x, dist), gaussian_score(m, x), atol=1e-13)


def test_mixture_posterior_on_symmetry_hyperplane():
    dist = GaussianMixture.symmetric(2)
    assert mixture_posterior(np.array([1.0, -1.0]), dist)[0] == pytest.approx(0.5, abs=1e-15)


def test_mixture_posterior_stable_far_away():
    dist = GaussianMixture.symmetric(2)
    p = mixture_posterior(np.array([[400.0, 400.0], [-400.0, -400.0]]), dist)
    np.testing.assert_array_equal(p, [1.0, 0.0])
    assert np.all(np.isfinite(mixture_score(4, np.array([400.0, 400.0]), dist)))


def test_mixture_weight_validated():
    with pytest.raises(ValueError):
        GaussianMixture(np.zeros(2), np.ones(2), 1.0)


def _mixture_density_mp(dist):
    mu1 = [mpmath.mpf(float(v)) for v in dist.mu1]
    mu2 = [mpmath.mpf(float(v)) for v in dist.mu2]
    p = mpmath.mpf(dist.weight)

    def f(*x):
        r1 = sum((xi - m) ** 2 for xi, m in zip(x, mu1))
        r2 = sum((xi - m) ** 2 for xi, m in zip(x, mu2))
        return p * mpmath.exp(-r1 / 2) + (1 - p) * mpmath.exp(-r2 / 2)

    return f


def test_mixture_score4_matches_finite_differences():
    mpmath.mp.dps = 50
    dist = GaussianMixture(np.array([1.0, 0.5]), np.array([-1.0, -0.8]), 0.4)
    f = _mixture_density_mp(dist)
    x = np.array([0.3, -0.2])
    xm = [mpmath.mpf(float(v)) for v in x]
    step = mpmath.mpf("1e-8")

    def nested(idx, point):
        if not idx:
            return f(*point)
        j, rest = idx[0], idx[1:]
        plus, minus = list(point), list(point)
        plus[j] += step
        minus[j] -= step
        return (nested(rest, plus) - nested(rest, minus)) / (2 * step)

    got = mixture_score(4, x, dist)
    f0 = f(*xm)
    for idx in itertools.combinations_with_replacement(range(2), 4):
        fd = float(nested(idx, xm) / f0)
        assert got[idx] == pytest.approx(fd, abs=1e-4)


def test_mixture_score_permutation_equivariant(rng):
    d = 3
    mu1, mu2, x = rng.standard_normal((3, d))
    perm = np.array([2, 0, 1])
    S = mixture_score(4, x, GaussianMixture(mu1, mu2, 0.35))
    Sp = mixture_score(4, x[perm], GaussianMixture(mu1[perm], mu2[perm], 0.35))
    np.testing.assert_allclose(Sp, S[np.ix_(perm, perm, perm, perm)], atol=1e-12)


def test_laplace_score4_examples():
    S = laplace_score4([1.0, -2.0])
    assert S[0, 0, 0, 1] == -1.0 and S[1, 1, 0, 0] == 1.0
    np.testing.assert_array_equal(laplace_score4([0.1, 3.0, 2.0]), np.ones((3, 3, 3, 3)))
    Z = laplace_score4([0.0, 1.0])
    assert np.all(Z[0] == 0) and np.all(Z[:, :, :, 0] == 0) and Z[1, 1, 1, 1] == 1.0


def test_score_dispatch():
    x = np.array([0.2, -0.4])
    np.testing.assert_array_equal(score(Gaussian(2), 2, x), gaussian_score(2, x))
    np.testing.assert_array_equal(score(SymmetricExponential(2), 4, x), laplace_score4(x))
    with pytest.raises(ValueError):
        score(SymmetricExponential(2), 2, x)


@pytest.mark.parametrize("dist", [Gaussian(3), GaussianMixture.symmetric(3), SymmetricExponential(3)],
                         ids=["gauss", "mix", "laplace"])
def test_weighted_sum_matches_per_sample_loop(dist, rng):
    X = dist.sample(30, rng)
    w = rng.standard_normal(30)
    loop = sum(wi * score(dist, 4, x) for wi, x in zip(w, X))
    np.testing.assert_allclose(weighted_score4_sum(dist, X, w), loop, atol=1e-10, rtol=1e-12)


def test_samplers_are_seeded():
    for dist in (Gaussian(2), GaussianMixture.symmetric(2), SymmetricExponential(2)):
        a = dist.sample(5, np.random.default_rng(3))
        b = dist.sample(5, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)


def test_logpdf_normalised():
    from scipy import integrate
    for dist in (Gaussian(1), GaussianMixture.symmetric(1), SymmetricExponential(1)):
        val, _ = integrate.quad(lambda t: np.exp(dist.logpdf(np.array([[t]]))[0]), -30, 30, points=[0.0])
        assert val == pytest.approx(1.0, abs=1e-8)
