import numpy as np
import pytest

from score_landscape.analytic_scores import Gaussian, SymmetricExponential
from score_landscape.teacher import (
    Dataset,
    NonSmoothActivation,
    TeacherNet,
    estimate_kappa,
    generate,
    get_activation,
    make_dataset,
    sample_input,
)


def test_gaussian_sample_mean_clt():
    n = 100_000
    X = sample_input(Gaussian(2), n, 1)
    assert np.all(np.abs(X.mean(axis=0)) < 5 / np.sqrt(n))


def test_laplace_mean_abs():
    n = 100_000
    X = sample_input(SymmetricExponential(3), n, 2)
    assert np.all(np.abs(np.abs(X).mean(axis=0) - 1.0) < 5 / np.sqrt(n))


def test_sample_input_deterministic():
    a = sample_input(Gaussian(4), 50, 7)
    b = sample_input(Gaussian(4), 50, 7)
    assert a.tobytes() == b.tobytes()
    with pytest.raises(ValueError):
        sample_input(Gaussian(2), 0, 1)


def test_generate_hand_values():
    t = TeacherNet([1.0], [[1.0, 0.0]], "relu")
    assert generate(t, [[2.0, -1.0]]).tolist() == [2.0]
    assert generate(t, [[-2.0, 5.0]]).tolist() == [0.0]


def test_generate_matches_loop(rng):
    t = TeacherNet([0.7, -1.3], rng.standard_normal((2, 3)), "softplus")
    X = rng.standard_normal((40, 3))
    loop = [sum(w * np.logaddexp(0.0, a @ x) for w, a in zip(t.w_star, t.A_star)) for x in X]
    np.testing.assert_allclose(generate(t, X), loop, atol=1e-12, rtol=0)


def test_generate_noise_is_seeded():
    t = TeacherNet.identity(2, "relu", noise_std=0.5)
    X = np.zeros((10_000, 2))
    y1, y2 = generate(t, X, 3), generate(t, X, 3)
    assert y1.tobytes() == y2.tobytes()
    assert abs(y1.std() - 0.5) < 0.02
    assert abs(y1.mean()) < 5 * 0.5 / 100


def test_teacher_validation():
    with pytest.raises(ValueError):
        TeacherNet(np.ones(3), np.eye(3)[:, :2])
    with pytest.raises(ValueError):
        TeacherNet(np.ones(2), [[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ValueError):
        TeacherNet(np.ones(1), [[1.0]], noise_std=-1.0)
    with pytest.raises(ValueError):
        TeacherNet(np.ones(1), [[1.0]], activation="tanh")
    with pytest.raises(ValueError):
        generate(TeacherNet.identity(2), np.zeros((3, 5)))


def test_make_dataset_reproducible():
    t = TeacherNet.identity(3, "relu", noise_std=0.1)
    a = make_dataset(t, Gaussian(3), 64, seed=4)
    b = make_dataset(t, Gaussian(3), 64, seed=4)
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()
    assert a.n == 64 and a.d == 3


def test_dataset_shape_check():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(4))


def test_dataset_csv_roundtrip(tmp_path, rng):
    data = Dataset(rng.standard_normal((6, 3)), rng.standard_normal(6), seed=1)
    path = tmp_path / "data.csv"
    data.to_csv(path)
    assert path.read_text().splitlines()[0] == "x_0,x_1,x_2,y"
    back = Dataset.from_csv(path)
    assert back.X.tobytes() == data.X.tobytes() and back.y.tobytes() == data.y.tobytes()


def test_kappa_quartic_exact():
    t = TeacherNet([2.0, -0.5], np.eye(3)[:2], "quartic")
    stats = estimate_kappa(t, Gaussian(3), 10_000, seed=0)
    np.testing.assert_array_equal(stats.kappa, [48.0, -12.0])
    np.testing.assert_array_equal(stats.stderr, 0.0)


def test_kappa_zero_weight():
    t = TeacherNet([0.0], [[1.0, 0.0]], "softplus")
    assert estimate_kappa(t, Gaussian(2), 10_000, seed=0).kappa.tolist() == [0.0]


def test_kappa_softplus_stable_across_seeds():
    t = TeacherNet([1.0], [[1.0, 0.0]], "softplus")
    a = estimate_kappa(t, Gaussian(2), 100_000, seed=1)
    b = estimate_kappa(t, Gaussian(2), 100_000, seed=2)
    assert abs(a.kappa[0] - b.kappa[0]) < 3 * np.hypot(a.stderr[0], b.stderr[0])


def test_kappa_softplus_matches_quadrature():
    from scipy import integrate
    from scipy.stats import norm

    d4 = get_activation("softplus").d4f
    exact = integrate.quad(lambda t: d4(t) * norm.pdf(t), -np.inf, np.inf)[0]
    stats = estimate_kappa(TeacherNet([1.0], [[1.0, 0.0]], "softplus"), Gaussian(2), 200_000, seed=3)
    assert abs(stats.kappa[0] - exact) < 4 * stats.stderr[0]


def test_softplus_fourth_derivative_by_differences():
    act = get_activation("softplus")
    t = np.linspace(-3, 3, 7)
    h = 1e-2
    f = act.f
    fd = (f(t + 2 * h) - 4 * f(t + h) + 6 * f(t) - 4 * f(t - h) + f(t - 2 * h)) / h**4
    np.testing.assert_allclose(act.d4f(t), fd, atol=1e-4)


def test_kappa_rejects_relu_and_small_budget():
    with pytest.raises(NonSmoothActivation):
        estimate_kappa(TeacherNet.identity(2, "relu"), Gaussian(2), 10_000)
    with pytest.raises(ValueError):
        estimate_kappa(TeacherNet.identity(2, "softplus"), Gaussian(2), 100)
