import numpy as np
import pytest
from sklearn.base import clone

from bundlechoice import DegenerateInputError, InputError, MLPProbability, NadarayaWatsonProbability, TrainingError
from bundlechoice.firststage import (MLPConfig, delta_p_hat, loss_and_grad, mlp_predict, mlp_train,
                                     n_params, nw_probability, _sizes)

from conftest import tiny_cross


def test_nw_all_ones():
    X = np.random.default_rng(0).normal(size=(20, 2))
    m = NadarayaWatsonProbability(kernel_order=2).fit(X, np.ones(20))
    np.testing.assert_allclose(m.predict(X[:3]), 1.0)


def test_nw_single_row():
    m = NadarayaWatsonProbability(kernel_order=2, bandwidths=1.0).fit([[0.3]], [1.0])
    assert m.predict([[0.0]])[0] == 1.0


def test_nw_equidistant():
    m = NadarayaWatsonProbability(kernel_order=4, bandwidths=[1.0, 1.0]).fit(
        [[-1.0, 1.0], [1.0, -1.0]], [1.0, 0.0])
    assert m.predict([[0.0, 0.0]])[0] == pytest.approx(0.5, abs=1e-14)


def test_nw_discrete_cell_frequency():
    X = np.array([[0], [0], [0], [1], [1]], dtype=float)
    y = np.array([1, 0, 1, 1, 0], dtype=float)
    m = NadarayaWatsonProbability(discrete_lambda=0.0, discrete_mask=[True]).fit(X, y)
    np.testing.assert_allclose(m.predict([[0.0], [1.0]]), [2 / 3, 0.5])


def test_nw_zero_weight():
    m = NadarayaWatsonProbability(discrete_lambda=0.0, discrete_mask=[True]).fit([[0.0], [1.0]], [1, 0])
    with pytest.raises(DegenerateInputError):
        m.predict([[2.0]])


def test_nw_clamped_range():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 2))
    y = (rng.random(60) < 0.5).astype(float)
    m = NadarayaWatsonProbability(kernel_order=6).fit(X, y)
    p = m.predict(rng.normal(size=(200, 2)) * 2)
    assert np.all((p >= 0) & (p <= 1))
    assert 0 <= m.clamp_rate(X) <= 1


def test_nw_probability_from_dataset():
    data = tiny_cross(n=30, seed=3)
    X, _ = data.features()
    p = sum(nw_probability(data, d, X[0]) for d in [(0, 0), (1, 0), (0, 1), (1, 1)])
    assert 0 < p


def test_delta_p_hat():
    X = np.random.default_rng(2).normal(size=(30, 1))
    y = (X[:, 0] > 0).astype(float)
    m = NadarayaWatsonProbability(kernel_order=2).fit(X, y)
    assert delta_p_hat(m, [0.3], [0.3]) == 0.0
    assert delta_p_hat(m, [0.3], [-0.5]) == pytest.approx(-delta_p_hat(m, [-0.5], [0.3]))
    ext = NadarayaWatsonProbability(kernel_order=2, bandwidths=0.01).fit([[0.0], [10.0]], [1.0, 0.0])
    assert delta_p_hat(ext, [0.0], [10.0]) == pytest.approx(1.0)


def test_mlp_zero_weights_half():
    m = MLPProbability(epochs=0, init_scale=0.0).fit(np.random.default_rng(0).normal(size=(5, 3)), np.zeros(5))
    np.testing.assert_array_equal(m.predict(np.random.default_rng(1).normal(size=(4, 3)) * 50), 0.5)


@pytest.mark.parametrize("trial", range(20))
def test_mlp_gradient_vs_finite_differences(trial):
    rng = np.random.default_rng(trial)
    n_in, n_out = int(rng.integers(1, 5)), int(rng.integers(1, 3))
    sizes = _sizes(n_in, (3, 3), n_out)
    theta = rng.uniform(-1, 1, n_params(sizes))
    X = rng.normal(size=(15, n_in))
    Y = (rng.random((15, n_out)) < 0.5).astype(float)
    _, g = loss_and_grad(theta, sizes, X, Y)
    fd = np.empty_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = 1e-5
        fd[j] = (loss_and_grad(theta + e, sizes, X, Y)[0] - loss_and_grad(theta - e, sizes, X, Y)[0]) / 2e-5
    rel = np.abs(g - fd) / np.maximum(np.abs(fd), 1e-6)
    assert rel.max() < 1e-5


def test_mlp_constant_fit():
    X = np.random.default_rng(0).normal(size=(40, 2))
    m = mlp_train(X, np.zeros(40), MLPConfig(epochs=5000))
    assert np.all(mlp_predict(m, X) < 0.05)


@pytest.mark.parametrize("solver", ["gd", "lbfgs"])
def test_mlp_learns_threshold(solver):
    X = np.random.default_rng(0).normal(size=(200, 1))
    y = (X[:, 0] > 0).astype(float)
    m = MLPProbability(epochs=3000, solver=solver).fit(X, y)
    p = m.predict(np.array([[-2.0], [2.0]]))
    assert p[0] < 0.2 and p[1] > 0.8


def test_mlp_deterministic_and_monotone():
    X = np.random.default_rng(3).normal(size=(30, 1))
    m = MLPProbability(epochs=10, seed=5).fit(X, (X[:, 0] > 0).astype(float))
    z = np.linspace(-3, 3, 50)[:, None]
    np.testing.assert_array_equal(m.predict(z), m.predict(z))
    # all-positive weights give a nondecreasing response
    m.theta_ = np.abs(m.theta_)
    assert np.all(np.diff(m.predict(z)) >= 0)


def test_mlp_dimension_mismatch_and_nonfinite(monkeypatch):
    m = MLPProbability(epochs=1).fit(np.zeros((4, 2)), np.zeros(4))
    with pytest.raises(InputError):
        m.predict(np.zeros((1, 3)))
    import bundlechoice.firststage as fs
    monkeypatch.setattr(fs, "loss_and_grad", lambda th, *a: (np.nan, np.zeros_like(th)))
    for solver in ("gd", "lbfgs"):
        with pytest.raises(TrainingError):
            MLPProbability(epochs=5, solver=solver).fit(np.zeros((4, 1)), np.ones(4))


def test_mlp_sklearn_clone_and_json():
    m = MLPProbability(hidden=(2, 2), epochs=5)
    assert clone(m).get_params() == m.get_params()
    m.fit(np.random.default_rng(0).normal(size=(6, 2)), np.ones(6))
    import json
    d = json.loads(m.to_json())
    assert d["sizes"] == [2, 2, 2, 1]
