import numpy as np
import pytest

from bundlechoice import ConfigurationError, DEConfig, OptimizationError, de_minimize


def test_sphere():
    x, f, _ = de_minimize(lambda v: float(np.sum(v ** 2)),
                          DEConfig(max_generations=2000, bounds=[[-5, 5]] * 3))
    assert np.linalg.norm(x) < 1e-6


def test_shifted_parabola():
    x, _, _ = de_minimize(lambda v: float((v[0] - 2) ** 2), DEConfig(max_generations=300, bounds=[[-5, 5]]))
    assert abs(x[0] - 2) < 1e-8


def test_rosenbrock():
    def rosen(v):
        return float((1 - v[0]) ** 2 + 100 * (v[1] - v[0] ** 2) ** 2)
    x, _, _ = de_minimize(rosen, DEConfig(max_generations=1000, bounds=[[-2, 2]] * 2))
    assert np.max(np.abs(x - 1)) < 1e-3


def test_determinism_and_vectorized():
    cfg = DEConfig(max_generations=50, bounds=[[-3, 3]] * 2, seed=4)
    f = lambda v: float(np.abs(v).sum())
    a = de_minimize(f, cfg)
    b = de_minimize(f, cfg)
    c = de_minimize(lambda P: np.abs(P).sum(axis=1), cfg, vectorized=True)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[0], c[0])


def test_elitism_over_generations():
    f = lambda v: float(np.floor(4 * np.abs(v).sum()))   # piecewise constant
    vals = [de_minimize(f, DEConfig(max_generations=g, bounds=[[-5, 5]] * 3, seed=1))[1]
            for g in range(1, 40)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_feasibility():
    seen = []

    def f(v):
        seen.append(v.copy())
        return float(np.sum((v - 100) ** 2))   # optimum outside the box
    x, _, _ = de_minimize(f, DEConfig(max_generations=30, bounds=[[-1, 1]] * 2))
    arr = np.array(seen)
    assert arr.min() >= -1 and arr.max() <= 1
    np.testing.assert_allclose(x, [1, 1])


def test_nonfinite_rejected():
    def f(v):
        return np.nan if v[0] < 0 else float(v[0])
    x, fx, _ = de_minimize(f, DEConfig(max_generations=200, bounds=[[-1, 1]]))
    assert 0 <= x[0] < 1e-3 and np.isfinite(fx)


def test_all_nonfinite_raises():
    with pytest.raises(OptimizationError):
        de_minimize(lambda v: np.inf, DEConfig(max_generations=5, bounds=[[-1, 1]]))


def test_stall_stop():
    _, _, gens = de_minimize(lambda v: 0.0, DEConfig(max_generations=500, bounds=[[-1, 1]],
                                                     stall_generations=10))
    assert gens == 10


def test_config_validation():
    with pytest.raises(ConfigurationError):
        DEConfig(population_size=3)
    with pytest.raises(ConfigurationError):
        DEConfig(differential_weight=2.0)
    with pytest.raises(ConfigurationError):
        DEConfig(bounds=[[1, 1]]).resolved_bounds(1)
