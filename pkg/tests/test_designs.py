import numpy as np
import pytest

from bundlechoice import DesignSpec, InputError, TieError, simulate_design, true_choice_probability
from bundlechoice.designs import (_period_latents, bernoulli_pair_pmf, choice_probabilities_from_indexes,
                                  choose, correlated_bernoulli)


def test_choose_examples():
    assert choose(1.0, 0.5, 2.0) == (1, 1)
    assert choose(-1, -2, -3) == (0, 0)
    with pytest.raises(TieError):
        choose(0.0, -1, -1)


@pytest.fixture(scope="module")
def big1():
    return simulate_design(DesignSpec(1), 100_000, 123)


def test_design1_logistic_moments(big1):
    for x in (big1.x1[:, 0], big1.x2[:, 0]):
        assert abs(x.mean()) < 0.03
        assert abs(x.var() - np.pi ** 2 / 3) < 0.1


def test_design1_bernoulli_share(big1):
    for x in (big1.x1[:, 1], big1.x2[:, 1]):
        assert abs(x.mean() - 1 / 3) < 0.01


def test_eta_beta22_moments():
    _, _, eta = _period_latents(np.random.default_rng(5), DesignSpec(1), 100_000)
    assert abs(eta.mean() - 0.5) < 0.01
    assert abs(eta.var() - 0.05) < 0.005


def test_design2_error_correlation():
    e1, e2, _ = _period_latents(np.random.default_rng(7), DesignSpec(2), 100_000)
    assert abs(np.corrcoef(e1, e2)[0, 1] - 0.5) < 0.02


def test_correlated_bernoulli_pmf_exact():
    np.testing.assert_allclose(bernoulli_pair_pmf(1 / 3, 0.5), [5 / 9, 1 / 9, 1 / 9, 2 / 9])
    b = correlated_bernoulli(np.random.default_rng(0), 1 / 3, 0.5, 200_000, 2)
    assert abs(np.corrcoef(b.T)[0, 1] - 0.5) < 0.01
    assert abs(np.mean(b[:, 0] * b[:, 1]) - 2 / 9) < 0.005


@pytest.mark.parametrize("design", [1, 2, 3, 4])
def test_determinism(design):
    a = simulate_design(DesignSpec(design), 50, 9)
    b = simulate_design(DesignSpec(design), 50, 9)
    for f in ("x1", "x2", "w", "s", "d1", "d2"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    c = simulate_design(DesignSpec(design), 50, 10)
    assert not np.array_equal(a.x1, c.x1)


def test_panel_shapes():
    p = simulate_design(DesignSpec(3), 20, 0)
    assert p.t_periods == 2 and p.x1.shape == (20, 2, 2)


def test_small_n_error():
    with pytest.raises(InputError):
        simulate_design(DesignSpec(1), 1, 0)


def test_oracle_outside_option():
    p = choice_probabilities_from_indexes(DesignSpec(1), -100.0, -100.0, -100.0, 5000, 0)
    assert p[0] >= 0.999


def test_oracle_sums_to_one_and_symmetric():
    spec = DesignSpec(1)
    z = {"x1": [0.3, 1.0], "x2": [0.3, 1.0], "w": [0.5, -0.5], "s": [0.0]}
    n = 200_000
    p = true_choice_probability(spec, z, n, 1)
    assert abs(p.sum() - 1) < 1e-12 and np.all((p >= 0) & (p <= 1))
    se = np.sqrt(p[1] * (1 - p[1]) / n) + np.sqrt(p[2] * (1 - p[2]) / n)
    assert abs(p[1] - p[2]) < 2 * se + 1e-12


def test_oracle_monotone_in_own_index():
    spec = DesignSpec(1)
    lo = choice_probabilities_from_indexes(spec, 0.0, 0.3, 0.2, 100_000, 3)
    hi = choice_probabilities_from_indexes(spec, 5.0, 0.3, 0.2, 100_000, 3)
    assert hi[1] + hi[3] > hi[2] + hi[0]
    assert hi[1] + hi[3] > lo[1] + lo[3]


def test_oracle_monotone_grid():
    spec = DesignSpec(1)
    n = 50_000
    prev = None
    for u1 in np.linspace(-3, 3, 7):
        p = choice_probabilities_from_indexes(spec, u1, 0.0, 0.5, n, 11)
        both = p[1] + p[3]
        if prev is not None:
            assert both >= prev - 3 * np.sqrt(0.25 / n)
        prev = both


@pytest.mark.parametrize("design,fe", [(1, (0.0, 0.0, 0.0)), (2, (0.0, 0.0, 0.0)), (3, (0.4, -0.3, 0.2))])
def test_index_monotonicity_on_oracle(design, fe):
    from oracles import monotonicity_violations
    bad, checks = monotonicity_violations(DesignSpec(design), fixed_effects=fe)
    assert checks > 0 and bad == 0
