"""Localized maximum score for panels with fixed effects.

Within-agent changes between periods ``t > s`` are kernel-matched so that
only agents whose other covariates barely move contribute; the fixed
effects drop out of the differences.  Inference uses the numerical
bootstrap, which perturbs the criterion by a damped resampling increment.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _fast
from ._pairs import match_weight, per_column
from ._validation import check_bootstrap_count, check_dataset
from .data import OUTCOMES, ParamVector
from .exceptions import ConfigurationError, EstimationError, InputError
from .kernels import BandwidthSpec, bandwidth, gaussian_kernel, sample_std
from .mrc import _seed_int, default_de_config, maximize_signsum
from .results import EstimationResult, EtaTestResult, percentile_ci


def panel_bandwidths(data, c3=2.0):
    """Per-column bandwidths ``{"x1", "x2", "w"}``.

    The kernel is applied to within-agent changes, so the scale of each
    matching variable is the standard deviation of its changes over all
    period pairs.
    """
    spec = BandwidthSpec(c3, "panel")

    def changes(a):
        d = np.concatenate([a[:, t] - a[:, s] for t, s in data.period_pairs()])
        return np.atleast_1d(bandwidth(data.n, sample_std(d), spec))

    return {"x1": changes(data.x1), "x2": changes(data.x2), "w": changes(data.w)}


def _h_dict(h, data):
    if isinstance(h, dict):
        return {key: per_column(h[key], k, key)
                for key, k in (("x1", data.k1), ("x2", data.k1), ("w", data.k2))}
    return {key: per_column(h, k, key)
            for key, k in (("x1", data.k1), ("x2", data.k1), ("w", data.k2))}


@dataclass
class PanelPairs:
    """Within-agent period-pair terms: criterion ``sum val * g(dx @ b)``.

    ``agent`` maps every term to its agent so that per-agent summands can be
    reweighted by resampling counts.
    """

    dx: np.ndarray
    val: np.ndarray
    agent: np.ndarray
    n_agents: int

    def pruned(self, tol):
        keep = self.val != 0.0
        if keep.any() and tol > 0:
            keep &= np.abs(self.val) >= tol * np.abs(self.val[keep]).max()
        return PanelPairs(np.ascontiguousarray(self.dx[keep]),
                          np.ascontiguousarray(self.val[keep]), self.agent[keep], self.n_agents)

    def weighted(self, agent_weights):
        return np.ascontiguousarray(self.val * agent_weights[self.agent])


def beta_pairs(data, h, kernel_order=2, prune_tol=1e-12):
    """Step-one terms; coefficients ``2 (d1_t - d1_s)`` and ``2 (d2_t - d2_s)``."""
    h = _h_dict(h, data)
    disc = np.concatenate([data.x_discrete, data.w_discrete])
    dxs, vals, agents = [], [], []
    ids = np.arange(data.n)
    for t, s in data.period_pairs():
        dx1 = data.x1[:, t] - data.x1[:, s]
        dx2 = data.x2[:, t] - data.x2[:, s]
        dw = data.w[:, t] - data.w[:, s]
        for own, other, dvec, h_other in ((dx1, dx2, data.d1, h["x2"]),
                                          (dx2, dx1, data.d2, h["x1"])):
            coef = 2.0 * (dvec[:, t].astype(float) - dvec[:, s])
            w = match_weight(np.hstack([other, dw]), np.concatenate([h_other, h["w"]]),
                             disc, kernel_order)
            dxs.append(own)
            vals.append(w * coef)
            agents.append(ids)
    pairs = PanelPairs(np.vstack(dxs), np.concatenate(vals), np.concatenate(agents), data.n)
    return pairs.pruned(prune_tol)


def gamma_pairs(data, sigma, kernel_order=2, prune_tol=1e-12):
    """Step-two terms, matched on the covariate changes of both alternatives."""
    s_ = _h_dict(sigma, data)
    disc = np.concatenate([data.x_discrete, data.x_discrete])
    dxs, vals, agents = [], [], []
    y11 = data.y[..., 3]
    for t, s in data.period_pairs():
        diffs = np.hstack([data.x1[:, t] - data.x1[:, s], data.x2[:, t] - data.x2[:, s]])
        w = match_weight(diffs, np.concatenate([s_["x1"], s_["x2"]]), disc, kernel_order)
        dxs.append(data.w[:, t] - data.w[:, s])
        vals.append(w * (y11[:, t] - y11[:, s]))
        agents.append(np.arange(data.n))
    pairs = PanelPairs(np.vstack(dxs), np.concatenate(vals), np.concatenate(agents), data.n)
    return pairs.pruned(prune_tol)


def ms_beta_objective(data, b, h, kernel_order=2, prune_tol=1e-12):
    p = beta_pairs(data, h, kernel_order, prune_tol)
    return _fast.signsum(p.dx, p.val, np.asarray(b, dtype=float))


def ms_gamma_objective(data, r, sigma, kernel_order=2, prune_tol=1e-12):
    p = gamma_pairs(data, sigma, kernel_order, prune_tol)
    return _fast.signsum(p.dx, p.val, np.asarray(r, dtype=float))


def _sgn(x):
    return 1.0 if x > 0 else -1.0


def _kprod(diffs, h, disc, order):
    out = 1.0
    for v, hh, dd in zip(diffs, h, disc):
        out *= float(v == 0.0) if dd else gaussian_kernel(order, v / hh) / hh
    return out


def ms_beta_objective_naive(data, b, h, kernel_order=2):
    """Literal sum over agents, period pairs and outcomes."""
    h = _h_dict(h, data)
    b = np.asarray(b, dtype=float)
    y = data.y
    disc = np.concatenate([data.x_discrete, data.w_discrete])
    total = 0.0
    for i in range(data.n):
        for t, s in data.period_pairs():
            dx1 = data.x1[i, t] - data.x1[i, s]
            dx2 = data.x2[i, t] - data.x2[i, s]
            dw = data.w[i, t] - data.w[i, s]
            ka = _kprod(np.concatenate([dx2, dw]), np.concatenate([h["x2"], h["w"]]),
                        disc, kernel_order)
            kb = _kprod(np.concatenate([dx1, dw]), np.concatenate([h["x1"], h["w"]]),
                        disc, kernel_order)
            for k, (d1, d2) in enumerate(OUTCOMES):
                dy = y[i, s, k] - y[i, t, k]
                total += (ka * dy * _sgn(dx1 @ b) * (-1) ** d1
                          + kb * dy * _sgn(dx2 @ b) * (-1) ** d2)
    return total


def ms_gamma_objective_naive(data, r, sigma, kernel_order=2):
    s_ = _h_dict(sigma, data)
    r = np.asarray(r, dtype=float)
    y11 = data.y[..., 3]
    disc = np.concatenate([data.x_discrete, data.x_discrete])
    total = 0.0
    for i in range(data.n):
        for t, s in data.period_pairs():
            diffs = np.concatenate([data.x1[i, t] - data.x1[i, s], data.x2[i, t] - data.x2[i, s]])
            k = _kprod(diffs, np.concatenate([s_["x1"], s_["x2"]]), disc, kernel_order)
            total += k * (y11[i, t] - y11[i, s]) * _sgn((data.w[i, t] - data.w[i, s]) @ r)
    return total


class PanelMSEstimator(TransformerMixin, BaseEstimator):
    """Two-step localized maximum score estimator for panels.

    ``transform`` returns per-period fitted indexes with shape (N, T, 3).
    """

    def __init__(self, kernel_order=2, c3=2.0, de_config=None, seed=0, prune_tol=1e-12):
        self.kernel_order = kernel_order
        self.c3 = c3
        self.de_config = de_config
        self.seed = seed
        self.prune_tol = prune_tol

    def fit(self, data, y=None):
        data = check_dataset(data, panel=True)
        de = self.de_config or default_de_config()
        s1, s2 = np.random.SeedSequence(self.seed).spawn(2)
        h = panel_bandwidths(data, self.c3)
        pb = beta_pairs(data, h, self.kernel_order, self.prune_tol)
        beta, l1 = maximize_signsum(pb.dx, pb.val, data.k1, de, _seed_int(s1),
                                    what="step-one criterion (no informative switchers)")
        pg = gamma_pairs(data, h, self.kernel_order, self.prune_tol)
        gamma, l2 = maximize_signsum(pg.dx, pg.val, data.k2, de, _seed_int(s2),
                                     what="step-two criterion (no informative switchers)")
        self.beta_, self.gamma_, self.h_ = beta, gamma, h
        self.criterion_ = {"beta": l1, "gamma": l2}
        self.pairs_ = (pb, pg)
        sw = (data.choice != data.choice[:, :1]).any(axis=1)
        self.n_switchers_ = int(sw.sum())
        return self

    def transform(self, data):
        check_is_fitted(self, "beta_")
        return np.stack([data.x1 @ self.beta_, data.x2 @ self.beta_, data.w @ self.gamma_],
                        axis=-1)

    def free_names(self):
        return ([f"beta_{j + 1}" for j in range(1, self.beta_.size)]
                + [f"gamma_{j + 1}" for j in range(1, self.gamma_.size)])

    def free_estimate(self):
        return np.concatenate([self.beta_[1:], self.gamma_[1:]])

    def result(self):
        check_is_fitted(self, "beta_")
        return EstimationResult(
            method="panel-ms", names=self.free_names(), estimate=self.free_estimate(),
            params=ParamVector(self.beta_, self.gamma_), criterion=dict(self.criterion_),
            bandwidths={"h": self.h_, "sigma": self.h_}, seeds={"seed": self.seed},
            diagnostics={"switchers": self.n_switchers_},
        )


def estimate_panel_ms(data, estimator=None):
    est = PanelMSEstimator() if estimator is None else estimator
    return est.fit(data).result()


# ---------------------------------------------------------------------------
# numerical bootstrap
# ---------------------------------------------------------------------------

def epsilon_rule(n, k1, k2, rule="simulation", c4=2.0):
    """Perturbation sizes ``(eps1, eps2)``.

    ``"simulation"``: ``c4 N^(-5/7) log(N)^(-5/14)`` for both.  ``"rate"``:
    ``eps1 = c4 N^(-(k+2)/(k+3)) log(N)^(-k/(2k+6))`` with ``k = k1 + k2`` and
    ``eps2 = c4 N^(-(2k1+2)/(2k1+3)) log(N)^(-k1/(2k1+3))``.
    """
    if n < 2:
        raise InputError("epsilon rules need N >= 2")
    ln = np.log(n)
    if rule == "simulation":
        e = c4 * n ** (-5.0 / 7.0) * ln ** (-5.0 / 14.0)
        return e, e
    if rule == "rate":
        k = k1 + k2
        e1 = c4 * n ** (-(k + 2.0) / (k + 3.0)) * ln ** (-k / (2.0 * k + 6.0))
        e2 = c4 * n ** (-(2.0 * k1 + 2.0) / (2.0 * k1 + 3.0)) * ln ** (-k1 / (2.0 * k1 + 3.0))
        return e1, e2
    raise ConfigurationError(f"unknown epsilon rule {rule!r}")


@dataclass
class NumericalBootstrapSpec:
    """Settings of the numerical bootstrap.

    ``epsilon1``/``epsilon2`` override the rule when given.  ``ci_method``
    is ``"rescaled"`` (quantiles of ``(N eps)^(-1/3) (theta* - theta_hat)``
    reflected around the estimate) or ``"percentile"`` (raw draws).
    """

    epsilon1: float = None
    epsilon2: float = None
    rule: str = "simulation"
    c4: float = 2.0
    B: int = 99
    seed: int = 0
    ci_method: str = "rescaled"
    level: float = 0.95

    def __post_init__(self):
        for e in (self.epsilon1, self.epsilon2):
            if e is not None and not 0.0 < e <= 1.0:
                raise ConfigurationError("epsilon must lie in (0, 1]")
        if self.ci_method not in ("rescaled", "percentile"):
            raise ConfigurationError(f"unknown ci_method {self.ci_method!r}")
        if self.rule not in ("simulation", "rate"):
            raise ConfigurationError(f"unknown epsilon rule {self.rule!r}")

    def epsilons(self, n, k1, k2):
        e1, e2 = epsilon_rule(n, k1, k2, self.rule, self.c4)
        return (self.epsilon1 or e1), (self.epsilon2 or e2)


def agent_weights(counts, eps):
    """Per-agent weights ``1/N + sqrt(N eps) (count - 1) / N`` of the perturbed criterion."""
    counts = np.asarray(counts, dtype=float)
    n = counts.size
    return 1.0 / n + np.sqrt(n * eps) * (counts - 1.0) / n


def perturbed_objective(pairs, counts, eps, b, center):
    """Numerical-bootstrap criterion at ``b`` in recentred indicator form.

    Equals ``N^-1 sum phi_i(b) + sqrt(N eps) [N^-1 sum phi*_i(b) - N^-1 sum phi_i(b)]``
    where ``phi_i`` is agent ``i``'s summand recentred at ``center``.
    """
    val = pairs.weighted(agent_weights(counts, eps))
    b = np.asarray(b, dtype=float)
    return (_fast.signsum(pairs.dx, val, b, indicator=True)
            - _fast.signsum(pairs.dx, val, np.asarray(center, dtype=float), indicator=True))


def phi_mean(pairs, b, center):
    """``N^-1 sum_i phi_i(b)`` for the agents behind ``pairs``."""
    val = pairs.val / pairs.n_agents
    return (_fast.signsum(pairs.dx, val, np.asarray(b, dtype=float), indicator=True)
            - _fast.signsum(pairs.dx, val, np.asarray(center, dtype=float), indicator=True))


def _ci(theta_hat, draws, n, eps, spec):
    if spec.ci_method == "percentile":
        return percentile_ci(draws, spec.level)
    a = (1.0 - spec.level) / 2.0
    scale = (n * np.asarray(eps)) ** (-1.0 / 3.0)
    dev = draws - theta_hat
    lo = theta_hat - scale * np.quantile(dev, 1.0 - a, axis=0)
    hi = theta_hat - scale * np.quantile(dev, a, axis=0)
    return np.column_stack([lo, hi])


def numerical_bootstrap(data, estimator=None, spec=None):
    """Numerical-bootstrap draws and confidence intervals for ``(beta, gamma)``.

    Bandwidths are those of the point estimate; each draw resamples agents
    and maximizes the perturbed criteria for both steps.
    """
    data = check_dataset(data, panel=True)
    spec = spec or NumericalBootstrapSpec()
    B = check_bootstrap_count(spec.B)
    est = PanelMSEstimator() if estimator is None else estimator
    if not hasattr(est, "beta_"):
        est.fit(data)
    pb, pg = est.pairs_
    beta_hat, gamma_hat = est.beta_, est.gamma_
    n = data.n
    e1, e2 = spec.epsilons(n, data.k1, data.k2)
    de = est.de_config or default_de_config()
    children = np.random.SeedSequence(spec.seed).spawn(B)
    draws = []
    failed = 0
    for child in children:
        rng = np.random.default_rng(child)
        counts = np.bincount(rng.integers(0, n, n), minlength=n)
        s1, s2 = _seed_int(child.spawn(2)[0]), _seed_int(child.spawn(2)[1])
        try:
            b, _ = maximize_signsum(pb.dx, pb.weighted(agent_weights(counts, e1)), data.k1,
                                    de, s1, indicator=True)
            r, _ = maximize_signsum(pg.dx, pg.weighted(agent_weights(counts, e2)), data.k2,
                                    de, s2, indicator=True)
        except EstimationError:
            failed += 1
            continue
        draws.append(np.concatenate([b[1:], r[1:]]))
    if not draws:
        raise EstimationError("every bootstrap draw was degenerate")
    draws = np.array(draws)
    theta = est.free_estimate()
    eps = np.concatenate([np.full(data.k1 - 1, e1), np.full(data.k2 - 1, e2)])
    res = est.result()
    res.draws = draws
    res.ci = _ci(theta, draws, n, eps, spec)
    res.n_failed_draws = failed
    res.seeds["bootstrap"] = spec.seed
    res.diagnostics.update({"epsilon1": e1, "epsilon2": e2, "ci_method": spec.ci_method})
    return res


# ---------------------------------------------------------------------------
# interaction test
# ---------------------------------------------------------------------------

def eta_agent_terms(data, gamma_hat, sigma, kernel_order=2):
    """Per-agent contributions to the step-two criterion (sgn form) at ``gamma_hat``."""
    p = gamma_pairs(data, sigma, kernel_order, prune_tol=0.0)
    s = np.where(p.dx @ np.asarray(gamma_hat, dtype=float) > 0, 1.0, -1.0)
    return np.bincount(p.agent, weights=p.val * s, minlength=data.n)


def eta_test_panel(data, gamma_hat, sigma=None, B=99, seed=0, kernel_order=2, c3=2.0,
                   alpha=0.05):
    """Bootstrap lower bound for ``N^-1`` times the step-two criterion at ``gamma_hat``."""
    data = check_dataset(data, panel=True)
    B = check_bootstrap_count(B)
    if sigma is None:
        sigma = panel_bandwidths(data, c3)
    terms = eta_agent_terms(data, gamma_hat, sigma, kernel_order)
    n = data.n
    stat = float(terms.sum() / n)
    rng = np.random.default_rng(seed)
    draws = np.array([terms[rng.integers(0, n, n)].sum() / n for _ in range(B)])
    q = float(np.quantile(draws, alpha))
    return EtaTestResult(stat, q, q > 0.0, draws)


def eta_test_panel_cross_fit(data, estimator=None, B=99, seed=0, alpha=0.05):
    """Panel interaction test with ``gamma`` estimated on the other half of the agents."""
    from .mrc import _fold_split

    data = check_dataset(data, panel=True)
    B = check_bootstrap_count(B)
    est = PanelMSEstimator() if estimator is None else estimator
    folds = _fold_split(data.n, seed)
    rng = np.random.default_rng([seed, 1])
    stats, draws = [], np.zeros(B)
    for k in range(2):
        ev, tr = data.take(folds[k]), data.take(folds[1 - k])
        fit = type(est)(**est.get_params()).fit(tr)
        terms = eta_agent_terms(ev, fit.gamma_, panel_bandwidths(ev, est.c3), est.kernel_order)
        n = ev.n
        stats.append(terms.sum() / n)
        for b in range(B):
            draws[b] += terms[rng.integers(0, n, n)].sum() / n / 2.0
    q = float(np.quantile(draws, alpha))
    return EtaTestResult(float(np.mean(stats)), q, q > 0.0, draws)
