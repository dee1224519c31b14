"""Two-step localized maximum rank correlation for cross-sectional data.

Step one estimates the alternative-specific coefficients ``beta`` by
kernel-matching pairs of agents on the other alternative's covariates and on
the bundle covariates; step two estimates the bundle coefficients ``gamma``
by matching on the fitted indexes ``X_j' beta_hat``.  First coordinates of
both vectors are normalized to one.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _fast
from ._pairs import match_weight, per_column, prune
from ._validation import check_bootstrap_count, check_dataset
from .data import OUTCOMES, ParamVector
from .exceptions import EstimationError
from .kernels import BandwidthSpec, bandwidth, gaussian_kernel, sample_std
from .optimizer import DEConfig, de_minimize
from .results import EstimationResult, EtaTestResult, percentile_ci


# ---------------------------------------------------------------------------
# bandwidths
# ---------------------------------------------------------------------------

def stage1_bandwidths(data, c1=1.0):
    """Per-column matching bandwidths ``{"x1", "x2", "w"}`` for step one."""
    spec = BandwidthSpec(c1, "cross_stage1")
    return {
        "x1": np.atleast_1d(bandwidth(data.n, sample_std(data.x1), spec)),
        "x2": np.atleast_1d(bandwidth(data.n, sample_std(data.x2), spec)),
        "w": np.atleast_1d(bandwidth(data.n, sample_std(data.w), spec)),
    }


def stage2_bandwidths(data, beta_hat, c2=2.0):
    """Bandwidths ``(sigma_1, sigma_2)`` for the two fitted indexes."""
    spec = BandwidthSpec(c2, "cross_stage2")
    v = np.column_stack([data.x1 @ beta_hat, data.x2 @ beta_hat])
    return np.atleast_1d(bandwidth(data.n, sample_std(v), spec))


def _h_dict(h, data):
    if isinstance(h, dict):
        return {"x1": per_column(h["x1"], data.k1, "x1"),
                "x2": per_column(h["x2"], data.k1, "x2"),
                "w": per_column(h["w"], data.k2, "w")}
    return {"x1": per_column(h, data.k1, "x1"), "x2": per_column(h, data.k1, "x2"),
            "w": per_column(h, data.k2, "w")}


# ---------------------------------------------------------------------------
# pair arrays
# ---------------------------------------------------------------------------

def beta_pairs(data, h, kernel_order=6, prune_tol=1e-12):
    """Pair arrays ``(dx, val)`` with step-one criterion ``sum val * sgn(dx @ b)``.

    Summing the alternative-specific terms over the four outcomes leaves the
    coefficient ``2 (d1_i - d1_m)`` on the first-alternative term and
    ``2 (d2_i - d2_m)`` on the second.
    """
    h = _h_dict(h, data)
    i, m = np.triu_indices(data.n, 1)
    disc_x, disc_w = data.x_discrete, data.w_discrete
    parts_dx, parts_val = [], []
    for own, other, dvec, h_other in (
        (data.x1, data.x2, data.d1, h["x2"]),
        (data.x2, data.x1, data.d2, h["x1"]),
    ):
        coef = 2.0 * (dvec[i].astype(float) - dvec[m])
        sel = coef != 0.0
        ii, mm = i[sel], m[sel]
        # exact matches on discrete columns first, cheaply
        for j in np.flatnonzero(disc_x):
            ok = other[ii, j] == other[mm, j]
            ii, mm = ii[ok], mm[ok]
        for j in np.flatnonzero(disc_w):
            ok = data.w[ii, j] == data.w[mm, j]
            ii, mm = ii[ok], mm[ok]
        diffs = np.hstack([other[ii] - other[mm], data.w[ii] - data.w[mm]])
        w = match_weight(diffs, np.concatenate([h_other, h["w"]]),
                         np.concatenate([disc_x, disc_w]), kernel_order)
        parts_dx.append(own[ii] - own[mm])
        parts_val.append(w * 2.0 * (dvec[ii].astype(float) - dvec[mm]))
    dx = np.vstack(parts_dx)
    val = np.concatenate(parts_val)
    return prune(dx, val, prune_tol)


def gamma_pairs(data, beta_hat, sigma, kernel_order=4, prune_tol=1e-12):
    """Pair arrays for step two: ``val = K K (Y11_i - Y11_m)``, ``dx = W_i - W_m``."""
    sigma = per_column(sigma, 2, "sigma")
    beta_hat = np.asarray(beta_hat, dtype=float)
    y11 = ((data.d1 == 1) & (data.d2 == 1)).astype(float)
    i, m = np.triu_indices(data.n, 1)
    coef = y11[i] - y11[m]
    sel = coef != 0.0
    i, m, coef = i[sel], m[sel], coef[sel]
    v1 = data.x1 @ beta_hat
    v2 = data.x2 @ beta_hat
    w = (gaussian_kernel(kernel_order, (v1[i] - v1[m]) / sigma[0])
         * gaussian_kernel(kernel_order, (v2[i] - v2[m]) / sigma[1]) / (sigma[0] * sigma[1]))
    return prune(data.w[i] - data.w[m], w * coef, prune_tol)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def mrc_beta_objective(data, b, h, kernel_order=6, prune_tol=1e-12):
    """Step-one rank criterion at ``b`` (sum over unordered pairs)."""
    dx, val = beta_pairs(data, h, kernel_order, prune_tol)
    return _fast.signsum(dx, val, np.asarray(b, dtype=float))


def mrc_gamma_objective(data, r, beta_hat, sigma, kernel_order=4, prune_tol=1e-12):
    """Step-two rank criterion at ``r`` given ``beta_hat``."""
    dx, val = gamma_pairs(data, beta_hat, sigma, kernel_order, prune_tol)
    return _fast.signsum(dx, val, np.asarray(r, dtype=float))


def _sgn(x):
    return 1.0 if x > 0 else -1.0


def mrc_beta_objective_naive(data, b, h, kernel_order=6):
    """Literal triple loop over pairs and outcomes; reference for testing."""
    h = _h_dict(h, data)
    b = np.asarray(b, dtype=float)
    y = data.y
    disc = np.concatenate([data.x_discrete, data.w_discrete])
    total = 0.0
    for i in range(data.n - 1):
        for m in range(i + 1, data.n):
            ka = match_weight(np.concatenate([data.x2[i] - data.x2[m], data.w[i] - data.w[m]])[None],
                              np.concatenate([h["x2"], h["w"]]), disc, kernel_order)[0]
            kb = match_weight(np.concatenate([data.x1[i] - data.x1[m], data.w[i] - data.w[m]])[None],
                              np.concatenate([h["x1"], h["w"]]), disc, kernel_order)[0]
            sa = _sgn((data.x1[i] - data.x1[m]) @ b)
            sb = _sgn((data.x2[i] - data.x2[m]) @ b)
            for k, (d1, d2) in enumerate(OUTCOMES):
                dy = y[m, k] - y[i, k]
                total += ka * dy * sa * (-1) ** d1 + kb * dy * sb * (-1) ** d2
    return total


def mrc_gamma_objective_naive(data, r, beta_hat, sigma, kernel_order=4):
    sigma = per_column(sigma, 2, "sigma")
    r = np.asarray(r, dtype=float)
    y11 = data.y[:, 3]
    total = 0.0
    for i in range(data.n - 1):
        for m in range(i + 1, data.n):
            dv1 = (data.x1[i] - data.x1[m]) @ beta_hat
            dv2 = (data.x2[i] - data.x2[m]) @ beta_hat
            k = (gaussian_kernel(kernel_order, dv1 / sigma[0]) / sigma[0]
                 * gaussian_kernel(kernel_order, dv2 / sigma[1]) / sigma[1])
            total += k * (y11[i] - y11[m]) * _sgn((data.w[i] - data.w[m]) @ r)
    return total


# ---------------------------------------------------------------------------
# maximization
# ---------------------------------------------------------------------------

def maximize_signsum(dx, val, k, de_config, seed, indicator=False, what="criterion",
                     refine=True):
    """Maximize ``sum val * g(dx @ b)`` over ``b = (1, free)``; returns ``(b, value)``."""
    if val.size == 0:
        raise EstimationError(f"{what} is identically zero: no informative pairs")
    if k == 1:
        b = np.ones(1)
        return b, float(_fast.signsum(dx, val, b, indicator))

    if k == 2:
        line = _fast.SignSumLine(dx, val, indicator)

        def negative(pop):
            return -line(pop[:, 0])
    else:
        def negative(pop):
            full = np.hstack([np.ones((pop.shape[0], 1)), pop])
            return -_fast.signsum(dx, val, full, indicator)

    x, f, gens = de_minimize(negative, de_config.with_seed(seed), dim=k - 1, vectorized=True)
    if k == 2 and refine:
        # one free coordinate: the step function is tabulated, so polish the
        # search result to the centre of the best cell
        lo, hi = de_config.resolved_bounds(1)[0]
        t, v = line.best_cell(lo, hi, x[0])
        if v >= -f:
            x, f = np.array([t]), -v
    return np.concatenate([[1.0], x]), -f


def default_de_config():
    return DEConfig()


def _seed_int(seq):
    return int(seq.generate_state(1)[0])


class MRCEstimator(TransformerMixin, BaseEstimator):
    """Localized MRC estimator of ``(beta, gamma)``.

    Parameters mirror the tuning choices: kernel orders and bandwidth
    constants per step, the differential-evolution settings and the pruning
    threshold for negligible pair weights.  ``transform`` returns the fitted
    indexes ``(X1' beta, X2' beta, W' gamma)``.
    """

    def __init__(self, stage1_order=6, stage2_order=4, c1=1.0, c2=2.0, de_config=None,
                 seed=0, prune_tol=1e-12):
        self.stage1_order = stage1_order
        self.stage2_order = stage2_order
        self.c1 = c1
        self.c2 = c2
        self.de_config = de_config
        self.seed = seed
        self.prune_tol = prune_tol

    def fit(self, data, y=None):
        data = check_dataset(data, panel=False)
        de = self.de_config or default_de_config()
        s1, s2 = np.random.SeedSequence(self.seed).spawn(2)
        h = stage1_bandwidths(data, self.c1)
        dx, val = beta_pairs(data, h, self.stage1_order, self.prune_tol)
        beta, l1 = maximize_signsum(dx, val, data.k1, de, _seed_int(s1),
                                    what="step-one criterion")
        sigma = stage2_bandwidths(data, beta, self.c2)
        dx, val = gamma_pairs(data, beta, sigma, self.stage2_order, self.prune_tol)
        gamma, l2 = maximize_signsum(dx, val, data.k2, de, _seed_int(s2),
                                     what="step-two criterion")
        self.beta_, self.gamma_ = beta, gamma
        self.h_, self.sigma_ = h, sigma
        self.criterion_ = {"beta": l1, "gamma": l2}
        self.n_features_in_ = data.k1
        return self

    def transform(self, data):
        check_is_fitted(self, "beta_")
        return np.column_stack([data.x1 @ self.beta_, data.x2 @ self.beta_, data.w @ self.gamma_])

    @property
    def params_(self):
        check_is_fitted(self, "beta_")
        return ParamVector(self.beta_, self.gamma_)

    def free_names(self):
        return ([f"beta_{j + 1}" for j in range(1, self.beta_.size)]
                + [f"gamma_{j + 1}" for j in range(1, self.gamma_.size)])

    def free_estimate(self):
        return np.concatenate([self.beta_[1:], self.gamma_[1:]])

    def result(self):
        check_is_fitted(self, "beta_")
        return EstimationResult(
            method="mrc", names=self.free_names(), estimate=self.free_estimate(),
            params=self.params_, criterion=dict(self.criterion_),
            bandwidths={"h": self.h_, "sigma": self.sigma_}, seeds={"seed": self.seed},
        )


def _is_fitted(est):
    try:
        check_is_fitted(est)
    except Exception:
        return False
    return True


def estimate_mrc(data, estimator=None):
    est = MRCEstimator() if estimator is None else estimator
    return est.fit(data).result()


def bootstrap_mrc(data, estimator=None, B=99, seed=0, indices=None, level=0.95):
    """Nonparametric bootstrap: re-run both steps on ``B`` resamples.

    Bandwidths are recomputed from each resample.  ``indices`` may supply the
    resample row indices explicitly (one row per draw).  Draws whose
    criterion is degenerate are dropped and counted.
    """
    data = check_dataset(data, panel=False)
    est = MRCEstimator() if estimator is None else estimator
    return refit_bootstrap(data, est, B, seed, indices, level)


def refit_bootstrap(data, est, B=99, seed=0, indices=None, level=0.95):
    """Percentile bootstrap for any estimator here by refitting on row resamples."""
    base = est.result() if _is_fitted(est) else est.fit(data).result()
    if indices is None:
        B = check_bootstrap_count(B)
        children = np.random.SeedSequence(seed).spawn(B)
        indices = [np.random.default_rng(c).integers(0, data.n, data.n) for c in children]
    else:
        indices = [np.asarray(ix) for ix in indices]
        check_bootstrap_count(len(indices))
    draws, failed = [], 0
    for b, idx in enumerate(indices):
        sub = type(est)(**{**est.get_params(), "seed": _seed_int(
            np.random.SeedSequence([seed, b, 7]))})
        try:
            sub.fit(data.take(idx))
        except EstimationError:
            failed += 1
            continue
        draws.append(sub.free_estimate())
    if not draws:
        raise EstimationError("every bootstrap draw was degenerate")
    draws = np.array(draws)
    base.draws = draws
    base.ci = percentile_ci(draws, level)
    base.n_failed_draws = failed
    base.seeds["bootstrap"] = seed
    return base


# ---------------------------------------------------------------------------
# interaction test
# ---------------------------------------------------------------------------

def eta_pair_matrix(data, beta_hat, gamma_hat, sigma, kernel_order=4):
    """``M[i, m] = K K (Y11_i - Y11_m) sgn(W_im' gamma)`` with the bandwidth scaling."""
    sigma = per_column(sigma, 2, "sigma")
    v1 = data.x1 @ beta_hat
    v2 = data.x2 @ beta_hat
    k = (gaussian_kernel(kernel_order, (v1[:, None] - v1[None, :]) / sigma[0])
         * gaussian_kernel(kernel_order, (v2[:, None] - v2[None, :]) / sigma[1]))
    y11 = data.y[:, 3]
    wg = data.w @ gamma_hat
    sg = np.where(wg[:, None] - wg[None, :] > 0, 1.0, -1.0)
    m = k * (y11[:, None] - y11[None, :]) * sg / (sigma[0] * sigma[1])
    np.fill_diagonal(m, 0.0)
    return m


def eta_statistic(data, beta_hat, gamma_hat, sigma, kernel_order=4):
    """Average over ordered pairs ``i != m`` of the kernel-weighted sign agreement."""
    n = data.n
    return float(eta_pair_matrix(data, beta_hat, gamma_hat, sigma, kernel_order).sum()
                 / (n * (n - 1)))


def eta_test_cross(data, beta_hat, gamma_hat, sigma=None, B=99, seed=0, kernel_order=4,
                   c2=2.0, alpha=0.05):
    """Bootstrap lower confidence bound for the interaction statistic.

    ``beta_hat`` and ``gamma_hat`` are held fixed across resamples.  Evidence
    for a non-degenerate interaction is reported iff the ``alpha`` quantile of
    the bootstrap statistics is positive.
    """
    data = check_dataset(data, panel=False)
    B = check_bootstrap_count(B)
    beta_hat = np.asarray(beta_hat, dtype=float)
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    if sigma is None:
        sigma = stage2_bandwidths(data, beta_hat, c2)
    mat = eta_pair_matrix(data, beta_hat, gamma_hat, sigma, kernel_order)
    n = data.n
    stat = float(mat.sum() / (n * (n - 1)))
    rng = np.random.default_rng(seed)
    draws = np.empty(B)
    for b in range(B):
        idx = rng.integers(0, n, n)
        draws[b] = mat[np.ix_(idx, idx)].sum() / (n * (n - 1))
    q = float(np.quantile(draws, alpha))
    return EtaTestResult(stat, q, q > 0.0, draws)


def _fold_split(n, seed):
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[: n // 2]), np.sort(perm[n // 2:])


def eta_test_cross_fit(data, estimator=None, B=99, seed=0, alpha=0.05):
    """Interaction test with the index coefficients estimated out of fold.

    Agents are split in two halves.  Each half's statistic is evaluated at
    estimates from the other half, so under no interaction it is centred at
    zero rather than pushed up by the in-sample maximization.  The reported
    statistic and bootstrap draws average the two halves.
    """
    data = check_dataset(data, panel=False)
    B = check_bootstrap_count(B)
    est = MRCEstimator() if estimator is None else estimator
    folds = _fold_split(data.n, seed)
    rng = np.random.default_rng([seed, 1])
    stats, draws = [], np.zeros(B)
    for k in range(2):
        ev, tr = data.take(folds[k]), data.take(folds[1 - k])
        fit = type(est)(**est.get_params()).fit(tr)
        sigma = stage2_bandwidths(ev, fit.beta_, est.c2)
        mat = eta_pair_matrix(ev, fit.beta_, fit.gamma_, sigma, est.stage2_order)
        n = ev.n
        stats.append(mat.sum() / (n * (n - 1)))
        for b in range(B):
            idx = rng.integers(0, n, n)
            draws[b] += mat[np.ix_(idx, idx)].sum() / (n * (n - 1)) / 2.0
    q = float(np.quantile(draws, alpha))
    return EtaTestResult(float(np.mean(stats)), q, q > 0.0, draws)
