"""Least-absolute-deviations estimation from sign predictions.

For each alternative ``d`` the three index differences (own-alternative
indexes for both goods and the bundle index) predict the sign of the change
in ``P(choice == d)``.  The loss compares those predictions with a first-stage
estimate of the probability change; all four alternatives are summed.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _fast
from ._validation import check_dataset
from .data import OUTCOMES, ParamVector
from .exceptions import (BundleChoiceError, EstimationError, InputError)
from .firststage import MLPProbability, NadarayaWatsonProbability
from .mrc import _seed_int, refit_bootstrap
from .optimizer import DEConfig, de_minimize
from .results import EstimationResult


def indicators(dx1, dx2, dw, d):
    """``(I_plus, I_minus)`` for alternative ``d`` given the three index changes.

    Inequalities are weak, so an index exactly at zero satisfies both signs.
    """
    k = OUTCOMES.index(tuple(int(v) for v in d))
    u = (dx1, dx2, dw)
    out = []
    for row in _fast.LAD_PATTERNS[k]:
        out.append(int(all(v >= 0 if sg > 0 else v <= 0 for v, sg in zip(u, row))))
    return tuple(out)


def lad_loss(ind, delta_p):
    """Loss 2 for a prediction strictly contradicted by ``delta_p``, else 0.

    A zero change agrees with either predicted sign.
    """
    ip, im = ind
    return 2.0 * float((ip and delta_p < 0) or (im and delta_p > 0))


def lad_loss_debiased(ind, delta_p_hat):
    ip, im = ind
    dp = float(delta_p_hat)
    if not -1.0 <= dp <= 1.0:
        raise InputError(f"probability difference {dp} outside [-1, 1]")
    return (abs(ip - dp) + abs(im + dp)) * (ip + im) + (1.0 - (ip + im))


@dataclass
class LADPairs:
    """Covariate differences and first-stage probability changes per pair.

    ``dp[:, k]`` is the estimated change in the probability of
    ``OUTCOMES[k]``.  ``table`` caches the summed loss per strict sign
    configuration of the three indexes.
    """

    x1: np.ndarray
    x2: np.ndarray
    w: np.ndarray
    s: np.ndarray
    dp: np.ndarray
    use: np.ndarray = None
    table: np.ndarray = None

    def __post_init__(self):
        self.x1, self.x2, self.w, self.s, self.dp = (
            np.ascontiguousarray(a, dtype=float) for a in (self.x1, self.x2, self.w, self.s, self.dp))
        if np.any(np.abs(self.dp) > 1.0):
            raise InputError("probability differences must lie in [-1, 1]")
        self.use = (np.ones(4, dtype=bool) if self.use is None
                    else np.asarray(self.use, dtype=bool))
        if self.table is None:
            self.table = _fast.lad_table(self.dp, self.use)
        self.z = np.ascontiguousarray(np.hstack([self.x1, self.x2, self.w, self.s]))

    @property
    def n(self):
        return self.dp.shape[0]

    def evaluate(self, pop, est_rho_b):
        """Criterion for each full parameter row ``(beta, gamma, rho1, rho2[, rho_b])``."""
        return _fast.lad_sum(self.x1, self.x2, self.w, self.s, self.dp, pop, est_rho_b,
                             self.use)

    def evaluate_free(self, free, est_rho_b):
        """Criterion for rows of free coordinates (leading coefficients pinned to 1)."""
        kernel = _fast.lad_kernel(self.x1.shape[1], self.w.shape[1], self.s.shape[1],
                                  bool(est_rho_b))
        free = np.atleast_2d(np.ascontiguousarray(free, dtype=float))
        return kernel(self.z, self.dp, self.table, free, self.use, _fast.LAD_PATTERNS)


def _full_row(theta):
    parts = [theta.beta, theta.gamma, theta.rho1, theta.rho2]
    if theta.estimate_rho_b:
        parts.append(theta.rho_b)
    return np.concatenate(parts)


def _use_mask(alternatives):
    if alternatives is None:
        return np.ones(4, dtype=bool)
    use = np.zeros(4, dtype=bool)
    for d in alternatives:
        use[OUTCOMES.index(tuple(d))] = True
    return use


def cross_pairs(data, p_hat, alternatives=None):
    """All pairs ``i < m`` with ``dp = p_hat[i] - p_hat[m]``."""
    p_hat = np.asarray(p_hat, dtype=float)
    if p_hat.shape != (data.n, 4):
        raise InputError(f"p_hat must have shape ({data.n}, 4)")
    i, m = np.triu_indices(data.n, k=1)
    return LADPairs(data.x1[i] - data.x1[m], data.x2[i] - data.x2[m], data.w[i] - data.w[m],
                    data.s[i] - data.s[m], p_hat[i] - p_hat[m], _use_mask(alternatives))


def _predict4(models, Z):
    """Stack per-alternative predictions into an ``(n, 4)`` array."""
    if hasattr(models, "predict"):
        out = np.asarray(models.predict(Z), dtype=float)
    else:
        out = np.column_stack([np.asarray(m.predict(Z), dtype=float).reshape(len(Z), -1)[:, 0]
                               for m in models])
    if out.ndim != 2 or out.shape[1] != 4:
        raise InputError("probability models must yield one column per alternative")
    return np.clip(out, 0.0, 1.0)


def lad_objective_cross(data, theta, prob_models, alternatives=None):
    """Summed debiased loss over pairs ``i < m`` and alternatives.

    ``prob_models`` is either one fitted model predicting all four choice
    probabilities from ``data.features()`` or a list of four single-output
    models in the order of :data:`OUTCOMES`.
    """
    z, _ = data.features()
    pairs = cross_pairs(data, _predict4(prob_models, z), alternatives)
    return float(pairs.evaluate(_full_row(theta), theta.estimate_rho_b)[0])


def panel_features(data, t, s):
    """Agent covariates of periods ``t`` and ``s`` side by side."""
    def period(k):
        return np.hstack([data.x1[:, k], data.x2[:, k], data.w[:, k], data.s[:, k]])
    return np.hstack([period(t), period(s)])


def _panel_dp(models, feats):
    """``(n, 4)`` changes ``p_t - p_s`` from per-alternative two-output models."""
    cols = []
    for m in models:
        out = np.clip(np.asarray(m.predict(feats), dtype=float), 0.0, 1.0)
        if out.ndim != 2 or out.shape[1] != 2:
            raise InputError("panel probability models must return two columns (t, s)")
        cols.append(out[:, 0] - out[:, 1])
    return np.column_stack(cols)


def panel_pairs(data, prob_models, alternatives=None):
    """Within-agent period pairs ``t > s``.

    ``prob_models`` maps each period pair ``(t, s)`` to four fitted models
    (one per alternative) returning ``[P(Y_dt = 1), P(Y_ds = 1)]`` given the
    covariates of both periods.  A plain list is accepted for two periods.
    """
    use = _use_mask(alternatives)
    parts = []
    for t, s in data.period_pairs():
        models = prob_models[(t, s)] if isinstance(prob_models, dict) else prob_models
        dp = _panel_dp(models, panel_features(data, t, s))
        parts.append((data.x1[:, t] - data.x1[:, s], data.x2[:, t] - data.x2[:, s],
                      data.w[:, t] - data.w[:, s], data.s[:, t] - data.s[:, s], dp))
    stacked = [np.concatenate(col) for col in zip(*parts)]
    return LADPairs(*stacked, use)


def lad_objective_panel(data, theta, prob_models, alternatives=None):
    pairs = panel_pairs(data, prob_models, alternatives)
    return float(pairs.evaluate(_full_row(theta), theta.estimate_rho_b)[0])


def default_lad_de_config():
    """DE settings for LAD: stop after 60 generations without improvement."""
    return DEConfig(max_generations=300, stall_generations=60)


def minimize_lad(pairs, template, de_config, seed):
    """DE over the free coordinates of ``template``; returns ``(theta, value)``."""
    n_free = template.free().size
    est_rb = template.estimate_rho_b
    if not est_rb and np.any(template.rho_b != 0):
        raise EstimationError("a fixed nonzero rho_b is not supported; estimate it instead")

    def objective(free):
        return pairs.evaluate_free(free, est_rb)

    x, f, _ = de_minimize(objective, de_config.with_seed(seed), dim=n_free, vectorized=True)
    return template.with_free(x), f


def _template(data, estimate_rho_b):
    return ParamVector(np.ones(data.k1), np.ones(data.k2), np.zeros(data.k3),
                       np.zeros(data.k3), np.zeros(data.k3), estimate_rho_b=estimate_rho_b)


class _LADBase(BaseEstimator):
    method = "lad"

    def free_names(self):
        check_is_fitted(self, "params_")
        return self.params_.free_names()

    def free_estimate(self):
        check_is_fitted(self, "params_")
        return self.params_.free()

    def transform(self, data):
        """Fitted indexes ``(X1'b + S'rho1, X2'b + S'rho2, W'r + S'rho_b)``."""
        check_is_fitted(self, "params_")
        p = self.params_
        return np.stack([data.x1 @ p.beta + data.s @ p.rho1,
                         data.x2 @ p.beta + data.s @ p.rho2,
                         data.w @ p.gamma + data.s @ p.rho_b], axis=-1)

    def result(self):
        check_is_fitted(self, "params_")
        return EstimationResult(
            method=self.method, names=self.free_names(), estimate=self.free_estimate(),
            params=self.params_, criterion={"lad": self.criterion_},
            seeds={"seed": self.seed}, diagnostics=dict(self.diagnostics_),
        )


class LADEstimator(_LADBase):
    """Cross-sectional LAD with a Nadaraya-Watson first stage.

    ``alternatives`` restricts the loss to a subset of outcomes (all four by
    default).  ``estimate_rho_b`` adds the bundle coefficient on the common
    regressors to the free vector.
    """

    method = "lad"

    def __init__(self, kernel_order=4, discrete_lambda=None, de_config=None, seed=0,
                 estimate_rho_b=False, alternatives=None):
        self.kernel_order = kernel_order
        self.discrete_lambda = discrete_lambda
        self.de_config = de_config
        self.seed = seed
        self.estimate_rho_b = estimate_rho_b
        self.alternatives = alternatives

    def fit(self, data, y=None):
        data = check_dataset(data, panel=False)
        z, mask = data.features()
        try:
            nw = NadarayaWatsonProbability(self.kernel_order, None, self.discrete_lambda, mask)
            nw.fit(z, data.y)
            p_hat = nw.predict(z)
            clamp = nw.clamp_rate(z)
        except BundleChoiceError as exc:
            raise EstimationError(f"first stage (kernel regression) failed: {exc}") from exc
        pairs = cross_pairs(data, p_hat, self.alternatives)
        de = self.de_config or default_lad_de_config()
        theta, f = minimize_lad(pairs, _template(data, self.estimate_rho_b), de,
                                _seed_int(np.random.SeedSequence(self.seed)))
        self.first_stage_ = nw
        self.params_ = theta
        self.criterion_ = f
        self.diagnostics_ = {"first_stage": "nadaraya-watson", "clamp_rate": clamp,
                             "bandwidths": nw.h_, "n_pairs": pairs.n}
        return self


class PanelLADEstimator(_LADBase):
    """Panel LAD with a small neural-network first stage per alternative."""

    method = "panel-lad"

    def __init__(self, hidden=(3, 3), learning_rate=0.5, epochs=2000, solver="lbfgs",
                 de_config=None, seed=0, estimate_rho_b=False, alternatives=None):
        self.hidden = hidden
        self.solver = solver
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.de_config = de_config
        self.seed = seed
        self.estimate_rho_b = estimate_rho_b
        self.alternatives = alternatives

    def fit(self, data, y=None):
        data = check_dataset(data, panel=True)
        net_seed, de_seed = np.random.SeedSequence(self.seed).spawn(2)
        models, losses = {}, {}
        try:
            for t, s in data.period_pairs():
                feats = panel_features(data, t, s)
                models[(t, s)] = []
                for k in range(4):
                    target = np.column_stack([data.y[:, t, k], data.y[:, s, k]])
                    net = MLPProbability(self.hidden, self.learning_rate, self.epochs,
                                         seed=_seed_int(net_seed.spawn(1)[0]),
                                         solver=self.solver)
                    net.fit(feats, target)
                    models[(t, s)].append(net)
                    losses[f"{t}{s}_{k}"] = net.loss_
        except BundleChoiceError as exc:
            raise EstimationError(f"first stage (neural network) failed: {exc}") from exc
        pairs = panel_pairs(data, models, self.alternatives)
        de = self.de_config or default_lad_de_config()
        theta, f = minimize_lad(pairs, _template(data, self.estimate_rho_b), de,
                                _seed_int(de_seed))
        self.first_stage_ = models
        self.params_ = theta
        self.criterion_ = f
        self.diagnostics_ = {"first_stage": "neural-network", "training_loss": losses,
                             "n_pairs": pairs.n}
        return self


def estimate_lad(data, estimator=None):
    """Fit the LAD estimator matching the data layout and return its result."""
    if estimator is None:
        estimator = PanelLADEstimator() if data.__class__.__name__ == "PanelDataset" else LADEstimator()
    return estimator.fit(data).result()


def bootstrap_lad(data, estimator=None, B=99, seed=0, level=0.95):
    """Percentile bootstrap by refitting both stages on agent resamples."""
    if estimator is None:
        estimator = PanelLADEstimator() if data.__class__.__name__ == "PanelDataset" else LADEstimator()
    return refit_bootstrap(data, estimator, B, seed, level=level)
