"""First-stage choice-probability estimators for the LAD criteria.

Two regressors of the 0/1 choice indicators on covariates are provided: a
Nadaraya-Watson smoother with mixed continuous/discrete kernels and a small
sigmoid feed-forward network trained on the mean squared error with either
L-BFGS or plain full-batch gradient descent.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features, check_targets
from .exceptions import ConfigurationError, DegenerateInputError, InputError, TrainingError
from .kernels import gaussian_kernel, silverman_bandwidth


# ---------------------------------------------------------------------------
# Nadaraya-Watson
# ---------------------------------------------------------------------------

class NadarayaWatsonProbability(RegressorMixin, BaseEstimator):
    """Kernel regression of indicator targets with mixed kernels.

    Continuous columns use a Gaussian-based kernel of order ``kernel_order``
    with per-column Silverman bandwidths unless ``bandwidths`` is given;
    discrete columns use the Aitchison-Aitken kernel with smoothing
    ``discrete_lambda`` (default ``1/N``).  Predictions are clamped to
    ``[0, 1]``.
    """

    def __init__(self, kernel_order=4, bandwidths=None, discrete_lambda=None,
                 discrete_mask=None):
        self.kernel_order = kernel_order
        self.bandwidths = bandwidths
        self.discrete_lambda = discrete_lambda
        self.discrete_mask = discrete_mask

    def fit(self, X, y):
        X = check_features(X)
        self.y_1d_ = np.ndim(y) == 1
        y = check_targets(y, X.shape[0])
        n, k = X.shape
        mask = (np.zeros(k, dtype=bool) if self.discrete_mask is None
                else np.asarray(self.discrete_mask, dtype=bool))
        if mask.size != k:
            raise InputError(f"discrete_mask has {mask.size} entries, expected {k}")
        cont = np.flatnonzero(~mask)
        if self.bandwidths is None:
            h = np.array([silverman_bandwidth(X[:, j]) for j in cont])
        else:
            h = np.broadcast_to(np.asarray(self.bandwidths, dtype=float), cont.shape).copy()
            if np.any(h <= 0):
                raise ConfigurationError("bandwidths must be positive")
        lam = 1.0 / n if self.discrete_lambda is None else float(self.discrete_lambda)
        disc = np.flatnonzero(mask)
        ncat = np.array([np.unique(X[:, j]).size for j in disc], dtype=int)
        for c in ncat:
            if lam < 0 or (c >= 2 and lam > (c - 1) / c):
                raise ConfigurationError(f"discrete_lambda {lam} out of range")
        self.X_ = X
        self.y_ = y
        self.cont_ = cont
        self.disc_ = disc
        self.h_ = h
        self.lambda_ = lam
        self.ncat_ = ncat
        self.n_features_in_ = k
        return self

    def _weights(self, Z):
        Z = check_features(Z, self.n_features_in_)
        w = np.ones((Z.shape[0], self.X_.shape[0]))
        for j, h in zip(self.cont_, self.h_):
            w *= gaussian_kernel(self.kernel_order, (Z[:, j, None] - self.X_[None, :, j]) / h) / h
        for j, c in zip(self.disc_, self.ncat_):
            same = Z[:, j, None] == self.X_[None, :, j]
            off = self.lambda_ / (c - 1) if c >= 2 else 0.0
            w *= np.where(same, 1.0 - self.lambda_, off)
        return w

    def predict_raw(self, Z, chunk=2048):
        """Unclamped ratio of weighted sums; raises on zero total weight."""
        check_is_fitted(self, "X_")
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        out = []
        for a in range(0, Z.shape[0], chunk):
            w = self._weights(Z[a:a + chunk])
            tot = w.sum(axis=1)
            scale = np.abs(w).sum(axis=1)
            bad = ~(np.abs(tot) > 1e-300) | (scale == 0)
            if bad.any():
                raise DegenerateInputError(
                    f"zero total kernel weight at {int(bad.sum())} query point(s)")
            out.append((w @ self.y_) / tot[:, None])
        return np.vstack(out)

    def predict(self, Z):
        p = np.clip(self.predict_raw(Z), 0.0, 1.0)
        return p[:, 0] if self.y_1d_ else p

    def clamp_rate(self, Z):
        raw = self.predict_raw(Z)
        return float(np.mean((raw < 0) | (raw > 1)))


def nw_probability(data, d, z, bandwidths=None, discrete_lambda=None, kernel_order=4):
    """Kernel estimate of ``P(choice == d | Z = z)`` from a cross-sectional dataset."""
    from .data import OUTCOMES
    k = OUTCOMES.index(tuple(d))
    X, mask = data.features()
    model = NadarayaWatsonProbability(kernel_order, bandwidths, discrete_lambda, mask)
    model.fit(X, data.y[:, k])
    return float(model.predict(np.atleast_2d(z))[0])


def delta_p_hat(model, z_i, z_m, column=0):
    """Difference ``p(z_i) - p(z_m)`` of a fitted model's predictions."""
    p = np.atleast_2d(model.predict(np.vstack([np.atleast_2d(z_i), np.atleast_2d(z_m)])))
    if p.shape[0] != 2:
        p = p.T
    return float(p[0, column] - p[1, column])


# ---------------------------------------------------------------------------
# neural network
# ---------------------------------------------------------------------------

@dataclass
class MLPConfig:
    hidden: tuple = (3, 3)
    learning_rate: float = 0.5
    epochs: int = 5000
    init_scale: float = 0.5
    seed: int = 0
    solver: str = "gd"

    def __post_init__(self):
        if self.solver not in ("lbfgs", "gd"):
            raise ConfigurationError(f"unknown solver {self.solver!r}")
        self.hidden = tuple(int(h) for h in self.hidden)
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigurationError("hidden layer sizes must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be nonnegative")


def _sizes(n_in, hidden, n_out):
    return [n_in, *hidden, n_out]


def unpack(theta, sizes):
    """Split a flat parameter vector into ``[(W, b), ...]`` per layer."""
    layers, pos = [], 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        W = theta[pos:pos + a * b].reshape(a, b)
        pos += a * b
        layers.append((W, theta[pos:pos + b]))
        pos += b
    return layers


def n_params(sizes):
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def forward(theta, sizes, X):
    """Activations of every layer (input first)."""
    acts = [X]
    for W, b in unpack(theta, sizes):
        acts.append(special.expit(acts[-1] @ W + b))
    return acts


def loss_and_grad(theta, sizes, X, Y):
    """Mean squared error over rows and outputs and its gradient in ``theta``."""
    acts = forward(theta, sizes, X)
    out = acts[-1]
    diff = out - Y
    loss = float(np.mean(diff * diff))
    grad = np.empty_like(theta)
    delta = 2.0 * diff / diff.size * out * (1.0 - out)
    layers = unpack(theta, sizes)
    ends = np.cumsum([a * b + b for a, b in zip(sizes[:-1], sizes[1:])])
    for li in range(len(layers) - 1, -1, -1):
        W, _ = layers[li]
        a_prev = acts[li]
        start = ends[li] - (W.size + W.shape[1])
        grad[start:start + W.size] = (a_prev.T @ delta).ravel()
        grad[start + W.size:ends[li]] = delta.sum(axis=0)
        if li:
            delta = (delta @ W.T) * a_prev * (1.0 - a_prev)
    return loss, grad


class MLPProbability(RegressorMixin, BaseEstimator):
    """Sigmoid network regressing 0/1 targets on standardized features.

    The target may have several columns (one output unit each).  With
    ``solver="lbfgs"`` ``epochs`` caps the L-BFGS iterations; with ``"gd"``
    it is the number of gradient steps of size ``learning_rate``.
    """

    def __init__(self, hidden=(3, 3), learning_rate=0.5, epochs=5000, init_scale=0.5,
                 seed=0, standardize=True, solver="gd"):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.init_scale = init_scale
        self.seed = seed
        self.standardize = standardize
        self.solver = solver

    def _config(self):
        return MLPConfig(self.hidden, self.learning_rate, self.epochs, self.init_scale,
                         self.seed, self.solver)

    def fit(self, X, y):
        cfg = self._config()
        X = check_features(X)
        Y = check_targets(y, X.shape[0])
        self.y_1d_ = np.ndim(y) == 1
        if self.standardize:
            self.mean_ = X.mean(axis=0)
            sd = X.std(axis=0)
            self.scale_ = np.where(sd > 0, sd, 1.0)
        else:
            self.mean_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        Xs = (X - self.mean_) / self.scale_
        self.sizes_ = _sizes(X.shape[1], cfg.hidden, Y.shape[1])
        rng = np.random.default_rng(cfg.seed)
        theta = rng.uniform(-cfg.init_scale, cfg.init_scale, n_params(self.sizes_))
        if cfg.solver == "lbfgs":
            theta = self._lbfgs(theta, Xs, Y, cfg)
        else:
            for epoch in range(cfg.epochs):
                loss, grad = loss_and_grad(theta, self.sizes_, Xs, Y)
                if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                    raise TrainingError(f"non-finite loss {loss} at epoch {epoch}")
                theta -= cfg.learning_rate * grad
        self.theta_ = theta
        self.loss_ = float(loss_and_grad(theta, self.sizes_, Xs, Y)[0])
        self.n_features_in_ = X.shape[1]
        return self

    def _lbfgs(self, theta, Xs, Y, cfg):
        def fun(th):
            loss, grad = loss_and_grad(th, self.sizes_, Xs, Y)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingError(f"non-finite loss {loss}")
            return loss, grad

        res = optimize.minimize(fun, theta, jac=True, method="L-BFGS-B",
                                options={"maxiter": max(cfg.epochs, 1), "gtol": 1e-8,
                                         "ftol": 1e-12})
        self.n_iter_ = int(res.nit)
        return res.x

    def predict(self, X):
        check_is_fitted(self, "theta_")
        X = check_features(X, self.n_features_in_)
        out = forward(self.theta_, self.sizes_, (X - self.mean_) / self.scale_)[-1]
        return out[:, 0] if self.y_1d_ else out

    def to_json(self):
        check_is_fitted(self, "theta_")
        layers = unpack(self.theta_, self.sizes_)
        return json.dumps({
            "sizes": list(self.sizes_),
            "weights": [W.tolist() for W, _ in layers],
            "biases": [b.tolist() for _, b in layers],
            "mean": self.mean_.tolist(),
            "scale": self.scale_.tolist(),
            "training_loss": self.loss_,
        })


def mlp_train(features, targets, config=None):
    config = config or MLPConfig()
    model = MLPProbability(config.hidden, config.learning_rate, config.epochs,
                           config.init_scale, config.seed, solver=config.solver)
    return model.fit(features, targets)


def mlp_predict(model, z):
    return model.predict(np.atleast_2d(z))
