"""Random-utility data-generating processes for bundle choice.

Four reference designs are provided.  Designs 1 and 2 are cross-sectional
(two alternative-specific covariates per alternative, two bundle covariates,
one common regressor); Designs 3 and 4 are two-period panels with fixed
effects built from the first covariates.  Designs 2 and 4 add correlation
between covariates and errors.  Utilities are

    U(1,0) = X1'beta + S'rho1 [+ alpha1] + eps1
    U(0,1) = X2'beta + S'rho2 [+ alpha2] + eps2
    U(1,1) = U(1,0) + U(0,1) + eta * F_b(W'gamma + S'rho_b [+ alpha_b])

with U(0,0) = 0 and F_b either the identity or the cube.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .data import OUTCOMES, CrossSectionDataset, PanelDataset, ParamVector
from .exceptions import ConfigurationError, InputError, TieError

logger = logging.getLogger(__name__)

_DEFAULT_CORR = {1: 0.0, 2: 0.5, 3: 0.0, 4: 0.25}


def default_params():
    """True parameters of the reference designs (all slopes equal to one)."""
    return ParamVector(beta=[1.0, 1.0], gamma=[1.0, 1.0], rho1=[1.0], rho2=[1.0],
                       rho_b=[0.0], estimate_rho_b=False)


@dataclass
class DesignSpec:
    """Configuration of a simulation design.

    ``design_id`` is 1-4 or ``"custom"``; a custom design draws covariates
    as Design 1 (or Design 3 with ``panel=True``) but uses ``true_params``
    as given.  ``eta_zero`` switches off the interaction effect, which gives
    the null model used to check the interaction tests.
    """

    design_id: object = 1
    true_params: ParamVector = field(default_factory=default_params)
    bundle_link: str = "identity"
    correlation: float = None
    eta_zero: bool = False
    panel: bool = None

    def __post_init__(self):
        if self.design_id not in (1, 2, 3, 4, "custom"):
            raise ConfigurationError(f"unknown design {self.design_id!r}")
        if self.bundle_link not in ("identity", "cubic"):
            raise ConfigurationError(f"unknown bundle link {self.bundle_link!r}")
        if self.panel is None:
            self.panel = self.design_id in (3, 4)
        if self.correlation is None:
            self.correlation = _DEFAULT_CORR.get(self.design_id, 0.0)
        if not 0.0 <= self.correlation < 1.0:
            raise ConfigurationError("correlation must lie in [0, 1)")
        p = self.true_params
        if p.k1 != 2 or p.k2 != 2 or p.k3 != 1:
            raise ConfigurationError(
                "design covariates have k1 = k2 = 2 and k3 = 1; "
                f"got parameters of sizes ({p.k1}, {p.k2}, {p.k3})"
            )
        if p.normalized and (p.beta[0] != 1.0 or p.gamma[0] != 1.0):
            raise ConfigurationError("first coefficients of beta and gamma must be 1")

    def link(self, x):
        return x if self.bundle_link == "identity" else x**3


# ---------------------------------------------------------------------------
# choice rule
# ---------------------------------------------------------------------------

def choose(u10, u01, u11):
    """Utility-maximizing alternative given the three non-zero utilities."""
    u = np.array([0.0, u10, u01, u11])
    best = u.max()
    if np.count_nonzero(u == best) > 1:
        raise TieError(f"tie among maximal utilities {u.tolist()}")
    return OUTCOMES[int(np.argmax(u))]


def _choose_many(u10, u01, u11):
    """Vectorized :func:`choose`; returns (d1, d2, tie_mask)."""
    u = np.stack([np.zeros_like(u10), u10, u01, u11], axis=-1)
    best = u.max(axis=-1, keepdims=True)
    ties = np.count_nonzero(u == best, axis=-1) > 1
    k = np.argmax(u, axis=-1)
    return (k % 2).astype(np.int8), (k // 2).astype(np.int8), ties


# ---------------------------------------------------------------------------
# correlated draws
# ---------------------------------------------------------------------------

def _equicorr(k, rho):
    return (1.0 - rho) * np.eye(k) + rho * np.ones((k, k))


def gaussian_copula_uniforms(rng, size, k, corr):
    """Uniforms whose normal scores are equicorrelated with ``corr``."""
    z = rng.standard_normal((size, k))
    if corr:
        z = z @ np.linalg.cholesky(_equicorr(k, corr)).T
    return special.ndtr(z)


def correlated_normals(rng, size, k, corr):
    z = rng.standard_normal((size, k))
    if corr:
        z = z @ np.linalg.cholesky(_equicorr(k, corr)).T
    return z


def correlated_bernoulli(rng, p, corr, size, k):
    """Exchangeable Bernoulli(p) vectors with exact pairwise correlation ``corr``.

    Each coordinate copies a shared Bernoulli(p) draw with probability
    ``sqrt(corr)`` and otherwise takes its own draw, so every pair has
    covariance ``corr * p * (1 - p)``.
    """
    common = rng.random((size, 1)) < p
    own = rng.random((size, k)) < p
    copy = rng.random((size, k)) < np.sqrt(corr)
    return np.where(copy, common, own).astype(float)


def bernoulli_pair_pmf(p, corr):
    """Joint pmf of a pair from :func:`correlated_bernoulli`: (p00, p10, p01, p11)."""
    p11 = corr * p + (1.0 - corr) * p * p
    p10 = p - p11
    return np.array([1.0 - 2.0 * p + p11, p10, p10, p11])


def _logistic(u):
    return special.logit(u)


def _beta22(u):
    return stats.beta.ppf(u, 2.0, 2.0)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def _period_latents(rng, spec, size):
    """(eps1, eps2, eta) for one period with the design's within-period correlation."""
    eps = correlated_normals(rng, size, 2, spec.correlation)
    if spec.eta_zero:
        eta = np.zeros(size)
    else:
        eta = rng.beta(2.0, 2.0, size)
    return eps[:, 0], eps[:, 1], eta


def _utilities(spec, x1, x2, w, s, eps1, eps2, eta, alpha=None):
    p = spec.true_params
    a1 = a2 = ab = 0.0
    if alpha is not None:
        a1, a2, ab = alpha
    u10 = x1 @ p.beta + s @ p.rho1 + a1 + eps1
    u01 = x2 @ p.beta + s @ p.rho2 + a2 + eps2
    u11 = u10 + u01 + eta * spec.link(w @ p.gamma + s @ p.rho_b + ab)
    return u10, u01, u11


def _simulate_cross(spec, n, rng):
    c = spec.correlation
    xc = _logistic(gaussian_copula_uniforms(rng, n, 2, c))    # X_{i1,1}, X_{i2,1}
    xb = correlated_bernoulli(rng, 1.0 / 3.0, c, n, 2)         # X_{i1,2}, X_{i2,2}
    x1 = np.column_stack([xc[:, 0], xb[:, 0]])
    x2 = np.column_stack([xc[:, 1], xb[:, 1]])
    w = np.column_stack([rng.logistic(0.0, 1.0, n), rng.standard_normal(n)])
    s = rng.standard_normal((n, 1))
    eps1, eps2, eta = _period_latents(rng, spec, n)
    d1, d2, ties = _choose_many(*_utilities(spec, x1, x2, w, s, eps1, eps2, eta))
    rounds = 0
    while ties.any():
        rounds += 1
        idx = np.flatnonzero(ties)
        logger.warning("redrawing latents for %d tied observations", idx.size)
        e1, e2, et = _period_latents(rng, spec, idx.size)
        eps1[idx], eps2[idx], eta[idx] = e1, e2, et
        d1[idx], d2[idx], t_new = _choose_many(
            *_utilities(spec, x1[idx], x2[idx], w[idx], s[idx], e1, e2, et))
        ties = np.zeros(n, dtype=bool)
        ties[idx] = t_new
        if rounds > 100:
            raise TieError("persistent utility ties; check the design")
    return CrossSectionDataset(x1, x2, w, d1, d2, s=s,
                               x_discrete=[False, True], w_discrete=[False, False],
                               s_discrete=[False])


def _simulate_panel(spec, n, rng, t_periods=2):
    c = spec.correlation
    t = t_periods
    # columns ordered (j, t): j=1 periods 0..T-1, then j=2
    xc = _logistic(gaussian_copula_uniforms(rng, n, 2 * t, c)).reshape(n, 2, t)
    xb = correlated_bernoulli(rng, 1.0 / 3.0, c, n, 2 * t).reshape(n, 2, t)
    w1 = _logistic(gaussian_copula_uniforms(rng, n, t, c))
    w2 = correlated_normals(rng, n, t, c)
    s = correlated_normals(rng, n, t, c)[:, :, None]
    eps = correlated_normals(rng, n, 2 * t, c).reshape(n, 2, t)
    if spec.eta_zero:
        eta = np.zeros((n, t))
    else:
        eta = _beta22(gaussian_copula_uniforms(rng, n, t, c))
    x1 = np.stack([xc[:, 0], xb[:, 0]], axis=-1)          # (n, t, 2)
    x2 = np.stack([xc[:, 1], xb[:, 1]], axis=-1)
    w = np.stack([w1, w2], axis=-1)
    alpha1 = xc[:, 0].mean(axis=1) * t / 4.0               # (X_{i,1,1} + X_{i,1,2}) / 4
    alpha2 = xc[:, 1].mean(axis=1) * t / 4.0
    alphab = w1.mean(axis=1) * t / 4.0

    d1 = np.empty((n, t), dtype=np.int8)
    d2 = np.empty((n, t), dtype=np.int8)
    for tt in range(t):
        alpha = (alpha1, alpha2, alphab)
        e1, e2, et = eps[:, 0, tt].copy(), eps[:, 1, tt].copy(), eta[:, tt].copy()
        a, b, ties = _choose_many(*_utilities(spec, x1[:, tt], x2[:, tt], w[:, tt],
                                              s[:, tt], e1, e2, et, alpha))
        rounds = 0
        while ties.any():
            rounds += 1
            idx = np.flatnonzero(ties)
            logger.warning("redrawing latents for %d tied observations", idx.size)
            n1, n2, ne = _period_latents(rng, spec, idx.size)
            sub_alpha = (alpha1[idx], alpha2[idx], alphab[idx])
            a[idx], b[idx], t_new = _choose_many(*_utilities(
                spec, x1[idx, tt], x2[idx, tt], w[idx, tt], s[idx, tt],
                n1, n2, ne, sub_alpha))
            ties = np.zeros(n, dtype=bool)
            ties[idx] = t_new
            if rounds > 100:
                raise TieError("persistent utility ties; check the design")
        d1[:, tt], d2[:, tt] = a, b
    return PanelDataset(x1, x2, w, d1, d2, s=s,
                        x_discrete=[False, True], w_discrete=[False, False],
                        s_discrete=[False])


def simulate_design(spec, n, seed):
    """Draw a dataset of ``n`` agents from ``spec``; deterministic in ``seed``."""
    if n < 2:
        raise InputError("need at least two agents")
    rng = np.random.default_rng(seed)
    if spec.panel:
        return _simulate_panel(spec, int(n), rng)
    return _simulate_cross(spec, int(n), rng)


# ---------------------------------------------------------------------------
# choice-probability oracle
# ---------------------------------------------------------------------------

def choice_probabilities_from_indexes(spec, u1, u2, ub, n_mc=100_000, seed=0):
    """Monte Carlo choice probabilities given the three systematic indexes.

    ``u1`` and ``u2`` are the stand-alone indexes (including any fixed
    effect) and ``ub`` the argument of the bundle link.  Returns the
    probabilities of (0,0), (1,0), (0,1), (1,1) in that order.  The same
    ``seed`` reuses the same latent draws, so comparisons across index
    values are made with common random numbers.
    """
    if n_mc < 1000:
        raise InputError("n_mc must be at least 1000")
    rng = np.random.default_rng(seed)
    eps1, eps2, eta = _period_latents(rng, spec, int(n_mc))
    u10 = u1 + eps1
    u01 = u2 + eps2
    u11 = u10 + u01 + eta * spec.link(ub)
    u = np.stack([np.zeros(n_mc), u10, u01, u11], axis=-1)
    counts = np.bincount(np.argmax(u, axis=-1), minlength=4)
    return counts / float(n_mc)


def true_choice_probability(spec, z, n_mc=100_000, seed=0):
    """Monte Carlo oracle for the choice probabilities at covariate row ``z``.

    ``z`` is a mapping with entries ``x1``, ``x2``, ``w`` and optionally
    ``s`` and ``alpha`` (the three fixed effects, panel designs only).
    """
    p = spec.true_params
    x1 = np.asarray(z["x1"], dtype=float)
    x2 = np.asarray(z["x2"], dtype=float)
    w = np.asarray(z["w"], dtype=float)
    s = np.asarray(z.get("s", np.zeros(p.k3)), dtype=float)
    a1, a2, ab = z.get("alpha", (0.0, 0.0, 0.0))
    u1 = x1 @ p.beta + s @ p.rho1 + a1
    u2 = x2 @ p.beta + s @ p.rho2 + a2
    ub = w @ p.gamma + s @ p.rho_b + ab
    return choice_probabilities_from_indexes(spec, u1, u2, ub, n_mc, seed)
