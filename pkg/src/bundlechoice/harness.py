"""Monte Carlo replications, summary statistics and table output."""

import csv
import io
import logging
import zlib
from dataclasses import dataclass, field

import numpy as np

from .designs import DesignSpec, simulate_design
from .exceptions import BatchError, BundleChoiceError, ConfigurationError, InputError
from .lad import LADEstimator, PanelLADEstimator, bootstrap_lad
from .mrc import MRCEstimator, bootstrap_mrc
from .optimizer import DEConfig
from .panel_ms import NumericalBootstrapSpec, PanelMSEstimator, numerical_bootstrap

logger = logging.getLogger(__name__)

METHODS = ("mrc", "lad", "panel-ms", "panel-lad")
STATS = ("MBIAS", "RMSE", "MED", "MAD")
MAX_FAILURE_SHARE = 0.2


def normalize_method(name):
    m = str(name).lower().replace("_", "-")
    if m not in METHODS:
        raise ConfigurationError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return m


def derive_seed(master, rep, tag):
    """64-bit child seed for replication ``rep`` and purpose ``tag``."""
    seq = np.random.SeedSequence([int(master), int(rep), zlib.crc32(str(tag).encode())])
    return int(seq.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_PARAMS = {
    "mrc": ("stage1_order", "stage2_order", "c1", "c2", "prune_tol"),
    "lad": ("kernel_order", "discrete_lambda", "estimate_rho_b", "alternatives"),
    "panel-ms": ("kernel_order", "c3", "prune_tol"),
    "panel-lad": ("hidden", "learning_rate", "epochs", "solver", "estimate_rho_b", "alternatives"),
}
_CLASSES = {"mrc": MRCEstimator, "lad": LADEstimator, "panel-ms": PanelMSEstimator,
            "panel-lad": PanelLADEstimator}
_DE_KEYS = ("population_size", "differential_weight", "crossover_rate", "max_generations",
            "bounds", "tol", "atol", "patience", "stall_generations")


def de_config_from(cfg):
    """``DEConfig`` from the ``"de"`` block of a config mapping (``None`` if absent)."""
    block = (cfg or {}).get("de")
    if not block:
        return None
    unknown = set(block) - set(_DE_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown DE settings: {sorted(unknown)}")
    return DEConfig(**block)


def make_estimator(method, config=None, seed=0):
    """Estimator for ``method`` with keyword settings taken from ``config``."""
    method = normalize_method(method)
    config = dict(config or {})
    kwargs = {k: config[k] for k in _PARAMS[method] if k in config}
    if "hidden" in kwargs:
        kwargs["hidden"] = tuple(kwargs["hidden"])
    de = de_config_from(config)
    if de is not None:
        kwargs["de_config"] = de
    return _CLASSES[method](seed=seed, **kwargs)


def run_bootstrap(method, data, estimator, B, seed, config=None):
    """Inference for ``method``: refit bootstrap, or the numerical bootstrap for panel MS."""
    method = normalize_method(method)
    config = config or {}
    if method == "mrc":
        return bootstrap_mrc(data, estimator, B=B, seed=seed)
    if method == "panel-ms":
        nb = config.get("bootstrap", {})
        spec = NumericalBootstrapSpec(
            epsilon1=nb.get("epsilon1"), epsilon2=nb.get("epsilon2"),
            rule=nb.get("epsilon_rule", "simulation"), c4=nb.get("c4", 2.0), B=B, seed=seed,
            ci_method=nb.get("ci_method", "rescaled"))
        return numerical_bootstrap(data, estimator, spec)
    return bootstrap_lad(data, estimator, B=B, seed=seed)


# ---------------------------------------------------------------------------
# replications
# ---------------------------------------------------------------------------

@dataclass
class ReplicationPlan:
    """One Monte Carlo experiment: design, method, sample size and repetitions."""

    design_id: object
    estimator: str
    n: int
    reps: int = 50
    B: int = 0
    seed: int = 0
    config: dict = field(default_factory=dict)
    design: DesignSpec = None

    def __post_init__(self):
        self.estimator = normalize_method(self.estimator)
        if self.reps < 1:
            raise ConfigurationError("reps must be at least 1")
        if self.B < 0:
            raise ConfigurationError("B must be nonnegative")
        if self.design is None:
            self.design = DesignSpec(self.design_id)
        panel = self.estimator.startswith("panel")
        if panel != bool(self.design.panel):
            kind = "panel" if self.design.panel else "cross-sectional"
            raise ConfigurationError(f"method {self.estimator} does not fit a {kind} design")


@dataclass
class ReplicationOutput:
    names: list
    truth: np.ndarray
    estimates: np.ndarray
    cis: np.ndarray = None
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return ~np.isnan(self.estimates).any(axis=1)


def truth_for(plan, names):
    p = plan.design.true_params
    full = dict(zip(p.free_names(), p.free()))
    return np.array([full[n] for n in names])


def run_one(plan, rep, data=None):
    """Simulate (unless ``data`` is given) and estimate one replication."""
    if data is None:
        data = simulate_design(plan.design, plan.n, derive_seed(plan.seed, rep, "data"))
    est = make_estimator(plan.estimator, plan.config, derive_seed(plan.seed, rep, "estimate"))
    if plan.B:
        return run_bootstrap(plan.estimator, data, est, plan.B,
                             derive_seed(plan.seed, rep, "bootstrap"), plan.config)
    return est.fit(data).result()


def run_replications(plan, runner=None):
    """Run ``plan.reps`` replications; failed ones are logged and left as NaN rows.

    ``runner(plan, rep)`` replaces :func:`run_one` (used to inject failures
    in tests).  More than 20% failures raise :class:`BatchError`.
    """
    runner = runner or run_one
    results, failures = {}, []
    for rep in range(plan.reps):
        try:
            results[rep] = runner(plan, rep)
        except (BundleChoiceError, FloatingPointError, ValueError) as exc:
            logger.warning("replication %d failed: %s", rep, exc)
            failures.append((rep, f"{type(exc).__name__}: {exc}"))
    if len(failures) > MAX_FAILURE_SHARE * plan.reps or not results:
        raise BatchError(f"{len(failures)} of {plan.reps} replications failed", failures)
    names = next(iter(results.values())).names
    est = np.full((plan.reps, len(names)), np.nan)
    cis = np.full((plan.reps, len(names), 2), np.nan) if plan.B else None
    for rep, res in results.items():
        est[rep] = res.estimate
        if plan.B:
            cis[rep] = res.ci
    return ReplicationOutput(list(names), truth_for(plan, names), est, cis, failures)


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

@dataclass
class SummaryTable:
    """Per-parameter statistics; ``stats[name]`` maps column label to value."""

    names: list
    stats: dict
    n: int = None

    def columns(self):
        return [c for c in STATS + ("COVERAGE", "LENGTH") if c in self.stats[self.names[0]]]


def summarize(estimates, truth, names=None):
    """MBIAS, RMSE, MED and MAD (median absolute deviation from the truth)."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    if est.shape[0] < 1:
        raise InputError("need at least one estimate")
    truth = np.broadcast_to(np.asarray(truth, dtype=float), est.shape[1:])
    names = list(names) if names is not None else [f"theta_{j + 1}" for j in range(est.shape[1])]
    stats = {}
    for j, name in enumerate(names):
        col = est[:, j]
        err = col[~np.isnan(col)] - truth[j]
        stats[name] = {"MBIAS": float(np.mean(err)), "RMSE": float(np.sqrt(np.mean(err ** 2))),
                       "MED": float(np.median(err)), "MAD": float(np.median(np.abs(err)))}
    return SummaryTable(names, stats)


def coverage(cis, truth):
    """``(COVERAGE, LENGTH)`` of closed intervals ``[lo, hi]`` for a scalar truth."""
    cis = np.asarray(cis, dtype=float).reshape(-1, 2)
    if cis.shape[0] == 0:
        raise InputError("no intervals given")
    if np.any(cis[:, 0] > cis[:, 1]):
        raise InputError("interval with lo > hi")
    hit = (cis[:, 0] <= truth) & (truth <= cis[:, 1])
    return float(hit.mean()), float(np.mean(cis[:, 1] - cis[:, 0]))


def summarize_output(out, n=None):
    """Summary of a :class:`ReplicationOutput`, with coverage when intervals exist."""
    ok = out.ok
    table = summarize(out.estimates[ok], out.truth, out.names)
    table.n = n
    if out.cis is not None:
        for j, name in enumerate(out.names):
            cov, length = coverage(out.cis[ok, j], out.truth[j])
            table.stats[name]["COVERAGE"] = cov
            table.stats[name]["LENGTH"] = length
    return table


def emit_table(summary, fmt="csv"):
    """Render one summary (or a list, one row per sample size) with 3 decimals."""
    rows = summary if isinstance(summary, (list, tuple)) else [summary]
    if not rows:
        raise InputError("nothing to emit")
    names, cols = rows[0].names, rows[0].columns()
    header = ["N"] + [f"{name} {c}" for name in names for c in cols]
    body = [["" if r.n is None else str(r.n)]
            + [f"{r.stats[name][c]:.3f}" for name in names for c in cols] for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(body)
        return buf.getvalue()
    if fmt == "text":
        widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(header)]
        lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
        lines += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
        return "\n".join(lines) + "\n"
    raise ConfigurationError(f"unknown table format {fmt!r}")


def read_table(text):
    """Parse a CSV table written by :func:`emit_table` into header and float rows."""
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], [[float(v) if v else None for v in r] for r in rows[1:]]
