"""Estimation results and their JSON form."""

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    return obj


def percentile_ci(draws, level=0.95):
    """Equal-tailed percentile interval per column of ``draws``."""
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    if draws.shape[0] < 1:
        raise InputError("no bootstrap draws")
    a = (1.0 - level) / 2.0
    lo = np.quantile(draws, a, axis=0)
    hi = np.quantile(draws, 1.0 - a, axis=0)
    return np.column_stack([lo, hi])


@dataclass
class EstimationResult:
    """Point estimates plus optional bootstrap output.

    ``estimate`` holds the free coordinates named in ``names``; ``params``
    the full parameter vector.  ``draws`` is ``(B, len(names))`` and ``ci``
    ``(len(names), 2)`` once a bootstrap has been run.
    """

    method: str
    names: list
    estimate: np.ndarray
    params: object = None
    criterion: dict = field(default_factory=dict)
    bandwidths: dict = field(default_factory=dict)
    draws: np.ndarray = None
    ci: np.ndarray = None
    n_failed_draws: int = 0
    seeds: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return _plain({
            "method": self.method,
            "names": list(self.names),
            "estimate": np.asarray(self.estimate),
            "params": self.params,
            "criterion": self.criterion,
            "bandwidths": self.bandwidths,
            "draws": self.draws,
            "ci": self.ci,
            "n_failed_draws": self.n_failed_draws,
            "seeds": self.seeds,
            "diagnostics": self.diagnostics,
        })

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)


@dataclass
class EtaTestResult:
    statistic: float
    ci_lower: float
    evidence_for_interaction: bool
    draws: np.ndarray = None

    @property
    def conclusion(self):
        return ("interaction present (lower bound > 0)" if self.evidence_for_interaction
                else "no evidence of interaction (lower bound <= 0)")

    def to_dict(self):
        return _plain({
            "statistic": self.statistic, "ci_lower": self.ci_lower,
            "evidence_for_interaction": self.evidence_for_interaction,
            "conclusion": self.conclusion, "draws": self.draws,
        })
