"""Kernel functions and bandwidth rules used for matching and smoothing."""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DegenerateInputError, InputError

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

# Hermite-type polynomial multipliers of the standard normal density.  Each
# yields a kernel whose moments 1..order-1 vanish.
_POLY = {
    2: np.array([1.0]),
    4: np.array([3.0, -1.0]) / 2.0,
    6: np.array([15.0, -10.0, 1.0]) / 8.0,
}

_EXPONENTS = {
    # rule: (exponent on N, exponent on log N)
    "cross_stage1": (-1.0 / 8.0, 1.0 / 6.0),
    "cross_stage2": (-1.0 / 4.0, 1.0 / 4.0),
    "panel": (-1.0 / 7.0, -1.0 / 14.0),
}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and order for one estimation stage."""

    order: int = 2
    family: str = "gaussian_poly"

    def __post_init__(self):
        if self.family not in ("gaussian_poly", "aitchison_aitken"):
            raise ConfigurationError(f"unknown kernel family {self.family!r}")
        if self.family == "gaussian_poly" and self.order not in _POLY:
            raise ConfigurationError(
                f"unsupported Gaussian kernel order {self.order}; use 2, 4 or 6"
            )


@dataclass(frozen=True)
class BandwidthSpec:
    """Bandwidth rule ``c * sigma * N**a * log(N)**b`` for one stage."""

    constant: float = 1.0
    exponent_rule: str = "cross_stage1"

    def __post_init__(self):
        if self.exponent_rule not in _EXPONENTS:
            raise ConfigurationError(f"unknown bandwidth rule {self.exponent_rule!r}")
        if not self.constant > 0:
            raise ConfigurationError("bandwidth constant must be positive")


def gaussian_kernel(order, v):
    """Gaussian-based kernel of the given (even) order evaluated at ``v``.

    Order 2 is the standard normal density; orders 4 and 6 multiply it by
    ``(3 - v**2) / 2`` and ``(15 - 10 v**2 + v**4) / 8`` respectively.
    """
    try:
        coef = _POLY[int(order)]
    except (KeyError, TypeError, ValueError):
        raise ConfigurationError(
            f"unsupported Gaussian kernel order {order!r}; use 2, 4 or 6"
        ) from None
    v = np.asarray(v, dtype=float)
    v2 = v * v
    poly = np.polyval(coef[::-1], v2)
    out = poly * np.exp(-0.5 * v2) * _INV_SQRT_2PI
    return out if out.ndim else float(out)


def aitchison_aitken(lam, x, x_ref, num_categories):
    """Aitchison-Aitken kernel for an unordered discrete variable."""
    if num_categories < 2:
        raise ConfigurationError("num_categories must be at least 2")
    upper = (num_categories - 1) / num_categories
    if not 0.0 <= lam <= upper:
        raise ConfigurationError(f"lambda must lie in [0, {upper}], got {lam}")
    same = np.asarray(x) == np.asarray(x_ref)
    out = np.where(same, 1.0 - lam, lam / (num_categories - 1))
    return out if out.ndim else float(out)


def product_kernel(h, diffs, spec=None):
    """Scaled product kernel ``prod_l h_l**-1 K(diffs_l / h_l)``.

    ``h`` may be a scalar or one bandwidth per coordinate.  ``diffs`` may be
    a vector (one evaluation) or a matrix with one row per evaluation.
    """
    order = 2 if spec is None else (spec if isinstance(spec, int) else spec.order)
    diffs = np.asarray(diffs, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), diffs.shape[-1:])
    if np.any(h <= 0):
        raise ConfigurationError("bandwidth must be positive")
    if diffs.shape[-1] == 0:
        return np.ones(diffs.shape[:-1]) if diffs.ndim > 1 else 1.0
    vals = gaussian_kernel(order, diffs / h) / h
    out = np.prod(vals, axis=-1)
    return out if np.ndim(out) else float(out)


def bandwidth(n, sigma_hat, spec):
    """Rule-of-thumb bandwidth ``c * sigma_hat * N**a * log(N)**b`` (natural log)."""
    if n < 2:
        raise InputError("bandwidth rules need N >= 2")
    a, b = _EXPONENTS[spec.exponent_rule]
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    out = spec.constant * sigma_hat * n**a * np.log(n) ** b
    return out if out.ndim else float(out)


def silverman_bandwidth(samples):
    """Silverman's rule ``1.06 * std * N**(-1/5)`` with the N-1 denominator."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise InputError("Silverman's rule needs at least two samples")
    sd = np.std(x, ddof=1)
    if not sd > 0:
        raise DegenerateInputError("zero sample variance, bandwidth undefined")
    return 1.06 * sd * x.size ** (-0.2)


def sample_std(x):
    """Column standard deviations with the N-1 denominator; 1.0 for constant columns."""
    x = np.asarray(x, dtype=float)
    sd = np.std(x, axis=0, ddof=1)
    return np.where(sd > 0, sd, 1.0)
