"""Pairwise differences and kernel weights for the matching criteria."""

import numpy as np

from .exceptions import ConfigurationError
from .kernels import gaussian_kernel


def match_weight(diffs, h, discrete, order):
    """Product-kernel weight per row of ``diffs``.

    Continuous columns contribute ``K(d / h) / h``; discrete columns an exact
    match indicator.  ``h`` has one entry per column (ignored where discrete).
    """
    diffs = np.asarray(diffs, dtype=float)
    w = np.ones(diffs.shape[0])
    for j in range(diffs.shape[1]):
        if discrete[j]:
            w *= diffs[:, j] == 0.0
        else:
            w *= gaussian_kernel(order, diffs[:, j] / h[j]) / h[j]
    return w


def prune(dx, val, tol):
    """Drop pairs whose weighted coefficient is zero or negligible."""
    keep = val != 0.0
    if keep.any() and tol > 0:
        keep &= np.abs(val) >= tol * np.abs(val[keep]).max()
    return np.ascontiguousarray(dx[keep]), np.ascontiguousarray(val[keep])


def per_column(h, k, name):
    h = np.asarray(h, dtype=float)
    if h.ndim == 0:
        h = np.full(k, float(h))
    if np.any(h <= 0):
        raise ConfigurationError("bandwidths must be positive")
    if h.shape != (k,):
        raise ConfigurationError(f"{name} needs {k} bandwidths, got shape {h.shape}")
    return h
