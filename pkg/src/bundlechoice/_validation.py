"""Input checks shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import InputError


def check_features(X, n_features=None):
    try:
        X = check_array(X, dtype=float, ensure_2d=True)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if n_features is not None and X.shape[1] != n_features:
        raise InputError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def check_targets(y, n_rows):
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[0] != n_rows:
        raise InputError(f"targets must have {n_rows} rows, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InputError("targets contain non-finite values")
    return y


def check_bootstrap_count(B, minimum=2):
    if int(B) != B or B < minimum:
        raise InputError(f"number of bootstrap draws must be an integer >= {minimum}")
    return int(B)


def check_dataset(data, panel):
    from .data import CrossSectionDataset, PanelDataset
    want = PanelDataset if panel else CrossSectionDataset
    if not isinstance(data, want):
        raise InputError(f"expected a {want.__name__}, got {type(data).__name__}")
    if data.n < (1 if panel else 2):
        raise InputError("not enough observations")
    return data
