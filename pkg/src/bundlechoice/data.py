"""Choice outcomes, datasets, parameter vectors and their CSV form."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError

#: Alternatives in the fixed order used throughout: (0,0), (1,0), (0,1), (1,1).
OUTCOMES = ((0, 0), (1, 0), (0, 1), (1, 1))


def outcome_index(d1, d2):
    """Map choice bits to positions in :data:`OUTCOMES` (vectorized)."""
    d1 = np.asarray(d1, dtype=np.int64)
    d2 = np.asarray(d2, dtype=np.int64)
    # (0,0)->0, (1,0)->1, (0,1)->2, (1,1)->3
    return d1 + 2 * d2


def one_hot(d1, d2):
    """Indicator matrix ``Y[..., k] = 1[choice == OUTCOMES[k]]``."""
    idx = outcome_index(d1, d2)
    return (idx[..., None] == np.arange(4)).astype(float)


def _as_matrix(a, n, name):
    if a is None:
        return np.zeros((n, 0))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] != n:
        raise InputError(f"{name} must have {n} rows, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} contains non-finite values")
    return a


def _as_panel(a, n, t, name):
    if a is None:
        return np.zeros((n, t, 0))
    a = np.asarray(a, dtype=float)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[:2] != (n, t):
        raise InputError(f"{name} must have shape ({n}, {t}, k), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} contains non-finite values")
    return a


def _mask(mask, k):
    if mask is None:
        return np.zeros(k, dtype=bool)
    mask = np.asarray(mask, dtype=bool).ravel()
    if mask.size != k:
        raise InputError(f"discrete mask has {mask.size} entries, expected {k}")
    return mask


def _bits(a, shape, name):
    a = np.asarray(a)
    if a.shape != shape:
        raise InputError(f"{name} must have shape {shape}, got {a.shape}")
    if not np.all((a == 0) | (a == 1)):
        raise InputError(f"{name} must contain only 0/1")
    return a.astype(np.int8)


@dataclass
class CrossSectionDataset:
    """One row per agent.

    ``x1``/``x2`` hold the alternative-specific covariates (N, k1), ``w``
    the bundle covariates (N, k2) and ``s`` the common regressors (N, k3).
    ``x_discrete`` flags discrete columns of ``x1``/``x2`` (shared layout),
    ``w_discrete`` and ``s_discrete`` those of ``w`` and ``s``.
    """

    x1: np.ndarray
    x2: np.ndarray
    w: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    s: np.ndarray = None
    x_discrete: np.ndarray = None
    w_discrete: np.ndarray = None
    s_discrete: np.ndarray = None

    def __post_init__(self):
        x1 = np.asarray(self.x1, dtype=float)
        n = x1.shape[0]
        if n < 1:
            raise InputError("dataset is empty")
        self.x1 = _as_matrix(x1, n, "x1")
        self.x2 = _as_matrix(self.x2, n, "x2")
        if self.x1.shape[1] != self.x2.shape[1]:
            raise InputError("x1 and x2 must have the same number of columns")
        self.w = _as_matrix(self.w, n, "w")
        self.s = _as_matrix(self.s, n, "s")
        self.d1 = _bits(self.d1, (n,), "d1")
        self.d2 = _bits(self.d2, (n,), "d2")
        self.x_discrete = _mask(self.x_discrete, self.k1)
        self.w_discrete = _mask(self.w_discrete, self.k2)
        self.s_discrete = _mask(self.s_discrete, self.k3)

    @property
    def n(self):
        return self.x1.shape[0]

    @property
    def k1(self):
        return self.x1.shape[1]

    @property
    def k2(self):
        return self.w.shape[1]

    @property
    def k3(self):
        return self.s.shape[1]

    @property
    def choice(self):
        """Position of each agent's choice in :data:`OUTCOMES`."""
        return outcome_index(self.d1, self.d2)

    @property
    def y(self):
        """(N, 4) indicator matrix of the chosen alternative."""
        return one_hot(self.d1, self.d2)

    def features(self):
        """Covariates stacked as ``(x1, x2, w, s)`` with the matching discrete mask."""
        z = np.hstack([self.x1, self.x2, self.w, self.s])
        mask = np.concatenate(
            [self.x_discrete, self.x_discrete, self.w_discrete, self.s_discrete]
        )
        return z, mask

    def take(self, idx):
        """Sub-sample (or resample, with repeats) the rows in ``idx``."""
        idx = np.asarray(idx)
        return CrossSectionDataset(
            self.x1[idx], self.x2[idx], self.w[idx], self.d1[idx], self.d2[idx],
            s=self.s[idx], x_discrete=self.x_discrete,
            w_discrete=self.w_discrete, s_discrete=self.s_discrete,
        )


@dataclass
class PanelDataset:
    """Balanced panel; covariate arrays have shape (N, T, k), choices (N, T)."""

    x1: np.ndarray
    x2: np.ndarray
    w: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    s: np.ndarray = None
    x_discrete: np.ndarray = None
    w_discrete: np.ndarray = None
    s_discrete: np.ndarray = None

    def __post_init__(self):
        x1 = np.asarray(self.x1, dtype=float)
        if x1.ndim == 2:
            x1 = x1[:, :, None]
        if x1.ndim != 3:
            raise InputError("panel covariates must have shape (N, T, k)")
        n, t = x1.shape[:2]
        if n < 1:
            raise InputError("dataset is empty")
        if t < 2:
            raise InputError("a panel needs at least two periods")
        self.x1 = _as_panel(x1, n, t, "x1")
        self.x2 = _as_panel(self.x2, n, t, "x2")
        if self.x1.shape[2] != self.x2.shape[2]:
            raise InputError("x1 and x2 must have the same number of columns")
        self.w = _as_panel(self.w, n, t, "w")
        self.s = _as_panel(self.s, n, t, "s")
        self.d1 = _bits(self.d1, (n, t), "d1")
        self.d2 = _bits(self.d2, (n, t), "d2")
        self.x_discrete = _mask(self.x_discrete, self.k1)
        self.w_discrete = _mask(self.w_discrete, self.k2)
        self.s_discrete = _mask(self.s_discrete, self.k3)

    @property
    def n(self):
        return self.x1.shape[0]

    @property
    def t_periods(self):
        return self.x1.shape[1]

    @property
    def k1(self):
        return self.x1.shape[2]

    @property
    def k2(self):
        return self.w.shape[2]

    @property
    def k3(self):
        return self.s.shape[2]

    @property
    def choice(self):
        return outcome_index(self.d1, self.d2)

    @property
    def y(self):
        """(N, T, 4) indicator array of the chosen alternative."""
        return one_hot(self.d1, self.d2)

    def period_pairs(self):
        """All ``(t, s)`` with ``t > s``."""
        t = self.t_periods
        return [(a, b) for a in range(t) for b in range(a)]

    def take(self, idx):
        idx = np.asarray(idx)
        return PanelDataset(
            self.x1[idx], self.x2[idx], self.w[idx], self.d1[idx], self.d2[idx],
            s=self.s[idx], x_discrete=self.x_discrete,
            w_discrete=self.w_discrete, s_discrete=self.s_discrete,
        )


@dataclass
class ParamVector:
    """Preference parameters ``(beta, gamma, rho1, rho2, rho_b)``.

    With ``normalized`` set, the first entries of ``beta`` and ``gamma`` are
    pinned to one and only the remaining coordinates are free.
    ``estimate_rho_b`` controls whether ``rho_b`` is part of the free vector
    (it is not when the bundle index carries no common regressor).
    """

    beta: np.ndarray
    gamma: np.ndarray
    rho1: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rho2: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rho_b: np.ndarray = field(default_factory=lambda: np.zeros(0))
    normalized: bool = True
    estimate_rho_b: bool = True

    def __post_init__(self):
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        self.rho1 = np.atleast_1d(np.asarray(self.rho1, dtype=float))
        self.rho2 = np.atleast_1d(np.asarray(self.rho2, dtype=float))
        k3 = self.rho1.size
        if self.rho2.size != k3:
            raise InputError("rho1 and rho2 must have the same length")
        rho_b = np.atleast_1d(np.asarray(self.rho_b, dtype=float))
        self.rho_b = rho_b if rho_b.size else np.zeros(k3)
        if self.rho_b.size != k3:
            raise InputError("rho_b must have the same length as rho1")
        if self.normalized and (self.beta[0] != 1.0 or self.gamma[0] != 1.0):
            raise InputError("normalized parameters need beta[0] == gamma[0] == 1")

    @property
    def k1(self):
        return self.beta.size

    @property
    def k2(self):
        return self.gamma.size

    @property
    def k3(self):
        return self.rho1.size

    def free(self):
        """Free coordinates as a flat vector."""
        parts = [self.beta[1:], self.gamma[1:], self.rho1, self.rho2]
        if self.estimate_rho_b:
            parts.append(self.rho_b)
        return np.concatenate(parts)

    def free_names(self):
        names = [f"beta_{i + 1}" for i in range(1, self.k1)]
        names += [f"gamma_{i + 1}" for i in range(1, self.k2)]
        names += [f"rho1_{i + 1}" for i in range(self.k3)]
        names += [f"rho2_{i + 1}" for i in range(self.k3)]
        if self.estimate_rho_b:
            names += [f"rho_b_{i + 1}" for i in range(self.k3)]
        return names

    def with_free(self, values):
        """Copy with the free coordinates replaced by ``values``."""
        values = np.asarray(values, dtype=float)
        k1, k2, k3 = self.k1, self.k2, self.k3
        n_free = (k1 - 1) + (k2 - 1) + 2 * k3 + (k3 if self.estimate_rho_b else 0)
        if values.size != n_free:
            raise InputError(f"expected {n_free} free values, got {values.size}")
        pos = 0

        def grab(m):
            nonlocal pos
            out = values[pos:pos + m]
            pos += m
            return out

        beta = np.concatenate([[1.0], grab(k1 - 1)])
        gamma = np.concatenate([[1.0], grab(k2 - 1)])
        rho1, rho2 = grab(k3), grab(k3)
        rho_b = grab(k3) if self.estimate_rho_b else self.rho_b.copy()
        return ParamVector(beta, gamma, rho1, rho2, rho_b,
                           normalized=True, estimate_rho_b=self.estimate_rho_b)

    def to_dict(self):
        return {
            "beta": self.beta.tolist(), "gamma": self.gamma.tolist(),
            "rho1": self.rho1.tolist(), "rho2": self.rho2.tolist(),
            "rho_b": self.rho_b.tolist(),
        }


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _header(k1, k2, k3, panel):
    cols = ["id"] + (["t"] if panel else []) + ["d1", "d2"]
    cols += [f"x1_{i + 1}" for i in range(k1)]
    cols += [f"x2_{i + 1}" for i in range(k1)]
    cols += [f"w_{i + 1}" for i in range(k2)]
    cols += [f"s_{i + 1}" for i in range(k3)]
    return cols


def write_csv(data, path):
    """Write a dataset with a mandatory header and 17 significant digits."""
    panel = isinstance(data, PanelDataset)
    header = _header(data.k1, data.k2, data.k3, panel)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        if panel:
            for i in range(data.n):
                for t in range(data.t_periods):
                    row = [i, t, int(data.d1[i, t]), int(data.d2[i, t])]
                    covs = np.concatenate([data.x1[i, t], data.x2[i, t],
                                           data.w[i, t], data.s[i, t]])
                    writer.writerow(row + [f"{v:.17g}" for v in covs])
        else:
            for i in range(data.n):
                row = [i, int(data.d1[i]), int(data.d2[i])]
                covs = np.concatenate([data.x1[i], data.x2[i], data.w[i], data.s[i]])
                writer.writerow(row + [f"{v:.17g}" for v in covs])


def _guess_discrete(cols, max_categories=10):
    """A column is treated as discrete when it is integer valued with few levels."""
    if cols.shape[0] == 0:
        return np.zeros(cols.shape[1], dtype=bool)
    out = []
    for c in cols.T:
        integral = np.all(c == np.round(c))
        out.append(bool(integral and np.unique(c).size <= max_categories))
    return np.array(out, dtype=bool)


def read_csv(path, x_discrete=None, w_discrete=None, s_discrete=None):
    """Read a dataset written by :func:`write_csv` (or any file with that header).

    The presence of a ``t`` column selects a panel.  Discrete-column masks
    default to integer-valued columns with at most ten distinct values.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    header = [h.strip() for h in header]
    for required in ("id", "d1", "d2"):
        if required not in header:
            raise InputError(f"{path}: missing column {required!r}")
    try:
        table = np.array(rows, dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric entry ({exc})") from None
    if table.ndim != 2 or table.shape[0] == 0:
        raise InputError(f"{path}: no data rows")
    col = {h: i for i, h in enumerate(header)}

    def block(prefix):
        names = sorted((h for h in header if h.startswith(prefix + "_")),
                       key=lambda h: int(h.rsplit("_", 1)[1]))
        return table[:, [col[h] for h in names]] if names else np.zeros((len(table), 0))

    x1, x2, w, s = block("x1"), block("x2"), block("w"), block("s")
    if x1.shape[1] != x2.shape[1]:
        raise InputError(f"{path}: x1_* and x2_* column counts differ")
    if x_discrete is None:
        x_discrete = _guess_discrete(np.vstack([x1, x2]))
    if w_discrete is None:
        w_discrete = _guess_discrete(w)
    if s_discrete is None:
        s_discrete = _guess_discrete(s)
    d1 = table[:, col["d1"]]
    d2 = table[:, col["d2"]]
    if "t" not in col:
        return CrossSectionDataset(x1, x2, w, d1, d2, s=s, x_discrete=x_discrete,
                                   w_discrete=w_discrete, s_discrete=s_discrete)

    ids = table[:, col["id"]]
    ts = table[:, col["t"]]
    uid, agent = np.unique(ids, return_inverse=True)
    utt, period = np.unique(ts, return_inverse=True)
    n, t = uid.size, utt.size
    if table.shape[0] != n * t:
        raise InputError(f"{path}: panel is not balanced")
    seen = np.zeros((n, t), dtype=bool)
    seen[agent, period] = True
    if not seen.all():
        raise InputError(f"{path}: panel is not balanced")

    def shape(a):
        out = np.empty((n, t) + a.shape[1:])
        out[agent, period] = a
        return out

    return PanelDataset(shape(x1), shape(x2), shape(w), shape(d1), shape(d2),
                        s=shape(s), x_discrete=x_discrete,
                        w_discrete=w_discrete, s_discrete=s_discrete)
