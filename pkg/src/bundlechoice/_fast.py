"""Compiled pair loops shared by the rank, score and LAD criteria.

Every kernel-weighted criterion in the package reduces to

    sum_p  val[p] * g(dx[p] . b)

over precomputed pairs ``p``, with ``g`` either ``sgn`` (``sgn(0) = -1``) or
the indicator ``1[. > 0]``.  The LAD criterion needs three indexes per pair
and has its own loop.  All loops reduce in fixed pair order.
"""

from functools import lru_cache

import numpy as np
from numba import njit


@njit(cache=True)
def _signsum_one(dx, val, b, indicator):
    n, k = dx.shape
    acc = 0.0
    for p in range(n):
        s = 0.0
        for j in range(k):
            s += dx[p, j] * b[j]
        if s > 0.0:
            acc += val[p]
        elif not indicator:
            acc -= val[p]
    return acc


@njit(cache=True)
def _signsum_pop(dx, val, pop, indicator):
    out = np.empty(pop.shape[0])
    for q in range(pop.shape[0]):
        out[q] = _signsum_one(dx, val, pop[q], indicator)
    return out


def signsum(dx, val, b, indicator=False):
    """``sum_p val[p] * sgn(dx[p] . b)`` for one ``b`` or a population of rows."""
    b = np.ascontiguousarray(b, dtype=float)
    if b.ndim == 1:
        return _signsum_one(dx, val, b, indicator)
    return _signsum_pop(dx, val, b, indicator)


# --- LAD --------------------------------------------------------------------

# sign patterns per alternative, ordered (0,0), (1,0), (0,1), (1,1);
# +1 means "index >= 0", -1 means "index <= 0"
LAD_PATTERNS = np.array([
    [[-1, -1, -1], [1, 1, 1]],
    [[1, -1, -1], [-1, 1, 1]],
    [[-1, 1, -1], [1, -1, 1]],
    [[1, 1, 1], [-1, -1, -1]],
], dtype=np.int64)


@njit(cache=True)
def _holds(u, sign):
    if sign > 0:
        return u >= 0.0
    return u <= 0.0


@njit(cache=True)
def _lad_one(u1, u2, u3, dp, use, patterns):
    """Sum of debiased LAD losses over pairs and the alternatives flagged in ``use``."""
    n = u1.shape[0]
    acc = 0.0
    for p in range(n):
        for d in range(4):
            if not use[d]:
                continue
            ip = (_holds(u1[p], patterns[d, 0, 0]) and _holds(u2[p], patterns[d, 0, 1])
                  and _holds(u3[p], patterns[d, 0, 2]))
            im = (_holds(u1[p], patterns[d, 1, 0]) and _holds(u2[p], patterns[d, 1, 1])
                  and _holds(u3[p], patterns[d, 1, 2]))
            delta = dp[p, d]
            if ip and im:
                acc += 2.0 * (abs(1.0 - delta) + abs(1.0 + delta)) - 1.0
            elif ip:
                acc += abs(1.0 - delta) + abs(delta)
            elif im:
                acc += abs(delta) + abs(1.0 + delta)
            else:
                acc += 1.0
    return acc


@njit(cache=True)
def _lad_pop(x1, x2, w, s, dp, pop, k1, k2, k3, est_rb, use, patterns):
    n = x1.shape[0]
    out = np.empty(pop.shape[0])
    u1 = np.empty(n)
    u2 = np.empty(n)
    u3 = np.empty(n)
    for q in range(pop.shape[0]):
        th = pop[q]
        o_g = k1
        o_r1 = k1 + k2
        o_r2 = o_r1 + k3
        o_rb = o_r2 + k3
        for p in range(n):
            a = 0.0
            b = 0.0
            for j in range(k1):
                a += x1[p, j] * th[j]
                b += x2[p, j] * th[j]
            c = 0.0
            for j in range(k2):
                c += w[p, j] * th[o_g + j]
            for j in range(k3):
                a += s[p, j] * th[o_r1 + j]
                b += s[p, j] * th[o_r2 + j]
                if est_rb:
                    c += s[p, j] * th[o_rb + j]
            u1[p] = a
            u2[p] = b
            u3[p] = c
        out[q] = _lad_one(u1, u2, u3, dp, use, patterns)
    return out


def lad_sum(x1, x2, w, s, dp, pop, est_rho_b, use=None):
    """Debiased LAD criterion for each full parameter row of ``pop``.

    Rows are laid out ``(beta, gamma, rho1, rho2[, rho_b])``.
    """
    pop = np.atleast_2d(np.ascontiguousarray(pop, dtype=float))
    use = np.ones(4, dtype=np.bool_) if use is None else np.asarray(use, dtype=np.bool_)
    return _lad_pop(x1, x2, w, s, dp, pop, x1.shape[1], w.shape[1], s.shape[1],
                    bool(est_rho_b), use, LAD_PATTERNS)



@njit(cache=True)
def _pair_loss(a, b, c, dp_row, use, patterns):
    u1 = np.array([a])
    u2 = np.array([b])
    u3 = np.array([c])
    return _lad_one(u1, u2, u3, dp_row.reshape(1, 4), use, patterns)


def lad_table(dp, use=None):
    """Per-pair loss for each strict sign configuration of the three indexes.

    Column ``4*(u1>0) + 2*(u2>0) + (u3>0)``.  Exact zeros are handled
    separately by the evaluator.
    """
    use = np.ones(4, dtype=np.bool_) if use is None else np.asarray(use, dtype=np.bool_)
    dp = np.asarray(dp, dtype=float)
    out = np.empty((dp.shape[0], 8))
    for cfg in range(8):
        sg = [1.0 if (cfg >> k) & 1 else -1.0 for k in (2, 1, 0)]
        u = [np.full(dp.shape[0], v) for v in sg]
        out[:, cfg] = _lad_rows(u[0], u[1], u[2], dp, use, LAD_PATTERNS)
    return np.ascontiguousarray(out)


@njit(cache=True)
def _lad_rows(u1, u2, u3, dp, use, patterns):
    out = np.empty(u1.shape[0])
    for p in range(u1.shape[0]):
        out[p] = _lad_one(u1[p:p + 1], u2[p:p + 1], u3[p:p + 1], dp[p:p + 1], use, patterns)
    return out


def _lad_kernel_source(k1, k2, k3, est_rb):
    """Source of an unrolled criterion kernel for one parameter layout.

    Columns of ``Z`` are ``(x1, x2, w, s)``; rows of ``free`` are the free
    coordinates ``(beta[1:], gamma[1:], rho1, rho2[, rho_b])``.
    """
    o_g = k1 - 1
    o_r1 = o_g + k2 - 1
    o_r2 = o_r1 + k3
    o_rb = o_r2 + k3

    def index(first, k, coef_off, s_off):
        terms = [f"Z[p, {first}]"]
        terms += [f"Z[p, {first + j}] * f[{coef_off + j - 1}]" for j in range(1, k)]
        if s_off is not None:
            terms += [f"Z[p, {2 * k1 + k2 + j}] * f[{s_off + j}]" for j in range(k3)]
        return " + ".join(terms)

    a = index(0, k1, 0, o_r1)
    b = index(k1, k1, 0, o_r2)
    c = index(2 * k1, k2, o_g, o_rb if est_rb else None)
    return f"""
def kernel(Z, dp, table, pop, use, patterns):
    out = np.empty(pop.shape[0])
    for q in range(pop.shape[0]):
        f = pop[q]
        acc = 0.0
        for p in range(Z.shape[0]):
            a = {a}
            b = {b}
            c = {c}
            if a == 0.0 or b == 0.0 or c == 0.0:
                acc += _pair_loss(a, b, c, dp[p], use, patterns)
            else:
                acc += table[p, 4 * (a > 0.0) + 2 * (b > 0.0) + (c > 0.0)]
        out[q] = acc
    return out
"""


@lru_cache(maxsize=None)
def lad_kernel(k1, k2, k3, est_rb):
    """Compiled criterion over free-coordinate rows for the given layout."""
    scope = {"np": np, "_pair_loss": _pair_loss}
    exec(_lad_kernel_source(k1, k2, k3, est_rb), scope)
    return njit(fastmath=False)(scope["kernel"])


# --- one free coordinate ------------------------------------------------------

class SignSumLine:
    """``t -> sum_p val[p] * g(dx[p, 0] + t * dx[p, 1])`` tabulated by sorting.

    With a single free coordinate the criterion is a step function of ``t``
    with breakpoints ``-dx0 / dx1``; after one sort every evaluation is a
    binary search.
    """

    def __init__(self, dx, val, indicator=False):
        a, c = dx[:, 0], dx[:, 1]
        lo = -1.0 if not indicator else 0.0
        flat = c == 0.0
        self.const = float(np.sum(np.where(a[flat] > 0.0, val[flat], lo * val[flat])))
        pos, neg = c > 0.0, c < 0.0
        bp_pos = -a[pos] / c[pos]
        bp_neg = -a[neg] / c[neg]
        o = np.argsort(bp_pos, kind="stable")
        self.bp_pos = bp_pos[o]
        self.cum_pos = np.concatenate([[0.0], np.cumsum(val[pos][o])])
        o = np.argsort(bp_neg, kind="stable")
        self.bp_neg = bp_neg[o]
        self.cum_neg = np.concatenate([[0.0], np.cumsum(val[neg][o])])
        self.lo = lo

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        # positive slope: index > 0 iff breakpoint < t
        k = np.searchsorted(self.bp_pos, t, side="left")
        tot_p = self.cum_pos[-1]
        up = tot_p - self.cum_pos[k]
        down = self.cum_pos[k]
        v = self.const + down + self.lo * up
        # negative slope: index > 0 iff breakpoint > t
        k = np.searchsorted(self.bp_neg, t, side="right")
        tot_n = self.cum_neg[-1]
        v = v + (tot_n - self.cum_neg[k]) + self.lo * self.cum_neg[k]
        return v

    def breakpoints(self, lo, hi):
        bp = np.unique(np.concatenate([self.bp_pos, self.bp_neg]))
        return bp[(bp > lo) & (bp < hi)]

    def best_cell(self, lo, hi, near):
        """Midpoint of the maximizing cell between breakpoints on ``[lo, hi]``.

        Among equally good cells the one closest to ``near`` wins.
        Returns ``(t, value)``.
        """
        bp = self.breakpoints(lo, hi)
        edges = np.concatenate([[lo], bp, [hi]])
        mids = 0.5 * (edges[:-1] + edges[1:])
        vals = self(mids)
        top = vals.max()
        cand = np.flatnonzero(vals >= top - 1e-12 * max(1.0, abs(top)))
        left, right = edges[cand], edges[cand + 1]
        dist = np.where(near < left, left - near, np.where(near > right, near - right, 0.0))
        j = cand[int(np.argmin(dist))]
        return float(mids[j]), float(vals[j])
