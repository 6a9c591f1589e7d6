"""Pure numpy simplex-lattice maximisation (fallback for the compiled kernel)."""

from __future__ import annotations

import numpy as np

NEG_TOL = 1e-12


def bounded_compositions(lo, hi, total, first=None):
    """All integer vectors with ``lo <= x <= hi`` and ``sum(x) == total``, in lexicographic order.

    ``first`` optionally restricts the first coordinate to a ``(start, stop)`` range.
    """
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    d = len(lo)
    rest_min = np.concatenate([np.cumsum(lo[::-1])[::-1][1:], [0]])
    rest_max = np.concatenate([np.cumsum(hi[::-1])[::-1][1:], [0]])
    rows = np.zeros((1, 0), dtype=np.int64)
    sums = np.zeros(1, dtype=np.int64)
    for j in range(d):
        a = np.maximum(lo[j], total - sums - rest_max[j])
        b = np.minimum(hi[j], total - sums - rest_min[j])
        if j == 0 and first is not None:
            a = np.maximum(a, first[0])
            b = np.minimum(b, first[1] - 1)
        cnt = np.maximum(b - a + 1, 0)
        idx = np.repeat(np.arange(len(rows)), cnt)
        offs = np.arange(len(idx)) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        vals = a[idx] + offs
        rows = np.concatenate([rows[idx], vals[:, None]], axis=1)
        sums = sums[idx] + vals
    return rows


def _xlogx(x):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def evaluate(nu, alpha, phi, beta, proj, sizes):
    """Objective ``min_r alpha_r (H(nu) + nu.phi) + sum_l beta[r, l] H(P_l nu)`` per row."""
    base = -_xlogx(nu).sum(axis=1) + nu @ phi
    hs = []
    for lvl in range(len(sizes)):
        inc = np.zeros((nu.shape[1], sizes[lvl]))
        inc[np.arange(nu.shape[1]), proj[lvl]] = 1.0
        hs.append(-_xlogx(nu @ inc).sum(axis=1))
    hs = np.stack(hs, axis=1) if hs else np.zeros((len(nu), 0))
    vals = alpha[None, :] * base[:, None] + hs @ beta.T
    return vals.min(axis=1)


def lattice_argmax(step, base, lo, hi, total, alpha, phi, beta, proj, sizes, first=None):
    """Best lattice point ``base + step * delta``; returns ``(value, delta, n_points)``."""
    deltas = bounded_compositions(lo, hi, total, first)
    if len(deltas) == 0:
        return -np.inf, None, 0
    nu = base[None, :] + step * deltas
    ok = np.all(nu >= -NEG_TOL, axis=1)
    if not ok.any():
        return -np.inf, None, 0
    deltas = deltas[ok]
    nu = np.maximum(nu[ok], 0.0)
    vals = evaluate(nu, alpha, phi, beta, proj, sizes)
    j = int(np.argmax(vals))
    return float(vals[j]), deltas[j].copy(), int(len(vals))
