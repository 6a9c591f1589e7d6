"""Brute-force checks of the variational formulas by simplex-lattice search.

The lattice over ``Ã_1`` is the set of compositions of ``n`` into ``#Ã_1``
parts.  When ``1/step`` would produce more than ``GridSpec.budget`` points the
initial lattice is coarsened; accuracy then comes from local refinement, which
re-grids a ball of three refined steps around the incumbent while halving the
step down to ``GridSpec.final_step``.  All objectives are concave, so this
converges to the global maximum.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _core, _lattice
from .errors import ModelError
from .model import SpongeModel
from .pressure import BernoulliMeasure

__all__ = [
    "GridSpec",
    "brute_force_Mgamma",
    "brute_force_P",
    "brute_force_minmax",
    "brute_force_prop41",
    "g_values",
]


@dataclass(frozen=True)
class GridSpec:
    step: float = 0.01
    final_step: float = 0.001
    max_cells: int = 6
    budget: int = 300_000
    radius: int = 3
    max_moves: int = 50

    def __post_init__(self):
        if not (0 < self.step <= 1) or not (0 < self.final_step <= self.step):
            raise ModelError("grid steps must satisfy 0 < final_step <= step <= 1")
        if self.radius < 1:
            raise ModelError("refinement radius must be >= 1")


def _n_compositions(n: int, d: int) -> int:
    return math.comb(n + d - 1, d - 1)


class _Objective:
    """``nu -> min_r alpha_r (H(nu) + nu.phi) + sum_l beta[r, l] H(Pi_l nu)`` on ``Ã_1``."""

    def __init__(self, model: SpongeModel, alpha, beta):
        self.model = model
        self.cells = model.support(1)
        self.d = len(self.cells)
        self.phi = np.log(model.marginals[self.cells])
        self.alpha = np.ascontiguousarray(alpha, dtype=np.float64)
        self.beta = np.ascontiguousarray(beta, dtype=np.float64).reshape(len(self.alpha), -1)
        proj = [model.chain.project(1, j)[self.cells] for j in range(2, model.k + 1)]
        self.proj = np.ascontiguousarray(
            np.array(proj, dtype=np.int64).reshape(model.k - 1, self.d)
        )
        self.sizes = np.array([model.chain.size(j) for j in range(2, model.k + 1)], dtype=np.int64)

    def argmax(self, step, base, lo, hi, total):
        base = np.ascontiguousarray(base, dtype=np.float64)
        lo = np.ascontiguousarray(lo, dtype=np.int64)
        hi = np.ascontiguousarray(hi, dtype=np.int64)
        args = (step, base, lo, hi, int(total), self.alpha, self.phi, self.beta, self.proj, self.sizes)
        workers = _core.threads()
        if workers == 1:
            return _core.lattice_argmax(*args)
        # split on the first coordinate; ties resolve to the earliest chunk
        edges = np.linspace(lo[0], hi[0] + 1, workers + 1).astype(np.int64)
        chunks = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: _core.lattice_argmax(*args, first=c), chunks))
        best = (-np.inf, None, 0)
        count = 0
        for val, delta, n in parts:
            count += n
            if delta is not None and (best[1] is None or val > best[0]):
                best = (val, delta, n)
        return best[0], best[1], count

    def evaluate(self, nu):
        return _lattice.evaluate(
            np.atleast_2d(nu), self.alpha, self.phi, self.beta, self.proj, self.sizes
        )


def _initial_n(d: int, grid: GridSpec) -> int:
    n = max(1, round(1.0 / grid.step))
    while n > 1 and _n_compositions(n, d) > grid.budget:
        n -= 1
    return n


def _coarse_lattice(d: int, grid: GridSpec) -> np.ndarray:
    n = _initial_n(d, grid)
    return _lattice.bounded_compositions(np.zeros(d), np.full(d, n), n) / n, n


def _refine(obj: _Objective, nu, value, step, grid: GridSpec):
    """Ball re-gridding around ``nu`` with halving steps; returns ``(value, nu)``."""
    d = obj.d
    if d == 1:
        return value, nu
    r = grid.radius
    lo, hi = np.full(d, -r), np.full(d, r)
    while True:
        step = max(step / 2.0, grid.final_step)
        for _ in range(grid.max_moves):
            val, delta, _ = obj.argmax(step, nu, lo, hi, 0)
            if delta is None or val <= value or not np.any(delta):
                break
            value, nu = val, np.maximum(nu + step * delta, 0.0)
            nu = nu / nu.sum()
        if step <= grid.final_step:
            return value, nu


def _search(obj: _Objective, grid: GridSpec, start=None):
    d = obj.d
    if d > grid.max_cells:
        raise ModelError(f"#Ã_1 = {d} exceeds the oracle guard of {grid.max_cells} cells")
    if start is None:
        n = _initial_n(d, grid)
        val, delta, _ = obj.argmax(1.0 / n, np.zeros(d), np.zeros(d), np.full(d, n), n)
        nu = delta / n
        step = 1.0 / n
    else:
        nu = np.asarray(start, dtype=float)
        val = float(obj.evaluate(nu)[0])
        step = 1.0 / _initial_n(d, grid)
    return _refine(obj, nu, val, step, grid)


def _measure(model: SpongeModel, obj: _Objective, nu) -> BernoulliMeasure:
    p = np.zeros(model.n_cells)
    p[obj.cells] = nu
    return BernoulliMeasure(1, p / p.sum(), model.names(1))


def _mgamma_rows(model: SpongeModel):
    g = model.gamma
    k = model.k
    alpha = np.array([g.B(i) for i in range(1, k + 1)])
    beta = np.array([[g[j] if j > i else 0.0 for j in range(2, k + 1)] for i in range(1, k + 1)])
    return alpha, beta


def g_values(model: SpongeModel, nu: BernoulliMeasure) -> np.ndarray:
    """``(g_1(nu), ..., g_k(nu))`` for a measure on ``A_1`` supported on ``Ã_1``."""
    alpha, beta = _mgamma_rows(model)
    out = []
    for r in range(model.k):
        obj = _Objective(model, alpha[r : r + 1], beta[r : r + 1])
        out.append(float(obj.evaluate(nu.probs[obj.cells])[0]))
    return np.array(out)


def brute_force_Mgamma(model: SpongeModel, grid: GridSpec | None = None):
    """``max_nu min_i g_i(nu)`` over the simplex on ``Ã_1``; returns ``(value, argmax)``."""
    grid = grid or GridSpec()
    alpha, beta = _mgamma_rows(model)
    obj = _Objective(model, alpha, beta)
    val, nu = _search(obj, grid)
    return val, _measure(model, obj, nu)


def _combined_rows(model: SpongeModel, q):
    q = np.asarray(q, dtype=float)
    k = model.k
    if q.shape != (k,) or np.any(q < -1e-15) or abs(q.sum() - 1) > 1e-9:
        raise ModelError(f"q must be a probability vector of length {k}")
    alpha, beta = _mgamma_rows(model)
    return q @ alpha, q @ beta


def brute_force_P(model: SpongeModel, q, grid: GridSpec | None = None, start=None):
    """``sup_nu sum_i q_i g_i(nu)`` by lattice search; returns ``(value, argmax)``."""
    grid = grid or GridSpec()
    a, b = _combined_rows(model, q)
    obj = _Objective(model, np.array([a]), b[None, :])
    val, nu = _search(obj, grid, start)
    return val, _measure(model, obj, nu)


def brute_force_minmax(model: SpongeModel, grid: GridSpec | None = None, q_step: float = 0.05):
    """``min_q P(q)`` over a refined lattice on the k-simplex; returns ``(value, q)``.

    Coarse stage: every ``g_i`` is tabulated once on the coarse ``nu``-lattice
    and ``P(q)`` is read off as a maximum of linear forms.  Refinement evaluates
    ``P`` by warm-started lattice search around the coarse argmax.
    """
    grid = grid or GridSpec()
    k = model.k
    alpha, beta = _mgamma_rows(model)
    obj = _Objective(model, alpha, beta)
    if obj.d > grid.max_cells:
        raise ModelError(f"#Ã_1 = {obj.d} exceeds the oracle guard of {grid.max_cells} cells")
    pts, _ = _coarse_lattice(obj.d, grid)
    G = np.stack(
        [
            _Objective(model, alpha[r : r + 1], beta[r : r + 1]).evaluate(pts)
            for r in range(k)
        ],
        axis=1,
    )
    nq = max(1, round(1.0 / q_step))
    qs = _lattice.bounded_compositions(np.zeros(k), np.full(k, nq), nq) / nq
    coarse = (G @ qs.T).max(axis=0)
    q = qs[int(np.argmin(coarse))]

    cache: dict[tuple, float] = {}

    def P(qv):
        key = tuple(np.round(qv, 12))
        if key not in cache:
            start = pts[int(np.argmax(G @ qv))]
            cache[key] = brute_force_P(model, qv, grid, start=start)[0]
        return cache[key]

    best = P(q)
    step = 1.0 / nq
    r = grid.radius
    while True:
        step = max(step / 2.0, grid.final_step)
        for _ in range(grid.max_moves):
            deltas = _lattice.bounded_compositions(np.full(k, -r), np.full(k, r), 0)
            cands = q[None, :] + step * deltas
            cands = cands[np.all(cands >= -1e-12, axis=1)]
            cands = np.maximum(cands, 0.0)
            cands /= cands.sum(axis=1, keepdims=True)
            vals = np.array([P(c) for c in cands])
            j = int(np.argmin(vals))
            if vals[j] >= best:
                break
            best, q = float(vals[j]), cands[j]
        if step <= grid.final_step:
            return best, q


def brute_force_prop41(
    model: SpongeModel, level: int, theta_step: float = 0.001, grid: GridSpec | None = None
):
    """Maximise ``min(dim_e(mu), h_{nu_i})`` over the family ``nu_{i,theta} ∝ E(N_b)^theta``.

    Returns ``(value, theta, nu)``; when ``#Ã_i`` passes the guard a simplex
    lattice over all of ``Ã_i`` is searched too and the larger value is kept.
    """
    model.chain._check_level(level)
    sup = model.support(level)
    logc = np.log(model.counts(level)[sup])
    thetas = np.linspace(0.0, 1.0, int(round(1.0 / theta_step)) + 1)
    logits = thetas[:, None] * logc[None, :]
    logits -= logits.max(axis=1, keepdims=True)
    nus = np.exp(logits)
    nus /= nus.sum(axis=1, keepdims=True)
    ent = -np.sum(np.where(nus > 0, nus * np.log(np.where(nus > 0, nus, 1.0)), 0.0), axis=1)
    vals = np.minimum(ent + nus @ logc, ent)
    j = int(np.argmax(vals))
    value, theta, best = float(vals[j]), float(thetas[j]), nus[j]

    grid = grid or GridSpec()
    if 1 < len(sup) <= grid.max_cells:
        # treat Ã_i as a one-level chain: objective min(H + nu.log c, H)
        sub = _Prop41Objective(logc)
        val, nu = _search(sub, grid)
        if val > value:
            value, best = val, nu
    p = np.zeros(model.chain.size(level))
    p[sup] = best
    return value, theta, BernoulliMeasure(level, p / p.sum(), model.names(level))


class _Prop41Objective(_Objective):
    def __init__(self, logc):
        self.d = len(logc)
        self.cells = np.arange(self.d)
        self.phi = np.ascontiguousarray(logc, dtype=np.float64)
        # rows: (H + nu.phi) and H; the second uses a zero potential via a one-letter level
        self.alpha = np.array([1.0, 0.0])
        self.beta = np.array([[0.0, 0.0], [0.0, 1.0]])
        self.proj = np.ascontiguousarray(
            np.stack([np.zeros(self.d, dtype=np.int64), np.arange(self.d, dtype=np.int64)])
        )
        self.sizes = np.array([1, self.d], dtype=np.int64)
