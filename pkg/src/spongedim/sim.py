"""Monte Carlo percolation, box counting, cascades and local dimensions.

Explicit trees are expanded level by level with a counter-based hash RNG:
every node owns a 64-bit key, the draws of its digit set ``A(u)`` are hashes
of that key, and children keys are derived from it.  Hence the same seed gives
the same tree regardless of batching or worker count, and a percolation tree
and a cascade sampled with the same seed share their ``A`` draws.

Box counting defaults to an aggregated process.  Nodes sharing an address
prefix are exchangeable, so only the number of surviving nodes per prefix is
tracked and the number of children with a given projected letter is drawn as
a sum of binomials (independent cells) or from a multinomial over atoms
(mixtures).  This is exact in distribution and far cheaper than expanding
every node; the explicit-node route remains available as ``method="tree"``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import _core, _tree
from .errors import BudgetExceeded, DegenerateError, ModelError
from .measures import WeightLaw, measure_profile
from .model import GammaVector, SpongeModel, extinction_probability

__all__ = [
    "BallIndexer",
    "SimEstimate",
    "SurvivalTree",
    "sample_K",
    "sample_cascade",
    "empirical_survival",
    "empirical_box_dim",
    "empirical_local_dimension",
    "empirical_Lq",
    "lq_secant",
    "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 50_000_000
SALT_SPINE = 0x5851F42D4C957F2D
SALT_SPINE_PICK = 0x14057B7EF767814F


class BallIndexer:
    """Depth schedule ``l_i(n) = ceil(B_i n / gamma_1)`` and ball addresses."""

    def __init__(self, gamma: GammaVector, n: int):
        if n < 1:
            raise ModelError("ball scale n must be >= 1")
        self.gamma = gamma
        self.n = n
        # guard against ceil(14.000000000001) from rounding in B_i / gamma_1
        self.ell = [0] + [
            int(math.ceil(gamma.B(i) * n / gamma[1] - 1e-9)) for i in range(1, gamma.k + 1)
        ]
        self.ell[1] = n

    @property
    def depth(self) -> int:
        return self.ell[-1]

    def segment(self, t: int) -> int:
        """Level ``i`` whose block ``(l_{i-1}, l_i]`` contains symbol position ``t``."""
        for i in range(1, len(self.ell)):
            if t <= self.ell[i]:
                return i
        raise ModelError(f"position {t} beyond depth {self.depth}")

    def address(self, chain, cells: Sequence[int]) -> tuple:
        """Address ``(U_1, ..., U_k)`` of a cell word of length at least ``l_k(n)``."""
        out = []
        for i in range(1, len(self.ell)):
            proj = chain.project(1, i)
            out.append(tuple(int(proj[c]) for c in cells[self.ell[i - 1] : self.ell[i]]))
        return tuple(out)


@dataclass
class SimEstimate:
    """Per-``n`` statistics, a least-squares slope and its ``±2 stderr`` band."""

    statistic: str
    ns: list[int]
    points: list[tuple[int, int, float]]
    slope: float
    stderr: float
    intercept: float
    estimate: float
    replicates: int
    seed: int
    truncated: bool = False
    skipped: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def ci(self) -> tuple[float, float]:
        return (self.estimate - 2 * self.stderr, self.estimate + 2 * self.stderr)

    def rows(self):
        """CSV rows ``(replicate, n, statistic, value)``."""
        return [(r, n, self.statistic, v) for r, n, v in self.points]

    def to_json(self) -> dict:
        return {
            "statistic": self.statistic,
            "ns": self.ns,
            "slope": self.slope,
            "stderr": self.stderr,
            "estimate": self.estimate,
            "ci": list(self.ci),
            "replicates": self.replicates,
            "seed": self.seed,
            "truncated": self.truncated,
            "skipped": self.skipped,
            **{k: v for k, v in self.extra.items()},
        }


def _regress(xs, ys):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(np.unique(xs)) < 2:
        raise ModelError("regression needs at least two distinct scales n")
    fit = stats.linregress(xs, ys)
    stderr = float(fit.stderr) if np.isfinite(fit.stderr) else 0.0
    return float(fit.slope), stderr, float(fit.intercept)


def _map_replicates(fn: Callable[[int], object], replicates: int):
    workers = min(_core.threads(), max(1, replicates))
    if workers == 1:
        return [fn(r) for r in range(replicates)]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, range(replicates)))


# -- explicit trees ---------------------------------------------------------


class _Expander:
    """Model data laid out for the expansion kernel."""

    def __init__(self, model: SpongeModel, weights: np.ndarray | None = None):
        d = model.n_cells
        self.d = d
        if model.cells.kind == "independent":
            self.mode = 0
            self.p = np.ascontiguousarray(model.marginals, dtype=np.float64)
            self.cum = np.ones(1)
            self.masks = np.zeros((1, d), dtype=np.uint8)
        else:
            self.mode = 1
            self.p = np.ascontiguousarray(model.marginals, dtype=np.float64)
            cum = np.cumsum(model.atom_probs)
            cum[-1] = 1.0
            self.cum = np.ascontiguousarray(cum)
            self.masks = np.ascontiguousarray(model.atom_masks.astype(np.uint8))
        self.w = np.ascontiguousarray(np.ones(d) if weights is None else weights, dtype=np.float64)
        self.child_salts = _tree.salts(d, _tree.SALT_CHILD)
        self.unif_salts = _tree.salts(d + 1, _tree.SALT_UNIF)

    def __call__(self, keys, q, limit):
        return _core.expand(
            np.ascontiguousarray(keys, dtype=np.uint64),
            np.ascontiguousarray(q, dtype=np.float64),
            self.mode,
            self.p,
            self.cum,
            self.masks,
            self.w,
            self.child_salts,
            self.unif_salts,
            int(limit),
        )


@dataclass
class SurvivalTree:
    """Surviving prefix tree: per depth, arrays of keys, parent index, cell and weight."""

    keys: list[np.ndarray]
    parent: list[np.ndarray]
    cell: list[np.ndarray]
    q: list[np.ndarray]
    depth: int
    truncated: bool

    @property
    def completed(self) -> int:
        return len(self.keys) - 1

    @property
    def extinct(self) -> bool:
        return len(self.keys[-1]) == 0

    def size(self, t: int) -> int:
        return len(self.keys[t])

    def Y(self, t: int | None = None) -> float:
        """Total weight ``Y_t`` at depth ``t`` (defaults to the deepest completed level)."""
        t = self.completed if t is None else t
        return float(self.q[t].sum())

    def cells_of(self, t: int) -> np.ndarray:
        """Cell words of all depth-``t`` nodes, shape ``(size(t), t)``."""
        words = np.zeros((self.size(t), t), dtype=np.int64)
        idx = np.arange(self.size(t))
        for s in range(t, 0, -1):
            words[:, s - 1] = self.cell[s][idx]
            idx = self.parent[s][idx]
        return words


def _grow(model, depth, seed, replicate, budget, weights=None, stream=()):
    if depth < 0:
        raise ModelError("depth must be non-negative")
    exp = _Expander(model, weights)
    root = np.array([_tree.root_key(seed, replicate, *stream)], dtype=np.uint64)
    keys = [root]
    q = [np.ones(1)]
    parent = [np.zeros(1, dtype=np.int64)]
    cell = [np.zeros(1, dtype=np.int32)]
    used = 1
    truncated = False
    for _ in range(depth):
        out = exp(keys[-1], q[-1], budget - used)
        if out is None:
            truncated = True
            break
        ck, cq, cp, cc = out
        keys.append(ck)
        q.append(cq)
        parent.append(cp)
        cell.append(cc)
        used += len(ck)
        if len(ck) == 0:
            # extinct: the remaining levels are empty
            for _ in range(depth - len(keys) + 1):
                keys.append(ck)
                q.append(cq)
                parent.append(cp)
                cell.append(cc)
            break
    return SurvivalTree(keys, parent, cell, q, depth, truncated)


def sample_K(
    model: SpongeModel, depth: int, seed: int, replicate: int = 0, budget: int = DEFAULT_BUDGET
) -> SurvivalTree:
    """Surviving prefix tree of ``K_depth``; ``truncated`` flags an exhausted node budget."""
    return _grow(model, depth, seed, replicate, budget)


def sample_cascade(
    model: SpongeModel,
    law: WeightLaw,
    depth: int,
    seed: int,
    replicate: int = 0,
    budget: int = DEFAULT_BUDGET,
) -> SurvivalTree:
    """Percolation tree with Mandelbrot weights ``Q(u)``; same ``A`` draws as :func:`sample_K`."""
    prof = measure_profile(law, model)
    prof.require_nondegenerate()
    return _grow(model, depth, seed, replicate, budget, weights=prof.weights)


def empirical_survival(
    model: SpongeModel, depth: int, replicates: int, seed: int, budget: int = DEFAULT_BUDGET
) -> dict:
    """Fraction of replicates with ``K_depth`` non-empty versus ``1 - q_extinct``."""
    model.require_supercritical()

    def one(r):
        tree = sample_K(model, depth, seed, r, budget)
        if tree.truncated:
            return True  # the budget only binds on trees that are far from extinct
        return not tree.extinct

    alive = np.array(_map_replicates(one, replicates), dtype=bool)
    freq = float(alive.mean())
    theory = 1.0 - extinction_probability(model)
    se = math.sqrt(max(theory * (1 - theory), 1e-300) / replicates)
    return {
        "frequency": freq,
        "theory": theory,
        "se": se,
        "z": (freq - theory) / se if se > 0 else 0.0,
        "replicates": replicates,
        "depth": depth,
        "seed": seed,
        "flags": alive.astype(int).tolist(),
    }


# -- addresses on explicit trees ---------------------------------------------


def _address_groups(model: SpongeModel, tree: SurvivalTree, idx: BallIndexer) -> np.ndarray:
    """Ball-address group id of every node at depth ``l_k(n)``."""
    gid = np.zeros(1, dtype=np.int64)
    for t in range(1, idx.depth + 1):
        i = idx.segment(t)
        letters = model.chain.project(1, i)[tree.cell[t]]
        comb = gid[tree.parent[t]] * model.chain.size(i) + letters
        _, gid = np.unique(comb, return_inverse=True)
        gid = gid.astype(np.int64).ravel()
    return gid


# -- box counting ------------------------------------------------------------


def _independent_marginals(model: SpongeModel):
    """Cell survival probabilities when cells are independent (a one-atom mixture counts)."""
    if model.cells.kind == "independent":
        return model.marginals
    if len(model.atom_probs) == 1:
        return model.atom_masks[0].astype(float)
    return None


def _sum_binomial_pmf(c: int, probs: np.ndarray) -> np.ndarray:
    pmf = np.ones(1)
    support = np.arange(c + 1)
    for p in probs:
        if p == 0.0:
            continue
        pmf = np.convolve(pmf, stats.binom.pmf(support, c, p))
    return pmf


def _box_count_histogram(model: SpongeModel, idx: BallIndexer, rng, p: np.ndarray):
    """Box count for independent cells, tracking only the histogram of group sizes.

    A group is the set of surviving nodes sharing an address prefix.  Given its
    size ``c``, the sizes of its child groups are independent across letters,
    each a sum of binomials, so ``h`` groups of size ``c`` produce a multinomial
    histogram of child sizes per letter.
    """
    chain = model.chain
    sizes = np.ones(1, dtype=np.int64)
    mult = np.ones(1, dtype=np.int64)
    cache: dict[tuple[int, int, int], np.ndarray] = {}
    for t in range(1, idx.depth + 1):
        i = idx.segment(t)
        proj = chain.project(1, i)
        pre = [p[proj == b] for b in range(chain.size(i))]
        acc: dict[int, int] = {}
        for c, h in zip(sizes.tolist(), mult.tolist()):
            for b, probs in enumerate(pre):
                pmf = cache.get((i, b, c))
                if pmf is None:
                    pmf = _sum_binomial_pmf(c, probs)
                    cache[(i, b, c)] = pmf = pmf / pmf.sum()
                if len(pmf) == 1:
                    continue
                draws = rng.multinomial(h, pmf)
                for s in np.flatnonzero(draws[1:]) + 1:
                    acc[int(s)] = acc.get(int(s), 0) + int(draws[s])
        if not acc:
            return 0, False
        sizes = np.fromiter(acc.keys(), dtype=np.int64)
        mult = np.fromiter(acc.values(), dtype=np.int64)
    return int(mult.sum()), False


def _box_count_aggregate(model: SpongeModel, idx: BallIndexer, rng, budget: int):
    """Number of distinct depth-``l_k(n)`` ball addresses, by aggregated counts.

    Returns ``(count, truncated)``.
    """
    p_ind = _independent_marginals(model)
    if p_ind is not None:
        return _box_count_histogram(model, idx, rng, p_ind)
    chain = model.chain
    counts = np.ones(1, dtype=np.int64)
    p = model.marginals
    for t in range(1, idx.depth + 1):
        i = idx.segment(t)
        proj = chain.project(1, i)
        size = chain.size(i)
        if model.cells.kind == "independent":
            draws = rng.binomial(counts[:, None], p[None, :])
        else:
            atoms = rng.multinomial(counts, model.atom_probs)
            draws = atoms @ model.atom_masks.astype(np.int64)
        child = np.zeros((len(counts), size), dtype=np.int64)
        np.add.at(child.T, proj, draws.T)
        counts = child[child > 0]
        if len(counts) == 0:
            return 0, False
        if len(counts) * model.n_cells > budget:
            return None, True
    return len(counts), False


def _box_count_tree(model: SpongeModel, idx: BallIndexer, seed, replicate, budget):
    tree = sample_K(model, idx.depth, seed, replicate, budget)
    if tree.truncated:
        return None, True
    if tree.extinct:
        return 0, False
    gid = _address_groups(model, tree, idx)
    return int(len(np.unique(gid))), False


def empirical_box_dim(
    model: SpongeModel,
    n_range: Sequence[int],
    replicates: int,
    seed: int,
    method: str = "aggregate",
    budget: int = DEFAULT_BUDGET,
) -> SimEstimate:
    """Slope of ``log #{B in F_n : B ∩ K ≠ ∅}`` against ``n / gamma_1``."""
    model.require_supercritical()
    ns = sorted(int(n) for n in n_range)
    if method not in ("aggregate", "tree"):
        raise ModelError(f"unknown box-counting method {method!r}")
    g1 = model.gamma[1]

    def one(r):
        out = []
        for n in ns:
            idx = BallIndexer(model.gamma, n)
            if method == "aggregate":
                rng = np.random.default_rng([seed, r, n])
                c, trunc = _box_count_aggregate(model, idx, rng, budget)
            else:
                c, trunc = _box_count_tree(model, idx, seed, r, budget)
            out.append((n, c, trunc))
        return out

    results = _map_replicates(one, replicates)
    points, xs, ys = [], [], []
    truncated = False
    skipped = 0
    for r, res in enumerate(results):
        for n, c, trunc in res:
            truncated |= trunc
            if c is None or c == 0:
                skipped += 1
                continue
            points.append((r, n, float(c)))
            xs.append(n / g1)
            ys.append(math.log(c))
    if not points:
        raise DegenerateError(
            "every replicate died out or was truncated; increase E(#A), replicates or the budget"
        )
    slope, se, icpt = _regress(xs, ys)
    return SimEstimate("box_count", ns, points, slope, se, icpt, slope, replicates, seed, truncated, skipped)


# -- local dimension along the spine -----------------------------------------


class _Spine:
    """Size-biased spine of a cascade (Peyrière measure), built lazily from node keys.

    Along the spine the digit set is drawn with density proportional to
    ``sum_{a in A} W_a`` and the next spine cell is chosen with probability
    proportional to ``W_a``; everything off the spine is unbiased.
    """

    def __init__(self, model: SpongeModel, exp: _Expander, w: np.ndarray, key: int):
        self.model = model
        self.exp = exp
        self.w = w
        self.keys = [np.uint64(key)]
        self.cells: list[int] = []
        self.children: list[np.ndarray] = []
        self.q = [1.0]
        p = model.marginals
        self.nu1 = p * w / np.sum(p * w)
        if model.cells.kind == "mixture":
            masses = model.atom_probs * (model.atom_masks.astype(float) @ w)
            self.atom_cum = np.cumsum(masses / masses.sum())
            self.atom_cum[-1] = 1.0

    def _uniform(self, key, salt):
        return float(_tree.uniforms(np.array([key], dtype=np.uint64), np.array([_tree.mix_int(salt)], dtype=np.uint64))[0, 0])

    def extend(self, depth: int):
        while len(self.cells) < depth:
            key = self.keys[-1]
            u = self._uniform(key, SALT_SPINE)
            model = self.model
            if model.cells.kind == "independent":
                cum = np.cumsum(self.nu1)
                cum[-1] = 1.0
                star = int(np.searchsorted(cum, u, side="right"))
                others = _tree.uniforms(np.array([key], dtype=np.uint64), self.exp.unif_salts[: self.exp.d])[0]
                alive = others < model.marginals
                alive[star] = True
            else:
                atom = min(int(np.searchsorted(self.atom_cum, u, side="right")), len(self.atom_cum) - 1)
                alive = model.atom_masks[atom].copy()
                ww = np.where(alive, self.w, 0.0)
                cum = np.cumsum(ww / ww.sum())
                cum[-1] = 1.0
                v = self._uniform(key, SALT_SPINE_PICK)
                star = int(np.searchsorted(cum, v, side="right"))
            self.children.append(np.flatnonzero(alive))
            self.cells.append(star)
            self.q.append(self.q[-1] * self.w[star])
            self.keys.append(_tree.mix(np.array([key ^ self.exp.child_salts[star]], dtype=np.uint64))[0])

    def ball_mass(self, idx: BallIndexer) -> float:
        """Sum of ``Q`` over the depth-``l_k(n)`` nodes sharing the spine's ball address."""
        n = idx.n
        self.extend(idx.depth)
        chain = self.model.chain
        # frontier of off-spine class members (keys, weights); the spine node is tracked apart
        fk = np.empty(0, dtype=np.uint64)
        fq = np.empty(0, dtype=np.float64)
        for t in range(n + 1, idx.depth + 1):
            i = idx.segment(t)
            proj = chain.project(1, i)
            target = proj[self.cells[t - 1]]
            # spine's siblings matching the target letter
            sib = self.children[t - 1]
            sib = sib[(proj[sib] == target) & (sib != self.cells[t - 1])]
            sk = _tree.mix(np.full(len(sib), self.keys[t - 1], dtype=np.uint64) ^ self.exp.child_salts[sib])
            sq = self.q[t - 1] * self.w[sib]
            if len(fk):
                out = self.exp(fk, fq, 1 << 62)
                ck, cq, _, cc = out
                keep = proj[cc] == target
                fk, fq = ck[keep], cq[keep]
            fk = np.concatenate([fk, sk])
            fq = np.concatenate([fq, sq])
        return float(self.q[idx.depth] + fq.sum())


def empirical_local_dimension(
    model: SpongeModel,
    law: WeightLaw,
    n_range: Sequence[int],
    points_per_replicate: int,
    seed: int,
    replicates: int = 1,
) -> SimEstimate:
    """Slope of ``-log mu(B(x, e^{-n/gamma_1}))`` against ``n / gamma_1`` at mu-typical ``x``.

    Each point is an independent draw from the Peyrière measure (a cascade
    together with a mu-distributed point), realised as a size-biased spine.
    The ball mass is the sum of ``Q`` over the address class at depth
    ``l_k(n)``; the martingale limits ``Y`` below that depth are replaced by 1.
    """
    prof = measure_profile(law, model)
    prof.require_nondegenerate()
    w = prof.weights
    exp = _Expander(model, w)
    ns = sorted(int(n) for n in n_range)
    idxs = [BallIndexer(model.gamma, n) for n in ns]
    g1 = model.gamma[1]

    def one(r):
        out = []
        for j in range(points_per_replicate):
            spine = _Spine(model, exp, w, _tree.root_key(seed, r, j + 1))
            for n, idx in zip(ns, idxs):
                out.append((n, spine.ball_mass(idx)))
        return out

    results = _map_replicates(one, replicates)
    points, xs, ys = [], [], []
    for r, res in enumerate(results):
        for n, m in res:
            points.append((r, n, m))
            xs.append(n / g1)
            ys.append(math.log(m))
    slope, se, icpt = _regress(xs, ys)
    return SimEstimate(
        "ball_mass", ns, points, slope, se, icpt, -slope, replicates, seed,
        extra={"points_per_replicate": points_per_replicate},
    )


# -- L^q spectrum ----------------------------------------------------------------


def _subtree_mass(tree: SurvivalTree, t: int) -> np.ndarray:
    """``Q``-mass below each depth-``t`` node, measured at the deepest level."""
    mass = tree.q[tree.completed].copy()
    for s in range(tree.completed, t, -1):
        up = np.zeros(tree.size(s - 1))
        np.add.at(up, tree.parent[s], mass)
        mass = up
    return mass


def empirical_Lq(
    model: SpongeModel,
    law: WeightLaw,
    q_list: Sequence[float],
    n_range: Sequence[int],
    replicates: int,
    seed: int,
    budget: int = DEFAULT_BUDGET,
) -> dict[float, SimEstimate]:
    """``tau(q)`` estimates: minus the slope of ``log Z_{q,n}`` against ``n / gamma_1``.

    ``mu(B)`` is the normalised ``Q``-mass below the ball's depth-``l_k(n)``
    nodes, measured at the horizon ``l_k(max n)``.
    """
    qs = [float(q) for q in q_list]
    if any(not 0 < q <= 2 for q in qs):
        raise ModelError("q values must lie in (0, 2]")
    prof = measure_profile(law, model)
    prof.require_nondegenerate()
    ns = sorted(int(n) for n in n_range)
    idxs = [BallIndexer(model.gamma, n) for n in ns]
    horizon = idxs[-1].depth
    g1 = model.gamma[1]

    def one(r):
        tree = sample_cascade(model, law, horizon, seed, r, budget)
        if tree.truncated:
            return None, True
        total = tree.Y()
        if total <= 0:
            return None, False
        out = []
        for n, idx in zip(ns, idxs):
            mass = _subtree_mass(tree, idx.depth) / total
            gid = _address_groups(model, tree, idx)
            balls = np.bincount(gid, weights=mass)
            balls = balls[balls > 0]
            out.append((n, {q: float(np.sum(balls**q)) for q in qs}))
        return out, False

    results = _map_replicates(one, replicates)
    truncated = any(t for _, t in results)
    estimates = {}
    for q in qs:
        points, xs, ys = [], [], []
        skipped = 0
        for r, (res, _) in enumerate(results):
            if res is None:
                skipped += 1
                continue
            for n, zs in res:
                points.append((r, n, zs[q]))
                xs.append(n / g1)
                ys.append(math.log(zs[q]))
        if not points:
            raise DegenerateError("every cascade replicate died out or was truncated")
        slope, se, icpt = _regress(xs, ys)
        estimates[q] = SimEstimate(
            f"Z_q={q:g}", ns, points, slope, se, icpt, -slope, replicates, seed, truncated, skipped
        )
    return estimates


def lq_secant(estimates: dict[float, SimEstimate], lo: float = 0.9, hi: float = 1.1) -> tuple[float, float]:
    """Secant ``(tau(hi) - tau(lo)) / (hi - lo)`` and its standard error."""
    a, b = estimates[lo], estimates[hi]
    val = (b.estimate - a.estimate) / (hi - lo)
    se = math.hypot(a.stderr, b.stderr) / (hi - lo)
    return val, se
