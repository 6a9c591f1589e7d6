"""Combinatorial skeleton of a random sponge and the law of its digit set.

A model is a chain of alphabets ``A_1 -> A_2 -> ... -> A_k`` linked by
one-block factor maps, a vector of non-negative weights ``gamma`` (the
anisotropy of the ultrametric), and the law of the random subset ``A`` of
``A_1`` that drives the percolation.  Levels are 1-based throughout the
public API, matching the usual mathematical indexing.

Only two families of laws for ``A`` are supported: independent cells and
finite mixtures of fixed subsets.  Every dimension formula depends on the law
through ``E(N_b^{(i)})``, ``E(#A)`` and the generating function of ``#A``,
all of which are exact for these families.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import DegenerateError, ModelError

__all__ = [
    "FactorChain",
    "GammaVector",
    "CellLaw",
    "SpongeModel",
    "build_euclidean_model",
    "build_symbolic_model",
    "expected_counts",
    "extinction_probability",
    "cell_name",
]


def cell_name(key) -> str:
    """Canonical string name of a symbol; digit tuples become ``"0,1"``."""
    if isinstance(key, str):
        return key
    if isinstance(key, (tuple, list)):
        return ",".join(str(int(d)) for d in key)
    return str(key)


def _frozen(arr) -> np.ndarray:
    out = np.array(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class FactorChain:
    """Alphabets ``A_1..A_k`` and surjective one-block maps ``pi_i: A_i -> A_{i+1}``.

    ``maps[i - 1][a]`` is the index in ``A_{i+1}`` of the image of symbol
    index ``a`` of ``A_i``.
    """

    alphabets: tuple[tuple[str, ...], ...]
    maps: tuple[np.ndarray, ...]

    def __post_init__(self):
        k = len(self.alphabets)
        if k < 1:
            raise ModelError("a factor chain needs at least one alphabet")
        if len(self.maps) != k - 1:
            raise ModelError(f"expected {k - 1} factor maps, got {len(self.maps)}")
        for i, alpha in enumerate(self.alphabets, start=1):
            if len(alpha) < 1:
                raise ModelError(f"alphabet A_{i} is empty")
            if len(set(alpha)) != len(alpha):
                raise ModelError(f"alphabet A_{i} has repeated symbols")
        maps = []
        for i, m in enumerate(self.maps, start=1):
            m = np.asarray(m, dtype=np.int64)
            src, dst = len(self.alphabets[i - 1]), len(self.alphabets[i])
            if m.shape != (src,):
                raise ModelError(f"factor map pi_{i} must be total on A_{i}")
            if m.min() < 0 or m.max() >= dst:
                raise ModelError(f"factor map pi_{i} leaves A_{i + 1}")
            if len(np.unique(m)) != dst:
                raise ModelError(f"factor map pi_{i} is not onto A_{i + 1}")
            maps.append(_frozen(m))
        object.__setattr__(self, "maps", tuple(maps))

    @classmethod
    def from_named(
        cls, alphabets: Sequence[Sequence], factor_maps: Sequence[Mapping]
    ) -> "FactorChain":
        """Build from symbol lists and ``{symbol: image}`` dictionaries."""
        names = tuple(tuple(cell_name(s) for s in alpha) for alpha in alphabets)
        idx_maps = []
        for i, fmap in enumerate(factor_maps, start=1):
            if i >= len(names):
                raise ModelError("more factor maps than alphabet pairs")
            fmap = {cell_name(a): cell_name(b) for a, b in fmap.items()}
            src, dst = names[i - 1], names[i]
            extra = set(fmap) - set(src)
            if extra:
                raise ModelError(f"pi_{i} maps unknown symbols {sorted(extra)}")
            missing = [a for a in src if a not in fmap]
            if missing:
                raise ModelError(f"pi_{i} is not total: missing {missing}")
            lookup = {b: j for j, b in enumerate(dst)}
            try:
                idx_maps.append([lookup[fmap[a]] for a in src])
            except KeyError as exc:
                raise ModelError(f"pi_{i} maps into unknown symbol {exc.args[0]!r}") from None
        return cls(names, tuple(idx_maps))

    @property
    def k(self) -> int:
        return len(self.alphabets)

    def size(self, i: int) -> int:
        return len(self.alphabets[i - 1])

    def project(self, i: int, j: int) -> np.ndarray:
        """Index array of ``Pi_{i,j}: A_i -> A_j`` for ``i <= j``."""
        self._check_level(i)
        self._check_level(j)
        if j < i:
            raise ModelError(f"cannot project from level {i} down to level {j}")
        return self._projections[(i, j)]

    @cached_property
    def _projections(self) -> dict:
        out = {}
        for i in range(1, self.k + 1):
            cur = np.arange(self.size(i))
            out[(i, i)] = _frozen(cur)
            for j in range(i + 1, self.k + 1):
                cur = self.maps[j - 2][cur]
                out[(i, j)] = _frozen(cur)
        return out

    def truncated(self, k: int) -> "FactorChain":
        """The chain restricted to levels ``1..k``."""
        return FactorChain(self.alphabets[:k], self.maps[: k - 1])

    def _check_level(self, i: int):
        if not 1 <= i <= self.k:
            raise ModelError(f"level {i} out of range 1..{self.k}")


@dataclass(frozen=True)
class GammaVector:
    """Anisotropy weights ``gamma_1 > 0``, ``gamma_i >= 0``."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(g) for g in self.values)
        if not vals:
            raise ModelError("gamma must have at least one entry")
        if not all(math.isfinite(g) for g in vals):
            raise ModelError("gamma entries must be finite")
        if vals[0] <= 0:
            raise ModelError("gamma_1 must be positive")
        if any(g < 0 for g in vals[1:]):
            raise ModelError("gamma_i must be non-negative for i >= 2")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_bases(cls, bases: Sequence[int]) -> "GammaVector":
        """Weights of the Euclidean realisation with grid bases ``m_1 >= ... >= m_k``."""
        logs = [np.log(np.longdouble(m)) for m in bases]
        inv = [np.longdouble(1) / lg for lg in logs]
        vals = [inv[0]] + [inv[i] - inv[i - 1] for i in range(1, len(inv))]
        return cls(tuple(max(float(v), 0.0) for v in vals))

    @property
    def k(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> float:
        """1-based access: ``gamma[i]`` is ``gamma_i``."""
        return self.values[i - 1]

    @cached_property
    def partial_sums(self) -> tuple[float, ...]:
        return tuple(itertools.accumulate(self.values))

    def B(self, j: int) -> float:
        """``gamma_1 + ... + gamma_j``."""
        return self.partial_sums[j - 1]

    def theta_tilde(self, i: int) -> float:
        """``B_{i-1} / B_i`` for ``2 <= i <= k``."""
        if not 2 <= i <= self.k:
            raise ModelError(f"theta_tilde is defined for 2 <= i <= {self.k}")
        return self.B(i - 1) / self.B(i)

    def tail(self, i: int) -> tuple[float, ...]:
        """The weight vector ``(B_i, gamma_{i+1}, ..., gamma_k)``."""
        return (self.B(i),) + self.values[i:]

    @property
    def active(self) -> tuple[int, ...]:
        """Levels ``2 <= i <= k`` with ``gamma_i > 0``."""
        return tuple(i for i in range(2, self.k + 1) if self[i] > 0)

    def truncated(self, k: int) -> "GammaVector":
        return GammaVector(self.values[:k])


@dataclass(frozen=True)
class CellLaw:
    """Law of the random digit set ``A``, keyed by cell names.

    ``kind == "independent"``: each cell ``a`` survives independently with
    probability ``p[a]``.  ``kind == "mixture"``: ``A`` equals ``subset`` with
    probability ``prob`` for each atom.
    """

    kind: str
    p: tuple[tuple[str, float], ...] = ()
    atoms: tuple[tuple[frozenset, float], ...] = ()

    def __post_init__(self):
        if self.kind == "independent":
            for name, prob in self.p:
                if not (0.0 <= prob <= 1.0) or not math.isfinite(prob):
                    raise ModelError(f"survival probability of cell {name!r} not in [0,1]")
            names = [n for n, _ in self.p]
            if len(set(names)) != len(names):
                raise ModelError("independent law lists a cell twice")
        elif self.kind == "mixture":
            if not self.atoms:
                raise ModelError("mixture law needs at least one atom")
            total = 0.0
            for subset, prob in self.atoms:
                if not (0.0 <= prob <= 1.0) or not math.isfinite(prob):
                    raise ModelError("mixture atom probability not in [0,1]")
                total += prob
            if abs(total - 1.0) > 1e-12:
                raise ModelError(f"mixture atom probabilities sum to {total!r}, not 1")
        else:
            raise ModelError(f"unknown cell law kind {self.kind!r}")

    @classmethod
    def independent(cls, p: Mapping) -> "CellLaw":
        return cls("independent", p=tuple((cell_name(a), float(v)) for a, v in p.items()))

    @classmethod
    def uniform(cls, cells: Iterable, prob: float) -> "CellLaw":
        return cls.independent({a: prob for a in cells})

    @classmethod
    def mixture(cls, atoms: Iterable[tuple[Iterable, float]]) -> "CellLaw":
        return cls(
            "mixture",
            atoms=tuple(
                (frozenset(cell_name(a) for a in subset), float(prob)) for subset, prob in atoms
            ),
        )

    @classmethod
    def deterministic(cls, subset: Iterable) -> "CellLaw":
        return cls.mixture([(subset, 1.0)])


@dataclass(frozen=True, eq=False)
class SpongeModel:
    """Factor chain + gamma + cell law: the root object of every computation."""

    chain: FactorChain
    gamma: GammaVector
    cells: CellLaw
    allow_single_level: bool = field(default=False, repr=False)

    def __post_init__(self):
        if self.chain.k < 2 and not self.allow_single_level:
            raise ModelError("a sponge needs k >= 2 levels")
        if self.gamma.k != self.chain.k:
            raise ModelError(
                f"gamma has {self.gamma.k} entries but the chain has {self.chain.k} levels"
            )
        cells = self.chain.alphabets[0]
        lookup = {a: j for j, a in enumerate(cells)}
        if self.cells.kind == "independent":
            given = {n for n, _ in self.cells.p}
            if given != set(cells):
                extra = sorted(given - set(cells))
                missing = sorted(set(cells) - given)
                raise ModelError(
                    "independent cell law must be indexed by A_1 exactly"
                    f" (unknown: {extra}, missing: {missing})"
                )
            marg = np.zeros(len(cells))
            for name, prob in self.cells.p:
                marg[lookup[name]] = prob
            masks = None
            probs = None
        else:
            masks = np.zeros((len(self.cells.atoms), len(cells)), dtype=bool)
            probs = np.array([pr for _, pr in self.cells.atoms])
            for r, (subset, _) in enumerate(self.cells.atoms):
                unknown = sorted(subset - set(cells))
                if unknown:
                    raise ModelError(f"mixture atom uses cells outside A_1: {unknown}")
                masks[r, [lookup[a] for a in subset]] = True
            marg = probs @ masks
            masks = _frozen(masks)
            probs = _frozen(probs)
        object.__setattr__(self, "_marginals", _frozen(marg))
        object.__setattr__(self, "_atom_masks", masks)
        object.__setattr__(self, "_atom_probs", probs)

    # -- basic shape -----------------------------------------------------
    @property
    def k(self) -> int:
        return self.chain.k

    @property
    def n_cells(self) -> int:
        return self.chain.size(1)

    @property
    def cell_names(self) -> tuple[str, ...]:
        return self.chain.alphabets[0]

    def names(self, i: int) -> tuple[str, ...]:
        return self.chain.alphabets[i - 1]

    # -- law of A ----------------------------------------------------------
    @property
    def marginals(self) -> np.ndarray:
        """``P(a in A)`` for every cell ``a`` of ``A_1``."""
        return self._marginals

    @property
    def atom_masks(self):
        return self._atom_masks

    @property
    def atom_probs(self):
        return self._atom_probs

    @cached_property
    def expected_size(self) -> float:
        """``E(#A)``."""
        return float(math.fsum(self._marginals))

    @property
    def is_supercritical(self) -> bool:
        return self.expected_size > 1.0

    def require_supercritical(self):
        if not self.is_supercritical:
            raise DegenerateError(
                f"E(#A) = {self.expected_size!r} <= 1: the percolation dies out almost surely"
            )

    def generating_function(self, s: float) -> float:
        """``f(s) = E(s^{#A})``."""
        if self.cells.kind == "independent":
            return float(np.prod(1.0 - self._marginals + self._marginals * s))
        sizes = self._atom_masks.sum(axis=1)
        return float(np.dot(self._atom_probs, np.power(s, sizes)))

    # -- expected counts ---------------------------------------------------
    def counts(self, i: int) -> np.ndarray:
        """``E(N_b^{(i)})`` indexed by the symbols of ``A_i``."""
        return self._counts[i - 1]

    @cached_property
    def _counts(self) -> tuple[np.ndarray, ...]:
        out = []
        for i in range(1, self.k + 1):
            proj = self.chain.project(1, i)
            c = np.zeros(self.chain.size(i))
            np.add.at(c, proj, self._marginals)
            out.append(_frozen(c))
        return tuple(out)

    def support(self, i: int) -> np.ndarray:
        """Indices of the reduced alphabet ``Ã_i = {b : E(N_b^{(i)}) > 0}``."""
        return np.flatnonzero(self.counts(i) > 0)

    @property
    def top_trivial(self) -> bool:
        """True when ``#Ã_k == 1``: level k carries no geometry."""
        return len(self.support(self.k)) == 1

    def reduced(self) -> "SpongeModel":
        """Drop trivial top levels until ``#Ã_k >= 2`` (or a single level remains)."""
        k = self.k
        while k > 1 and len(self.support(k)) == 1:
            k -= 1
        if k == self.k:
            return self
        return SpongeModel(
            self.chain.truncated(k),
            self.gamma.truncated(k),
            self.cells,
            allow_single_level=True,
        )

    # -- log-moment functions psi_i ----------------------------------------
    def psi(self, i: int, theta: float) -> float:
        """``psi_i(theta) = log sum_{b in Ã_i} E(N_b^{(i)})^theta``."""
        c = self.counts(i)
        return float(logsumexp(theta * np.log(c[c > 0])))

    def psi_derivative(self, i: int, theta: float) -> float:
        logc = np.log(self.counts(i)[self.counts(i) > 0])
        w = np.exp(theta * logc - logsumexp(theta * logc))
        return float(np.dot(w, logc))

    def theta_hat(self, i: int, tie_tol: float = 1e-12) -> float:
        """Leftmost minimiser of ``psi_i`` on ``[0, 1]`` (0 when ``psi_i`` is flat)."""
        logc = np.log(self.counts(i)[self.counts(i) > 0])
        if np.all(logc == 0.0):
            return 0.0
        if self.psi_derivative(i, 0.0) >= 0.0:
            return 0.0
        if self.psi_derivative(i, 1.0) <= 0.0:
            root = 1.0
        else:
            root = brentq(lambda t: self.psi_derivative(i, t), 0.0, 1.0, xtol=1e-15, rtol=1e-15)
        if self.psi(i, 0.0) - self.psi(i, root) <= tie_tol:
            return 0.0
        return float(root)


def expected_counts(model: SpongeModel, i: int) -> dict[str, float]:
    """``{b: E(N_b^{(i)})}`` for every symbol of ``A_i``."""
    model.chain._check_level(i)
    return dict(zip(model.names(i), model.counts(i).tolist()))


def extinction_probability(model: SpongeModel, tol: float = 1e-12, max_iter: int = 10_000_000) -> float:
    """Smallest fixed point of ``f(s) = E(s^{#A})`` by monotone iteration from 0."""
    model.require_supercritical()
    s = 0.0
    for _ in range(max_iter):
        nxt = model.generating_function(s)
        if abs(nxt - s) < tol:
            return nxt
        s = nxt
    return s


def _euclidean_chain(bases: Sequence[int]) -> FactorChain:
    k = len(bases)
    alphabets = []
    maps = []
    for i in range(k):
        digits = list(itertools.product(*[range(m) for m in bases[i:]]))
        alphabets.append(tuple(cell_name(d) for d in digits))
        if i + 1 < k:
            nxt = {d: j for j, d in enumerate(itertools.product(*[range(m) for m in bases[i + 1 :]]))}
            maps.append([nxt[d[1:]] for d in digits])
    return FactorChain(tuple(alphabets), tuple(maps))


def build_euclidean_model(bases: Sequence[int], cells: CellLaw) -> SpongeModel:
    """Model of percolation on the ``m_1 x ... x m_k`` grid.

    Cells of ``A_1`` are digit tuples ``(d_1, ..., d_k)`` named ``"d_1,...,d_k"``
    and ``pi_i`` drops the leading digit.
    """
    bases = [int(m) for m in bases]
    if len(bases) < 2:
        raise ModelError("need at least two bases")
    if any(m < 2 for m in bases):
        raise ModelError("every base must be >= 2")
    if any(bases[i] < bases[i + 1] for i in range(len(bases) - 1)):
        raise ModelError(f"bases must be non-increasing, got {bases}")
    return SpongeModel(_euclidean_chain(bases), GammaVector.from_bases(bases), cells)


def build_symbolic_model(
    alphabets: Sequence[Sequence],
    factor_maps: Sequence[Mapping],
    gamma: Sequence[float],
    cells: CellLaw,
) -> SpongeModel:
    """Model from explicit alphabets, factor maps and gamma."""
    chain = FactorChain.from_named(alphabets, factor_maps)
    return SpongeModel(chain, GammaVector(tuple(gamma)), cells)
