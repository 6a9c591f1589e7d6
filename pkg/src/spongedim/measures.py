"""Mandelbrot weight laws coupled to the digit set ``A`` and their moments.

Every law here is a scaled indicator ``W_a = w_a 1{a in A}`` with
deterministic ``w``, so ``E(W_a^q) = P(a in A) w_a^q`` and all moments below
are exact finite sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ContractError, DegenerateError, ModelError
from .model import SpongeModel, cell_name
from .pressure import BernoulliMeasure, entropy

__all__ = [
    "WeightLaw",
    "MeasureProfile",
    "weight_T",
    "weight_T_derivative",
    "measure_profile",
    "entropy_decomposition",
    "build_optimal_measure",
    "gamma_dimension",
]

DIRAC_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class WeightLaw:
    """One of ``branching``, ``lifted`` (level + Bernoulli measure) or ``custom``."""

    kind: str
    level: int | None = None
    nu: Mapping[str, float] | None = None
    v: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.kind == "branching":
            if self.level is not None or self.nu is not None or self.v is not None:
                raise ModelError("branching law takes no parameters")
        elif self.kind == "lifted":
            if self.level is None or self.nu is None:
                raise ModelError("lifted law needs a level and a measure nu")
            nu = {cell_name(b): float(p) for b, p in self.nu.items()}
            object.__setattr__(self, "nu", nu)
            object.__setattr__(self, "level", int(self.level))
        elif self.kind == "custom":
            if self.v is None:
                raise ModelError("custom law needs weights v")
            v = {cell_name(a): float(x) for a, x in self.v.items()}
            if any(x < 0 or not math.isfinite(x) for x in v.values()):
                raise ModelError("custom weights must be finite and non-negative")
            object.__setattr__(self, "v", v)
        else:
            raise ModelError(f"unknown weight law kind {self.kind!r}")

    @classmethod
    def branching(cls) -> "WeightLaw":
        return cls("branching")

    @classmethod
    def lifted(cls, nu: BernoulliMeasure) -> "WeightLaw":
        return cls("lifted", level=nu.level, nu=nu.as_dict())

    @classmethod
    def custom(cls, v: Mapping) -> "WeightLaw":
        return cls("custom", v=v)

    def weights(self, model: SpongeModel) -> np.ndarray:
        """Deterministic value ``w_a`` of ``W_a`` on ``{a in A}`` (0 off the support)."""
        p = model.marginals
        if self.kind == "branching":
            model.require_supercritical()
            w = np.where(p > 0, 1.0 / model.expected_size, 0.0)
        elif self.kind == "lifted":
            i = self.level
            if not 1 <= i <= model.k:
                raise ModelError(f"lifted law level {i} out of range 1..{model.k}")
            nu = BernoulliMeasure.from_mapping(model, i, self.nu).probs
            counts = model.counts(i)
            bad = (nu > 0) & (counts == 0)
            if bad.any():
                names = [model.names(i)[b] for b in np.flatnonzero(bad)]
                raise ModelError(f"lifted measure charges symbols outside Ã_{i}: {names}")
            proj = model.chain.project(1, i)
            safe = np.where(counts > 0, counts, 1.0)
            w = np.where(p > 0, nu[proj] / safe[proj], 0.0)
        else:
            lookup = {a: j for j, a in enumerate(model.cell_names)}
            unknown = sorted(set(self.v) - set(lookup))
            if unknown:
                raise ModelError(f"custom weights name cells outside A_1: {unknown}")
            raw = np.zeros(model.n_cells)
            for a, x in self.v.items():
                raw[lookup[a]] = x
            mass = float(np.dot(p, raw))
            if mass <= 0:
                raise ModelError("custom weights vanish on every cell that can survive")
            w = np.where(p > 0, raw / mass, 0.0)
        return w

    def to_json(self) -> dict:
        if self.kind == "branching":
            return {"kind": "branching"}
        if self.kind == "lifted":
            return {"kind": "lifted", "level": self.level, "nu": dict(self.nu)}
        return {"kind": "custom", "v": dict(self.v)}


def _moment_terms(model: SpongeModel, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = model.marginals
    keep = (p > 0) & (w > 0)
    return p[keep], w[keep]


def weight_T(q: float, law: WeightLaw, model: SpongeModel) -> float:
    """``T(q) = -log sum_a E(W_a^q)`` with ``0^q = 0`` (also at ``q = 0``)."""
    if q < 0:
        raise ModelError("T(q) is only defined here for q >= 0")
    p, w = _moment_terms(model, law.weights(model))
    return float(-np.log(np.sum(p * w**q)))


def weight_T_derivative(law: WeightLaw, model: SpongeModel) -> float:
    """``T'(1) = -sum_a E(W_a log W_a)``, evaluated symbolically."""
    p, w = _moment_terms(model, law.weights(model))
    return float(-np.sum(p * w * np.log(w)))


def _unit_count_variance(model: SpongeModel, unit: np.ndarray) -> float:
    """Variance of ``#{a in A : unit[a]}``."""
    if model.cells.kind == "independent":
        p = model.marginals[unit]
        return float(np.sum(p * (1 - p)))
    sizes = model.atom_masks[:, unit].sum(axis=1)
    mean = np.dot(model.atom_probs, sizes)
    return float(np.dot(model.atom_probs, (sizes - mean) ** 2))


@dataclass(frozen=True, eq=False)
class MeasureProfile:
    """Closed-form summary of a Mandelbrot measure ``mu``."""

    dim_e: float
    nus: tuple[BernoulliMeasure, ...]
    entropies: tuple[float, ...]
    state: str
    weights: np.ndarray = field(repr=False)

    @property
    def nondegenerate(self) -> bool:
        return self.state == "nondegenerate"

    @property
    def dirac(self) -> bool:
        return self.state == "dirac"

    def h(self, i: int) -> float:
        """``h_{nu_i}(T_i)``, 1-based."""
        return self.entropies[i - 1]

    def nu(self, i: int) -> BernoulliMeasure:
        return self.nus[i - 1]

    def absolutely_continuous(self, i: int) -> bool:
        """Whether ``dim_e(mu) > h_{nu_i}``, the regime with a non-trivial fibre measure."""
        return self.dim_e > self.h(i)

    def require_nondegenerate(self):
        if not self.nondegenerate:
            raise DegenerateError(
                f"weight law is {self.state}: T'(1) = {self.dim_e!r} (need T'(1) > 0)"
            )


def measure_profile(law: WeightLaw, model: SpongeModel) -> MeasureProfile:
    w = law.weights(model)
    p = model.marginals
    nu1 = p * w
    mass = float(math.fsum(nu1))
    if abs(mass - 1.0) > 1e-12:
        raise ContractError(f"E(sum W_a) = {mass!r}, not 1")
    dim_e = weight_T_derivative(law, model)
    if dim_e > DIRAC_TOL:
        state = "nondegenerate"
    elif abs(dim_e) <= DIRAC_TOL:
        unit = (p > 0) & (w > 0)
        state = "dirac" if _unit_count_variance(model, unit) <= 1e-15 else "degenerate"
    else:
        state = "degenerate"
    nus = [BernoulliMeasure(1, nu1 / mass, model.names(1))]
    for i in range(2, model.k + 1):
        nus.append(nus[-1].pushforward(model.chain))
    ents = tuple(n.entropy() for n in nus)
    return MeasureProfile(dim_e, tuple(nus), ents, state, w)


def entropy_decomposition(law: WeightLaw, model: SpongeModel, level: int) -> tuple[float, float]:
    """``(h_{nu_i}, dim_e(mu | nu_i))``; their sum is ``dim_e(mu)``.

    The fibre term is ``sum_b nu_i(b) T'_{V_b}(1)`` where ``V_b`` renormalises
    the weights above ``b`` by ``nu_i(b)``.
    """
    model.chain._check_level(level)
    prof = measure_profile(law, model)
    w = prof.weights
    p = model.marginals
    proj = model.chain.project(1, level)
    nu = prof.nu(level).probs
    keep = (p > 0) & (w > 0)
    ratio = np.zeros_like(w)
    ratio[keep] = w[keep] / nu[proj[keep]]
    terms = np.zeros_like(w)
    terms[keep] = -p[keep] * ratio[keep] * np.log(ratio[keep])
    inner = np.zeros(len(nu))
    np.add.at(inner, proj, terms)
    fibre = float(np.dot(nu, inner))
    h = prof.h(level)
    if abs(h + fibre - prof.dim_e) > 1e-12 * max(1.0, abs(prof.dim_e)):
        raise ContractError("entropy decomposition does not add up to dim_e(mu)")
    for q in (0.5, 1.0, 2.0):
        lhs = math.exp(-weight_T(q, law, model))
        tv = np.zeros(len(nu))
        np.add.at(tv, proj[keep], p[keep] * ratio[keep] ** q)
        pos = nu > 0
        rhs = float(np.sum(nu[pos] ** q * tv[pos]))
        if abs(lhs - rhs) > 1e-10 * max(1.0, abs(lhs)):
            raise ContractError(f"skew-product moment identity fails at q = {q}")
    return h, fibre


def build_optimal_measure(model: SpongeModel, nu: BernoulliMeasure) -> WeightLaw:
    """Lift a Bernoulli measure on ``Ã_i`` to the Mandelbrot law ``mu_nu``."""
    law = WeightLaw.lifted(nu)
    prof = measure_profile(law, model)
    counts = model.counts(nu.level)
    mask = nu.probs > 0
    expected = nu.entropy() + float(np.dot(nu.probs[mask], np.log(counts[mask])))
    if abs(prof.dim_e - expected) > 1e-12 * max(1.0, abs(expected)):
        raise ContractError(f"dim_e(mu_nu) = {prof.dim_e!r} but expected {expected!r}")
    if prof.dim_e <= 0:
        raise DegenerateError(f"lifted law is degenerate: T'(1) = {prof.dim_e!r}")
    return law


def gamma_dimension(prof: MeasureProfile, weights, start: int = 1) -> float:
    """``sum_{j >= start} beta_j min(dim_e(mu), h_{nu_j})`` with ``h_{nu_1}`` read as infinite.

    ``weights`` is ``(beta_start, ..., beta_k)``; at ``start == 1`` this is the
    weighted dimension of ``mu`` itself, otherwise that of ``Pi_start mu``.
    """
    d = prof.dim_e
    total = 0.0
    for off, b in enumerate(weights):
        j = start + off
        if b == 0:
            continue
        total += b * (d if j == 1 else min(d, prof.h(j)))
    return total
