"""Weighted entropy, weighted pressure of one-letter potentials, and the curves P_i.

For a potential depending only on the first symbol the supremum defining the
weighted pressure is attained at a Bernoulli measure, and it can be computed
exactly by a backward recursion over the factor chain::

    u_i = phi
    u_{j+1}(b) = B_j * log sum_{a: pi_j(a) = b} exp(u_j(a) / B_j)
    value      = B_k * log sum_c exp(u_k(c) / B_k)

where ``B_j`` is the running sum of the weights from level ``i`` to ``j``.
Everything runs in log space with max-shifting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ContractError, DegenerateError, ModelError
from .model import FactorChain, SpongeModel, cell_name

__all__ = [
    "BernoulliMeasure",
    "PressureCurve",
    "PressureResult",
    "entropy",
    "weighted_entropy",
    "weighted_pressure",
    "pressure_value",
    "pressure_derivative",
    "smallest_nonneg_derivative_theta",
]

PRESSURE_TOL = 1e-10
THETA_TOL = 1e-13


def entropy(p: np.ndarray) -> float:
    """Shannon entropy with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-np.dot(nz, np.log(nz)))


def _group_logsumexp(x: np.ndarray, img: np.ndarray, size: int) -> np.ndarray:
    """``out[b] = log sum_{a: img[a] = b} exp(x[a])``; empty groups give ``-inf``."""
    m = np.full(size, -np.inf)
    np.maximum.at(m, img, x)
    shift = np.where(np.isfinite(m), m, 0.0)
    s = np.zeros(size)
    with np.errstate(invalid="ignore"):
        np.add.at(s, img, np.exp(x - shift[img]))
    with np.errstate(divide="ignore"):
        return np.where(s > 0, shift + np.log(s), -np.inf)


@dataclass(frozen=True, eq=False)
class BernoulliMeasure:
    """Probability vector on the alphabet ``A_i`` (the law of one symbol)."""

    level: int
    probs: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or len(p) != len(self.names):
            raise ModelError("measure length does not match its alphabet")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ModelError("measure has negative or non-finite mass")
        total = float(math.fsum(p))
        if abs(total - 1.0) > 1e-12:
            raise ModelError(f"measure mass is {total!r}, not 1")
        p = p / total
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_mapping(cls, model_or_chain, level: int, nu: Mapping) -> "BernoulliMeasure":
        chain = model_or_chain.chain if isinstance(model_or_chain, SpongeModel) else model_or_chain
        chain._check_level(level)
        names = chain.alphabets[level - 1]
        lookup = {b: j for j, b in enumerate(names)}
        p = np.zeros(len(names))
        for b, v in nu.items():
            b = cell_name(b)
            if b not in lookup:
                raise ModelError(f"symbol {b!r} is not in A_{level}")
            p[lookup[b]] = float(v)
        return cls(level, p, names)

    @classmethod
    def point_mass(cls, chain: FactorChain, level: int, symbol) -> "BernoulliMeasure":
        return cls.from_mapping(chain, level, {cell_name(symbol): 1.0})

    @classmethod
    def uniform(cls, chain: FactorChain, level: int, support: Sequence[int] | None = None):
        names = chain.alphabets[level - 1]
        p = np.zeros(len(names))
        idx = np.arange(len(names)) if support is None else np.asarray(support)
        p[idx] = 1.0 / len(idx)
        return cls(level, p, names)

    def entropy(self) -> float:
        return entropy(self.probs)

    def T(self, q: float) -> float:
        """``-log sum_b nu(b)^q`` over the support (``0^q = 0``)."""
        nz = self.probs[self.probs > 0]
        return float(-np.log(np.sum(nz**q)))

    def pushforward(self, chain: FactorChain, level: int | None = None) -> "BernoulliMeasure":
        """Image under ``Pi_{i,j}``; defaults to one step ``pi_i``."""
        j = self.level + 1 if level is None else level
        img = chain.project(self.level, j)
        out = np.zeros(chain.size(j))
        np.add.at(out, img, self.probs)
        return BernoulliMeasure(j, out, chain.alphabets[j - 1])

    def expect(self, f: np.ndarray) -> float:
        """``nu(f)`` with ``0 * (-inf) = 0``."""
        mask = self.probs > 0
        return float(np.dot(self.probs[mask], np.asarray(f, dtype=float)[mask]))

    def as_dict(self, drop_zero: bool = True) -> dict[str, float]:
        return {
            b: float(v) for b, v in zip(self.names, self.probs) if v > 0 or not drop_zero
        }


def _check_weights(k: int, level: int, beta: Sequence[float]) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if len(beta) != k - level + 1:
        raise ModelError(
            f"weights for level {level} need {k - level + 1} entries, got {len(beta)}"
        )
    if beta[0] <= 0 or np.any(beta[1:] < 0) or not np.all(np.isfinite(beta)):
        raise ModelError("weights need beta_i > 0 and beta_j >= 0")
    return beta


def weighted_entropy(nu: BernoulliMeasure, beta: Sequence[float], chain: FactorChain) -> float:
    """``sum_{j >= i} beta_j H(Pi_{i,j} nu)``."""
    i = nu.level
    beta = _check_weights(chain.k, i, beta)
    total = 0.0
    for off, b in enumerate(beta):
        if b == 0:
            continue
        total += b * nu.pushforward(chain, i + off).entropy()
    return total


@dataclass(frozen=True)
class PressureResult:
    value: float
    equilibrium: BernoulliMeasure


def weighted_pressure(
    chain: FactorChain,
    level: int,
    phi: np.ndarray,
    weights: Sequence[float],
    support: np.ndarray | None = None,
    tol: float = PRESSURE_TOL,
) -> PressureResult:
    """Weighted pressure of a one-letter potential and its Bernoulli equilibrium.

    ``support`` is a boolean mask (or index array) of the letters of ``A_level``
    the measures may charge; ``phi`` only needs to be finite there.
    """
    i = level
    chain._check_level(i)
    beta = _check_weights(chain.k, i, weights)
    n_i = chain.size(i)
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (n_i,):
        raise ModelError(f"potential must have one value per letter of A_{i}")
    if support is None:
        mask = np.ones(n_i, dtype=bool)
    else:
        support = np.asarray(support)
        mask = support if support.dtype == bool else np.isin(np.arange(n_i), support)
    if not mask.any():
        raise DegenerateError(f"empty reduced alphabet at level {i}")
    if not np.all(np.isfinite(phi[mask])):
        raise ModelError("potential is not finite on the reduced alphabet")

    cum = np.cumsum(beta)
    # u[j - i] lives on A_j; letters outside the support carry -inf
    u = [np.where(mask, phi, -np.inf)]
    for off in range(chain.k - i):
        j = i + off
        nxt = _group_logsumexp(u[-1] / cum[off], chain.maps[j - 1], chain.size(j + 1))
        u.append(cum[off] * nxt)
    top = u[-1]
    b_top = cum[-1]
    value = b_top * float(_group_logsumexp(top / b_top, np.zeros(len(top), dtype=np.int64), 1)[0])

    logp = top / b_top - value / b_top
    for off in range(chain.k - i - 1, -1, -1):
        j = i + off
        img = chain.maps[j - 1]
        with np.errstate(invalid="ignore"):
            logp = logp[img] + (u[off] - u[off + 1][img]) / cum[off]
    with np.errstate(invalid="ignore"):
        probs = np.where(mask, np.exp(logp), 0.0)
    if not np.all(probs[mask] > 0):
        raise ContractError("equilibrium state is not fully supported (underflow)")
    probs = probs / probs.sum()
    eq = BernoulliMeasure(i, probs, chain.alphabets[i - 1])

    check = eq.expect(np.where(mask, phi, 0.0)) + weighted_entropy(eq, beta, chain)
    if abs(check - value) > tol * max(1.0, abs(value)):
        raise ContractError(
            f"variational identity failed: nu(phi) + h = {check!r} vs pressure {value!r}"
        )
    return PressureResult(value, eq)


class PressureCurve:
    """``theta -> P_i(theta)`` for the potential ``B_i log E(N_b^{(i)})``.

    At ``level == 1`` the potential is ``gamma_1 log P(a in A)`` on the cells.
    """

    def __init__(self, model: SpongeModel, level: int):
        model.chain._check_level(level)
        if model.top_trivial and model.k > 1:
            raise DegenerateError(
                "top level is trivial (#Ã_k = 1); reduce the model before building pressure curves"
            )
        self.model = model
        self.level = level
        counts = model.counts(level)
        self.support = counts > 0
        self.B = model.gamma.B(level)
        with np.errstate(divide="ignore"):
            self.log_counts = np.where(self.support, np.log(np.where(self.support, counts, 1.0)), 0.0)
        self.phi = self.B * self.log_counts
        self.weights = model.gamma.tail(level)

    def value(self, theta: float) -> PressureResult:
        return weighted_pressure(
            self.model.chain, self.level, theta * self.phi, self.weights, self.support
        )

    def __call__(self, theta: float) -> float:
        return self.value(theta).value

    def derivative(self, theta: float) -> float:
        eq = self.value(theta).equilibrium
        return self.B * eq.expect(self.log_counts)

    @property
    def is_flat(self) -> bool:
        """True when all counts on the support coincide (constant derivative)."""
        lc = self.log_counts[self.support]
        return bool(np.all(lc == lc[0]))

    def smallest_nonneg_derivative_theta(self, lower: float, xtol: float = THETA_TOL) -> float:
        """``min{theta in [lower, 1] : P'(theta) >= 0}``."""
        if not 0.0 <= lower <= 1.0:
            raise ModelError("lower bound must lie in [0, 1]")
        d1 = self.derivative(1.0)
        if d1 < 0:
            raise ContractError(f"P_{self.level}'(1) = {d1!r} < 0; level not in the selection set")
        if self.derivative(lower) >= 0:
            return float(lower)
        root = brentq(self.derivative, lower, 1.0, xtol=xtol, rtol=4 * np.finfo(float).eps)
        # the returned point must satisfy the defining inequality
        while self.derivative(root) < 0 and root < 1.0:
            root = min(1.0, root + xtol)
        return float(root)


def pressure_value(curve: PressureCurve, theta: float) -> tuple[float, BernoulliMeasure]:
    res = curve.value(theta)
    return res.value, res.equilibrium


def pressure_derivative(curve: PressureCurve, theta: float) -> float:
    return curve.derivative(theta)


def smallest_nonneg_derivative_theta(
    curve: PressureCurve, lower: float, xtol: float = THETA_TOL
) -> float:
    return curve.smallest_nonneg_derivative_theta(lower, xtol)
