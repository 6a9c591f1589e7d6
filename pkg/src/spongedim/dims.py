"""Hausdorff and box dimensions of the sponge, its projections and its measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ContractError, DegenerateError, ModelError
from .measures import (
    WeightLaw,
    build_optimal_measure,
    gamma_dimension,
    measure_profile,
)
from .model import SpongeModel
from .pressure import PressureCurve

__all__ = [
    "DimensionReport",
    "EqualityResult",
    "hausdorff_dim_K",
    "box_dim_K",
    "dims_equal_K",
    "hausdorff_dim_projection",
    "box_dim_projection",
    "projection_dims_equal",
    "measure_dim",
    "projected_measure_dim",
    "conditional_measure_dim",
    "conditional_projected_measure_dim",
]

WITNESS_TOL = 1e-10
# the witness identity is only as good as the located theta; bisect far below 1e-10
SELECT_XTOL = 1e-13
EQUAL_TOL = 1e-9
FLAT_TOL = 1e-12


@dataclass
class DimensionReport:
    value: float
    kind: str
    selector: dict[str, Any] = field(default_factory=dict)
    witness: WeightLaw | None = None
    uniqueness: bool | None = None
    uniqueness_reason: str | None = None
    cross_check: float | None = None

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "selector": _jsonable(self.selector),
            "witness": None if self.witness is None else self.witness.to_json(),
            "uniqueness": self.uniqueness,
            "uniqueness_reason": self.uniqueness_reason,
            "cross_check": self.cross_check,
        }


@dataclass(frozen=True)
class EqualityResult:
    equal: bool
    witness: tuple | None = None
    branch: int | None = None

    def __bool__(self) -> bool:
        return self.equal


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _check_projection_level(model: SpongeModel, i: int):
    if not 2 <= i <= model.k:
        raise ModelError(f"projection level must satisfy 2 <= i <= {model.k}, got {i}")


def _curve_min(curve: PressureCurve, lo: float) -> float:
    """``min_{[lo, 1]} P`` for a convex curve (bounded scalar search plus endpoints)."""
    best = min(curve(lo), curve(1.0))
    if lo < 1.0:
        res = minimize_scalar(curve, bounds=(lo, 1.0), method="bounded", options={"xatol": 1e-11})
        best = min(best, float(res.fun))
    return best


def _witness_value(model: SpongeModel, law: WeightLaw, start: int) -> float:
    prof = measure_profile(law, model)
    prof.require_nondegenerate()
    return gamma_dimension(prof, model.gamma.tail(start) if start > 1 else model.gamma.values, start)


def _attach_witness(report: DimensionReport, model: SpongeModel, nu, start: int, strict: bool):
    """Lift ``nu`` and check that the lifted measure realises ``report.value``."""
    try:
        law = build_optimal_measure(model, nu)
    except DegenerateError:
        if strict:
            raise
        return
    got = _witness_value(model, law, start)
    if abs(got - report.value) > WITNESS_TOL * max(1.0, abs(report.value)):
        raise ContractError(
            f"witness measure gives {got!r} but the selected pressure value is {report.value!r}"
        )
    report.witness = law


def hausdorff_dim_K(model: SpongeModel) -> DimensionReport:
    """Hausdorff dimension of the limit set, with selector trace and witness."""
    model.require_supercritical()
    red = model.reduced()
    g = red.gamma
    active = g.active
    if not active:
        value = g[1] * math.log(red.expected_size)
        report = DimensionReport(
            value,
            "hausdorff_K",
            {"branch": "no-active-level", "I": [], "k_reduced": red.k},
            cross_check=PressureCurve(red, 1)(1.0),
        )
        law = WeightLaw.branching()
        got = _witness_value(model, law, 1)
        if abs(got - value) > WITNESS_TOL * max(1.0, value):
            raise ContractError("branching measure does not realise gamma_1 log E(#A)")
        report.witness = law
        report.uniqueness, report.uniqueness_reason = True, "branching"
        return report

    kk = max(active)
    curves = {i: PressureCurve(red, i) for i in active}
    d1 = {i: curves[i].derivative(1.0) for i in active}
    selected = [i for i in active if d1[i] >= 0]
    i0 = min(selected) if selected else kk + 1
    if i0 <= kk:
        lower = g.theta_tilde(i0)
        theta = curves[i0].smallest_nonneg_derivative_theta(lower, xtol=SELECT_XTOL)
        res = curves[i0].value(theta)
        branch = "i0<=k"
        level = i0
    else:
        theta, lower, level = 1.0, None, kk
        res = curves[kk].value(1.0)
        branch = "i0=k+1"
    cross = min(_curve_min(curves[i], g.theta_tilde(i)) for i in active)
    report = DimensionReport(
        res.value,
        "hausdorff_K",
        {
            "branch": branch,
            "I": list(active),
            "I_tilde": selected,
            "P_prime_at_1": d1,
            "i0": i0,
            "theta": theta,
            "lower": lower,
            "pressure_level": level,
            "derivative_at_theta": curves[level].derivative(theta),
            "k_reduced": red.k,
            "equilibrium": res.equilibrium.as_dict(),
        },
        cross_check=cross,
        uniqueness=True,
        uniqueness_reason="equilibrium",
    )
    _attach_witness(report, model, res.equilibrium, 1, strict=True)
    return report


def box_dim_K(model: SpongeModel) -> DimensionReport:
    model.require_supercritical()
    g = model.gamma
    value = g[1] * math.log(model.expected_size)
    theta_hat = {}
    psi_min = {}
    for i in range(2, model.k + 1):
        theta_hat[i] = model.theta_hat(i)
        psi_min[i] = model.psi(i, theta_hat[i])
        if g[i] > 0:
            value += g[i] * psi_min[i]
    return DimensionReport(
        value,
        "box_K",
        {"theta_hat": theta_hat, "psi_min": psi_min, "I": list(g.active)},
    )


def _constant(values: np.ndarray) -> int | None:
    """Index of the first entry that breaks constancy (relative 1e-12), else None."""
    ref = values[0]
    for j, v in enumerate(values):
        if abs(v - ref) > FLAT_TOL * max(abs(ref), abs(v)):
            return j
    return None


def dims_equal_K(model: SpongeModel, check: bool = True) -> EqualityResult:
    """Whether the Hausdorff and box dimensions of the limit set coincide."""
    model.require_supercritical()
    red = model.reduced()
    result = EqualityResult(True)
    for i in red.gamma.active:
        if red.theta_hat(i) >= 1.0:
            continue
        sup = red.support(i)
        bad = _constant(red.counts(i)[sup])
        if bad is not None:
            result = EqualityResult(False, (i, red.names(i)[sup[bad]]))
            break
    if check:
        gap = box_dim_K(model).value - hausdorff_dim_K(model).value
        if (abs(gap) < EQUAL_TOL) != result.equal:
            raise ContractError(
                f"equality criterion says {result.equal} but the dimension gap is {gap!r}"
            )
    return result


def _projection_levels(model: SpongeModel, i: int) -> list[int]:
    return [i] + [j for j in range(i + 1, model.k + 1) if model.gamma[j] > 0]


def hausdorff_dim_projection(model: SpongeModel, level: int) -> DimensionReport:
    """Hausdorff dimension of ``Pi_i(K)`` with the uniqueness verdict."""
    i = level
    _check_projection_level(model, i)
    model.require_supercritical()
    red = model.reduced()
    if i > red.k:
        return DimensionReport(
            0.0,
            "hausdorff_projection",
            {"level": i, "branch": "trivial-level", "k_reduced": red.k},
            uniqueness=None,
            uniqueness_reason="trivial-level",
            cross_check=0.0,
        )
    g = red.gamma
    levels = _projection_levels(red, i)
    kk = max(levels)
    curves = {j: PressureCurve(red, j) for j in levels}
    d1 = {j: curves[j].derivative(1.0) for j in levels}
    selected = [j for j in levels if d1[j] >= 0]
    j0 = min(selected) if selected else kk + 1
    lower_of = {j: (0.0 if j == i else g.theta_tilde(j)) for j in levels}
    if j0 <= kk:
        lower = lower_of[j0]
        theta = curves[j0].smallest_nonneg_derivative_theta(lower, xtol=SELECT_XTOL)
        res = curves[j0].value(theta)
        level_used = j0
        branch = "j0<=k"
    else:
        theta, lower, level_used = 1.0, None, kk
        res = curves[kk].value(1.0)
        branch = "j0=k+1"

    if j0 > i:
        unique, reason = True, "a"
    elif theta > 0:
        unique, reason = True, "b"
    else:
        d0 = curves[i].derivative(0.0)
        lc = curves[i].log_counts[curves[i].support]
        if np.all(lc == 0.0):
            unique, reason = True, "c"
        elif abs(d0) <= FLAT_TOL:
            unique, reason = None, "indeterminate"
        else:
            unique, reason = False, "none"

    cross = min(_curve_min(curves[j], lower_of[j]) for j in levels)
    report = DimensionReport(
        res.value,
        "hausdorff_projection",
        {
            "level": i,
            "branch": branch,
            "I_i": levels,
            "I_i_tilde": selected,
            "P_prime_at_1": d1,
            "j0": j0,
            "theta": theta,
            "lower": lower,
            "pressure_level": level_used,
            "k_reduced": red.k,
            "equilibrium": res.equilibrium.as_dict(),
        },
        uniqueness=unique,
        uniqueness_reason=reason,
        cross_check=cross,
    )
    _attach_witness(report, model, res.equilibrium, i, strict=False)
    return report


def box_dim_projection(model: SpongeModel, level: int) -> DimensionReport:
    i = level
    _check_projection_level(model, i)
    model.require_supercritical()
    g = model.gamma
    theta_hat = {i: model.theta_hat(i)}
    value = g.B(i) * model.psi(i, theta_hat[i])
    for j in range(i + 1, model.k + 1):
        theta_hat[j] = model.theta_hat(j)
        if g[j] > 0:
            value += g[j] * model.psi(j, theta_hat[j])
    return DimensionReport(value, "box_projection", {"level": i, "theta_hat": theta_hat})


def _preimage_sizes(model: SpongeModel, i: int, j: int) -> np.ndarray:
    """``#(Pi_{i,j}^{-1}(b) ∩ Ã_i)`` for each ``b`` in ``Ã_j``."""
    sup_i = model.support(i)
    img = model.chain.project(i, j)[sup_i]
    sizes = np.bincount(img, minlength=model.chain.size(j))
    return sizes[model.support(j)]


def projection_dims_equal(model: SpongeModel, level: int, check: bool = True) -> EqualityResult:
    """Whether ``dim_H Pi_i(K) = dim_B Pi_i(K)``, with the branch that certifies it."""
    i = level
    _check_projection_level(model, i)
    model.require_supercritical()
    levels = _projection_levels(model, i)
    th = {j: model.theta_hat(j) for j in levels}
    dpsi0 = {j: model.psi_derivative(j, 0.0) for j in levels}

    def flat_counts(j):
        return _constant(model.counts(j)[model.support(j)]) is None

    def inner(j):
        return 0.0 < th[j] < 1.0 or (th[j] == 0.0 and abs(dpsi0[j]) <= FLAT_TOL)

    branch = None
    if th[i] == 1.0:
        if all(flat_counts(j) for j in levels[1:] if th[j] < 1.0):
            branch = 1
    elif inner(i):
        jp = i
        for j in levels:
            if not inner(j):
                break
            jp = j
        ok = all(np.all(_preimage_sizes(model, i, j) == 1) for j in levels if j <= jp)
        if ok:
            sup_i = model.support(i)
            weights = model.counts(i)[sup_i] ** th[i]
            for j in (j for j in levels if j > jp):
                if not (th[j] == 0.0 and dpsi0[j] > FLAT_TOL):
                    ok = False
                    break
                sums = np.bincount(
                    model.chain.project(i, j)[sup_i], weights=weights, minlength=model.chain.size(j)
                )[model.support(j)]
                if _constant(sums) is not None:
                    ok = False
                    break
        if ok:
            branch = 2
    if branch is None and all(th[j] == 0.0 and dpsi0[j] > FLAT_TOL for j in levels):
        if all(_constant(_preimage_sizes(model, i, j).astype(float)) is None for j in levels):
            branch = 3
    result = EqualityResult(branch is not None, branch=branch)
    if check:
        gap = box_dim_projection(model, i).value - hausdorff_dim_projection(model, i).value
        if (abs(gap) < EQUAL_TOL) != result.equal:
            raise ContractError(
                f"projection equality criterion says {result.equal} but the gap is {gap!r}"
            )
    return result


def _profile(model: SpongeModel, law: WeightLaw):
    prof = measure_profile(law, model)
    prof.require_nondegenerate()
    return prof


def measure_dim(model: SpongeModel, law: WeightLaw) -> float:
    """Exact dimension of the Mandelbrot measure ``mu``."""
    return gamma_dimension(_profile(model, law), model.gamma.values, 1)


def projected_measure_dim(model: SpongeModel, law: WeightLaw, level: int) -> float:
    """Exact dimension of ``Pi_i mu``; ``level == 1`` gives :func:`measure_dim`."""
    model.chain._check_level(level)
    prof = _profile(model, law)
    if level == 1:
        return gamma_dimension(prof, model.gamma.values, 1)
    return gamma_dimension(prof, model.gamma.tail(level), level)


def conditional_measure_dim(model: SpongeModel, law: WeightLaw, level: int) -> float:
    """Dimension of the conditional measures of ``mu`` on the fibres of ``Pi_i``."""
    i = level
    _check_projection_level(model, i)
    prof = _profile(model, law)
    g = model.gamma
    d, hi = prof.dim_e, prof.h(i)
    if d <= hi:
        value = 0.0
    else:
        value = g[1] * (d - hi) + sum(g[j] * (min(d, prof.h(j)) - hi) for j in range(2, i))
    full = gamma_dimension(prof, g.values, 1)
    proj = gamma_dimension(prof, g.tail(i), i)
    if abs(full - value - proj) > 1e-12 * max(1.0, full):
        raise ContractError("dimension conservation fails for the fibre measures")
    return value


def conditional_projected_measure_dim(
    model: SpongeModel, law: WeightLaw, level: int, upper: int
) -> float:
    """Dimension of the conditional measures of ``Pi_i mu`` on the fibres of ``Pi_{i,j}``."""
    i, j = level, upper
    if model.k < 3 or not 2 <= i < j <= model.k:
        raise ModelError(f"need k >= 3 and 2 <= i < j <= k, got i={i}, j={j}, k={model.k}")
    prof = _profile(model, law)
    tail = model.gamma.tail(i)
    d, hj = prof.dim_e, prof.h(j)
    if d <= hj:
        value = 0.0
    else:
        value = sum(tail[jp - i] * (min(d, prof.h(jp)) - hj) for jp in range(i, j))
    proj_i = gamma_dimension(prof, tail, i)
    proj_j = gamma_dimension(prof, model.gamma.tail(j), j)
    if abs(proj_i - value - proj_j) > 1e-12 * max(1.0, proj_i):
        raise ContractError("dimension conservation fails for the projected fibre measures")
    return value
