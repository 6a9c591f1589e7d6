import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _gen import gl_asym, gl_half, grid_cells, independent_grid, percolation, random_model
from spongedim import (
    BernoulliMeasure,
    CellLaw,
    DegenerateError,
    ModelError,
    PressureCurve,
    WeightLaw,
    build_euclidean_model,
    build_optimal_measure,
    entropy_decomposition,
    measure_profile,
    weight_T,
    weight_T_derivative,
)


@pytest.mark.parametrize("law", [WeightLaw.branching(), WeightLaw.custom({"0,0": 1, "1,1": 3, "2,0": 0.5})])
def test_T_at_one_is_zero(law):
    assert weight_T(1.0, law, gl_asym()) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("q", [0.0, 2.0, 3.0])
def test_branching_T_closed_form(q):
    m = gl_asym()
    c = m.expected_size
    assert weight_T(q, WeightLaw.branching(), m) == pytest.approx((q - 1) * math.log(c), abs=1e-13)


def test_T_at_zero_counts_positive_weight_cells():
    m = gl_asym()
    law = WeightLaw.custom({"0,0": 1.0, "1,0": 1.0, "0,1": 2.0})  # zero weight elsewhere
    want = -math.log(0.9 + 0.9 + 0.1)
    assert weight_T(0.0, law, m) == pytest.approx(want, abs=1e-14)


def test_branching_percolation_profile():
    prof = measure_profile(WeightLaw.branching(), percolation())
    assert prof.dim_e == pytest.approx(math.log(2.8), abs=1e-14)
    assert np.allclose(prof.nu(2).probs, 0.5, atol=1e-15)


def test_lifted_point_mass_profile():
    m = gl_asym()
    nu = BernoulliMeasure.point_mass(m.chain, 2, "0")
    prof = measure_profile(WeightLaw.lifted(nu), m)
    assert prof.h(2) == 0.0
    assert prof.dim_e == pytest.approx(math.log(2.7), abs=1e-14)


def test_custom_equal_weights_on_full_grid():
    m = independent_grid([3, 2], 1.0)
    prof = measure_profile(WeightLaw.custom({c: 2.0 for c in grid_cells(3, 2)}), m)
    assert prof.dim_e == pytest.approx(math.log(6), abs=1e-14)
    assert np.allclose(prof.nu(1).probs, 1 / 6) and np.allclose(prof.nu(2).probs, 0.5)


def test_relative_entropy_of_lifted_law():
    m = gl_asym()
    nu = BernoulliMeasure.from_mapping(m, 2, {"0": 0.35, "1": 0.65})
    h, fibre = entropy_decomposition(WeightLaw.lifted(nu), m, 2)
    assert fibre == pytest.approx(0.35 * math.log(2.7) + 0.65 * math.log(0.3), abs=1e-14)
    assert h == pytest.approx(-(0.35 * math.log(0.35) + 0.65 * math.log(0.65)), abs=1e-14)


def test_decomposition_level_one_deterministic_branching():
    m = independent_grid([3, 2], 1.0)
    h, fibre = entropy_decomposition(WeightLaw.branching(), m, 1)
    assert fibre == pytest.approx(0.0, abs=1e-15)
    assert h == pytest.approx(math.log(6), abs=1e-14)


def test_decomposition_gl_half():
    h, fibre = entropy_decomposition(WeightLaw.branching(), gl_half(), 2)
    assert h == pytest.approx(math.log(2), abs=1e-15)
    assert fibre == pytest.approx(math.log(3) - math.log(2), abs=1e-14)


def test_uniform_lift_is_branching_on_full_grid():
    m = independent_grid([3, 2], 1.0)
    law = build_optimal_measure(m, BernoulliMeasure.uniform(m.chain, 2))
    assert np.allclose(law.weights(m), WeightLaw.branching().weights(m), atol=1e-15)


def test_lift_of_equilibrium_matches_relative_entropy_formula():
    m = gl_asym()
    curve = PressureCurve(m, 2)
    theta = curve.smallest_nonneg_derivative_theta(m.gamma.theta_tilde(2))
    nu = curve.value(theta).equilibrium
    prof = measure_profile(build_optimal_measure(m, nu), m)
    want = nu.entropy() + float(np.dot(nu.probs, np.log(m.counts(2))))
    assert prof.dim_e == pytest.approx(want, abs=1e-13)


def test_lift_of_point_mass():
    m = gl_asym()
    law = build_optimal_measure(m, BernoulliMeasure.point_mass(m.chain, 2, "0"))
    assert measure_profile(law, m).dim_e == pytest.approx(math.log(2.7), abs=1e-14)


def test_lift_point_mass_below_one_is_degenerate():
    m = gl_asym()
    with pytest.raises(DegenerateError):
        build_optimal_measure(m, BernoulliMeasure.point_mass(m.chain, 2, "1"))


def test_dirac_state_on_deterministic_single_cell_weights():
    m = build_euclidean_model([2, 2], CellLaw.deterministic(["0,0", "1,1"]))
    prof = measure_profile(WeightLaw.custom({"0,0": 1.0}), m)
    assert prof.dirac and not prof.nondegenerate
    with pytest.raises(DegenerateError):
        prof.require_nondegenerate()


def test_lifted_law_outside_support_rejected():
    law = CellLaw.independent({c: (0.9 if c.endswith(",0") else 0.0) for c in grid_cells(3, 2)})
    m = build_euclidean_model([3, 2], law)
    with pytest.raises(ModelError):
        WeightLaw("lifted", level=2, nu={"0": 0.5, "1": 0.5}).weights(m)


def test_unknown_law_kind():
    with pytest.raises(ModelError):
        WeightLaw("gaussian")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_entropy_decomposition_random(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    names = m.cell_names
    law = WeightLaw.custom({a: float(rng.uniform(0.1, 2.0)) for a in names})
    prof = measure_profile(law, m)
    assert weight_T(1.0, law, m) == pytest.approx(0.0, abs=1e-13)
    # T'(1) by central differences
    h = 1e-5
    fd = (weight_T(1 + h, law, m) - weight_T(1 - h, law, m)) / (2 * h)
    assert fd == pytest.approx(weight_T_derivative(law, m), abs=1e-7)
    prev = math.inf
    for i in range(1, m.k + 1):
        hi, fibre = entropy_decomposition(law, m, i)
        assert hi + fibre == pytest.approx(prof.dim_e, abs=1e-12)
        assert hi <= prev + 1e-12
        prev = hi
