"""Acceptance criteria 1 to 9, one marked group per criterion.

The terminal summary (see conftest) prints one PASS/FAIL line per criterion.
"""

import math
import time

import numpy as np
import pytest

from _gen import (
    bm_formula,
    box_formula,
    full_432,
    gl_asym,
    gl_half,
    mcmullen,
    percolation,
    random_model,
    refined_pressure,
)
from spongedim import (
    PressureCurve,
    WeightLaw,
    box_dim_K,
    box_dim_projection,
    brute_force_Mgamma,
    brute_force_minmax,
    conditional_measure_dim,
    conditional_projected_measure_dim,
    dims_equal_K,
    empirical_box_dim,
    empirical_local_dimension,
    empirical_Lq,
    empirical_survival,
    extinction_probability,
    hausdorff_dim_K,
    hausdorff_dim_projection,
    lq_secant,
    measure_dim,
    measure_profile,
    projected_measure_dim,
)

GL_HALF_DIM = 1.36907


def c(n, title):
    return pytest.mark.criterion(n, title)


# -- 1 -------------------------------------------------------------------------


@c(1, "McMullen carpet dim_H and dim_B to 1e-9, under 1 s")
def test_c1_mcmullen():
    t0 = time.perf_counter()
    m = mcmullen()
    h = hausdorff_dim_K(m).value
    b = box_dim_K(m).value
    elapsed = time.perf_counter() - t0
    a = math.log(2) / math.log(3)
    assert abs(h - math.log2(2**a + 1)) <= 1e-9
    assert abs(b - (2 - a)) <= 1e-9
    # the same values through the generic counts formulas (column counts 2 and 1)
    assert abs(h - bm_formula([2, 1], 3, 2)) <= 1e-9
    assert abs(b - box_formula([2, 1], 3, 2)) <= 1e-9
    assert elapsed < 1.0


# -- 2 -------------------------------------------------------------------------


@c(2, "random carpets: GL p=0.5 equality, asymmetric counts gap")
def test_c2_gl_half():
    m = gl_half()
    h = hausdorff_dim_K(m).value
    assert abs(h - bm_formula([1.5, 1.5], 3, 2)) <= 1e-6
    assert abs(h - GL_HALF_DIM) <= 1e-5
    assert abs(box_dim_K(m).value - h) <= 1e-6
    assert dims_equal_K(m).equal


@c(2, "random carpets: GL p=0.5 equality, asymmetric counts gap")
def test_c2_asymmetric():
    m = gl_asym()
    h = hausdorff_dim_K(m).value
    b = box_dim_K(m).value
    assert abs(h - bm_formula([2.7, 0.3], 3, 2)) <= 1e-4
    assert abs(b - box_formula([2.7, 0.3], 3, 2)) <= 1e-4
    assert abs(h - 1.2261) <= 1e-4 and abs(b - 1.3666) <= 1e-4
    assert not dims_equal_K(m).equal


# -- 3 -------------------------------------------------------------------------


@c(3, "fractal percolation dims equal log 2.8 / log 2")
def test_c3_percolation():
    m = percolation()
    want = math.log(2.8) / math.log(2)
    assert abs(hausdorff_dim_K(m).value - want) <= 1e-9
    assert abs(box_dim_K(m).value - want) <= 1e-9


# -- 4 -------------------------------------------------------------------------


@c(4, "full sponge (4,3,2): dimension 3, projections full")
def test_c4_full_sponge():
    m = full_432()
    assert abs(hausdorff_dim_K(m).value - 3) <= 1e-9
    assert abs(box_dim_K(m).value - 3) <= 1e-9
    for i in (2, 3):
        want = 3 - (i - 1)
        assert abs(hausdorff_dim_projection(m, i).value - want) <= 1e-9
        assert abs(box_dim_projection(m, i).value - want) <= 1e-9


# -- 5 -------------------------------------------------------------------------


@c(5, "oracle M^gamma and min-max on 50 random models, under 5 min")
def test_c5_oracle_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    for _ in range(50):
        m = random_model(rng, max_cells=6)
        assert m.k <= 3 and len(m.support(1)) <= 6
        h = hausdorff_dim_K(m).value
        val, _ = brute_force_Mgamma(m)
        mm, _ = brute_force_minmax(m)
        assert abs(val - h) <= 5e-3
        assert abs(mm - val) <= 5e-3
    assert time.perf_counter() - t0 < 300


# -- 6 -------------------------------------------------------------------------


@c(6, "pressure closed form vs simplex search; derivative vs differences")
def test_c6_pressure_grid():
    rng = np.random.default_rng(77)
    for _ in range(50):
        m = random_model(rng, max_cells=6).reduced()
        i = int(rng.integers(1, m.k + 1))
        theta = float(rng.uniform(0.0, 1.0))
        curve = PressureCurve(m, i)
        best = refined_pressure(m, i, theta * curve.phi, curve.weights, curve.support)
        assert abs(best - curve(theta)) <= 5e-4


@c(6, "pressure closed form vs simplex search; derivative vs differences")
def test_c6_pressure_derivative():
    rng = np.random.default_rng(78)
    h = 1e-5
    for _ in range(20):
        m = random_model(rng, max_cells=6).reduced()
        for i in range(1, m.k + 1):
            curve = PressureCurve(m, i)
            for theta in np.linspace(0.05, 0.95, 7):
                fd = (curve(theta + h) - curve(theta - h)) / (2 * h)
                d = curve.derivative(theta)
                assert abs(fd - d) <= 1e-6 * max(abs(d), 1e-3)


# -- 7 -------------------------------------------------------------------------


@c(7, "conservation identities on 100 random triples to 1e-12")
def test_c7_conservation():
    rng = np.random.default_rng(99)
    done = 0
    while done < 100:
        m = random_model(rng)
        if m.k < 2:
            continue
        law = WeightLaw.custom({a: float(rng.uniform(0.05, 2.0)) for a in m.cell_names})
        if not measure_profile(law, m).nondegenerate:
            continue  # the dimensions are defined only for T'(1) > 0
        i = int(rng.integers(2, m.k + 1))
        total = measure_dim(m, law)
        proj_i = projected_measure_dim(m, law, i)
        assert abs(total - conditional_measure_dim(m, law, i) - proj_i) <= 1e-12
        if m.k >= 3 and i < m.k:
            j = int(rng.integers(i + 1, m.k + 1))
            fibre = conditional_projected_measure_dim(m, law, i, j)
            assert abs(proj_i - fibre - projected_measure_dim(m, law, j)) <= 1e-12
        done += 1


# -- 8 -------------------------------------------------------------------------


@c(8, "Monte Carlo: survival, box slope, local dimension, Lq secant")
def test_c8a_survival():
    m = percolation()
    res = empirical_survival(m, 10, 1000, seed=3)
    theory = 1 - extinction_probability(m)
    se = math.sqrt(theory * (1 - theory) / 1000)
    assert abs(res["frequency"] - theory) <= 3 * se


@c(8, "Monte Carlo: survival, box slope, local dimension, Lq secant")
def test_c8b_box_slope():
    t0 = time.perf_counter()
    est = empirical_box_dim(gl_half(), range(3, 10), 64, seed=1)
    assert time.perf_counter() - t0 < 120
    assert abs(est.estimate - GL_HALF_DIM) <= 0.08


@c(8, "Monte Carlo: survival, box slope, local dimension, Lq secant")
def test_c8c_local_dimension():
    m = gl_half()
    rep = hausdorff_dim_K(m)
    est = empirical_local_dimension(m, rep.witness, range(3, 10), 200, seed=5)
    assert abs(est.estimate - rep.value) <= 0.10


@c(8, "Monte Carlo: survival, box slope, local dimension, Lq secant")
def test_c8d_lq_secant():
    m = gl_half()
    law = hausdorff_dim_K(m).witness
    est = empirical_Lq(m, law, [0.9, 1.1], range(2, 8), 20, seed=7)
    sec, _ = lq_secant(est)
    assert abs(sec - measure_dim(m, law)) <= 0.12


# -- 9 -------------------------------------------------------------------------


@c(9, "ordering and monotonicity on 200 random models")
def test_c9_ordering():
    rng = np.random.default_rng(9)
    for _ in range(200):
        m = random_model(rng)
        h, b = hausdorff_dim_K(m).value, box_dim_K(m).value
        assert h <= b + 1e-10
        prev_h, prev_b = h, b
        for i in range(2, m.k + 1):
            hp = hausdorff_dim_projection(m, i).value
            bp = box_dim_projection(m, i).value
            assert hp <= bp + 1e-10
            assert hp <= prev_h + 1e-10 and bp <= prev_b + 1e-10
            prev_h, prev_b = hp, bp
        log_ea = math.log(m.expected_size)
        thetas = np.linspace(0.0, 1.0, 21)
        for i in range(1, m.k + 1):
            assert abs(m.psi(i, 1.0) - log_ea) <= 1e-12
            if i < m.k:
                assert all(m.psi(i, t) >= m.psi(i + 1, t) - 1e-12 for t in thetas)
