import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from _gen import full_32, gl_asym, gl_half, grid_cells, independent_grid, percolation
from spongedim import (
    BallIndexer,
    CellLaw,
    DegenerateError,
    ModelError,
    WeightLaw,
    box_dim_K,
    build_euclidean_model,
    empirical_box_dim,
    empirical_local_dimension,
    empirical_Lq,
    empirical_survival,
    extinction_probability,
    hausdorff_dim_K,
    lq_secant,
    measure_dim,
    measure_profile,
    sample_cascade,
    sample_K,
)


def test_ball_depths():
    g = full_32().gamma
    assert [BallIndexer(g, n).ell for n in (2, 3, 8)] == [[0, 2, 4], [0, 3, 5], [0, 8, 13]]


def test_full_grid_tree_is_complete():
    tree = sample_K(full_32(), 3, seed=1)
    assert [tree.size(t) for t in range(4)] == [1, 6, 36, 216]
    assert not tree.extinct and not tree.truncated


def test_zero_probability_cells_give_root_only_tree():
    m = build_euclidean_model([2, 2], CellLaw.independent({c: 0.0 for c in grid_cells(2, 2)}))
    tree = sample_K(m, 4, seed=0)
    assert tree.size(0) == 1 and tree.size(1) == 0 and tree.extinct


def test_budget_truncation_flag():
    tree = sample_K(full_32(), 6, seed=0, budget=300)
    assert tree.truncated and tree.completed == 3


def test_survival_frequency():
    res = empirical_survival(percolation(), 10, 1000, seed=3)
    theory = 1 - extinction_probability(percolation())
    assert res["theory"] == pytest.approx(theory)
    assert abs(res["frequency"] - theory) <= 0.03
    assert abs(res["z"]) <= 3


def test_full_grid_box_counts_exact():
    m = full_32()
    est = empirical_box_dim(m, range(2, 9), 1, seed=1)
    for _, n, c in est.points:
        ell2 = BallIndexer(m.gamma, n).ell[2]
        assert c == 6**n * 2 ** (ell2 - n)
    assert est.stderr > 0  # ceil rounding of the depths, not sampling noise


def test_full_grid_box_slope():
    est = empirical_box_dim(full_32(), range(2, 9), 1, seed=1)
    assert est.estimate == pytest.approx(2.0, abs=0.02)


def test_full_grid_tree_and_aggregate_agree():
    m = full_32()
    a = empirical_box_dim(m, range(2, 5), 1, seed=1)
    b = empirical_box_dim(m, range(2, 5), 1, seed=1, method="tree")
    assert a.points == b.points


def test_box_methods_agree_in_distribution():
    m = gl_half()
    a = empirical_box_dim(m, [3, 4], 300, seed=5)
    b = empirical_box_dim(m, [3, 4], 300, seed=6, method="tree")
    ca = np.array([c for _, n, c in a.points if n == 4])
    cb = np.array([c for _, n, c in b.points if n == 4])
    se = math.sqrt(ca.var() / len(ca) + cb.var() / len(cb))
    assert abs(ca.mean() - cb.mean()) < 4 * se


def test_mixture_box_counts_use_group_route():
    law = CellLaw.mixture([(["0,0", "1,1", "2,0"], 0.5), (grid_cells(3, 2), 0.5)])
    m = build_euclidean_model([3, 2], law)
    est = empirical_box_dim(m, range(2, 6), 4, seed=2)
    assert len(est.points) == 16


@pytest.mark.slow
def test_asymmetric_box_slope():
    m = gl_asym()
    est = empirical_box_dim(m, range(3, 10), 64, seed=2)
    assert abs(est.estimate - box_dim_K(m).value) <= 0.10


def test_cascade_branching_on_full_grid():
    tree = sample_cascade(full_32(), WeightLaw.branching(), 3, seed=4)
    for t in range(4):
        assert np.allclose(tree.q[t], 6.0**-t, rtol=1e-15)
    assert tree.Y() == pytest.approx(1.0, abs=1e-14)


def test_cascade_martingale_mean():
    m = gl_half()
    law = hausdorff_dim_K(m).witness
    ys = np.array([sample_cascade(m, law, 4, seed=9, replicate=r).Y() for r in range(10_000)])
    assert abs(ys.mean() - 1.0) <= 3 * ys.std() / math.sqrt(len(ys))


def test_cascade_refuses_degenerate_law():
    m = build_euclidean_model([2, 2], CellLaw.deterministic(["0,0", "1,1"]))
    with pytest.raises(DegenerateError):
        sample_cascade(m, WeightLaw.custom({"0,0": 1.0}), 3, seed=0)


def test_coupling_cascade_inside_K():
    m = gl_half()
    law = WeightLaw.branching()
    for r in range(5):
        k = sample_K(m, 5, seed=11, replicate=r)
        mu = sample_cascade(m, law, 5, seed=11, replicate=r)
        assert [k.size(t) for t in range(6)] == [mu.size(t) for t in range(6)]
        for t in range(1, 6):
            assert np.array_equal(k.keys[t], mu.keys[t])
            assert np.array_equal(k.cell[t], mu.cell[t])


def test_determinism_and_worker_independence():
    code = (
        f"import sys; sys.path.insert(0, {str(Path(__file__).parent)!r}); from _gen import gl_half;"
        "from spongedim import empirical_box_dim, empirical_survival;"
        "e = empirical_box_dim(gl_half(), range(3, 6), 6, seed=7, method='tree');"
        "s = empirical_survival(gl_half(), 6, 20, seed=7);"
        "print(e.points, s['flags'])"
    )
    outs = []
    for threads in ("1", "4"):
        env = {"SPONGEDIM_THREADS": threads, "PATH": ""}
        run = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        assert run.returncode == 0, run.stderr
        outs.append(run.stdout)
    assert outs[0] == outs[1]
    e1 = empirical_box_dim(gl_half(), range(3, 6), 6, seed=7)
    e2 = empirical_box_dim(gl_half(), range(3, 6), 6, seed=7)
    assert e1.points == e2.points


def test_local_dimension_full_grid_uniform():
    est = empirical_local_dimension(full_32(), WeightLaw.branching(), range(2, 9), 3, seed=3)
    assert est.estimate == pytest.approx(2.0, abs=0.02)


def test_local_dimension_gl_witness():
    m = gl_half()
    law = hausdorff_dim_K(m).witness
    est = empirical_local_dimension(m, law, range(3, 10), 200, seed=5)
    assert abs(est.estimate - hausdorff_dim_K(m).value) <= 0.10


def test_local_dimension_min_collapse():
    m = gl_half()
    law = WeightLaw.branching()
    prof = measure_profile(law, m)
    assert prof.h(2) < prof.dim_e
    naive = m.gamma.B(2) * prof.dim_e
    est = empirical_local_dimension(m, law, range(3, 10), 200, seed=6)
    assert est.estimate < naive - 0.1
    assert abs(est.estimate - measure_dim(m, law)) <= 0.10


def test_lq_q_one_is_zero():
    est = empirical_Lq(gl_half(), WeightLaw.branching(), [1.0], range(2, 6), 4, seed=1)
    assert est[1.0].estimate == pytest.approx(0.0, abs=1e-12)


def test_lq_q_two_full_grid_uniform_identity():
    m = full_32()
    est = empirical_Lq(m, WeightLaw.branching(), [2.0], range(2, 6), 1, seed=1)
    for _, n, z in est[2.0].points:
        ell2 = BallIndexer(m.gamma, n).ell[2]
        assert math.log(z) == pytest.approx(-(n * math.log(6) + (ell2 - n) * math.log(2)), abs=1e-10)
    # the same exact counts over a longer range recover sum_i gamma_i log #Ã_i
    ns = np.arange(2, 200)
    logs = [n * math.log(6) + (BallIndexer(m.gamma, int(n)).ell[2] - n) * math.log(2) for n in ns]
    slope = np.polyfit(ns / m.gamma[1], logs, 1)[0]
    want = m.gamma[1] * math.log(6) + m.gamma[2] * math.log(2)
    assert slope == pytest.approx(want, abs=2e-3)


def test_lq_secant_gl_witness():
    m = gl_half()
    law = hausdorff_dim_K(m).witness
    est = empirical_Lq(m, law, [0.9, 1.1], range(2, 8), 20, seed=7)
    sec, se = lq_secant(est)
    assert abs(sec - measure_dim(m, law)) <= 0.12


def test_lq_rejects_bad_q():
    with pytest.raises(ModelError):
        empirical_Lq(gl_half(), WeightLaw.branching(), [0.0], range(2, 4), 1, seed=0)


def test_box_rejects_subcritical():
    with pytest.raises(DegenerateError):
        empirical_box_dim(independent_grid([2, 2], 0.2), range(2, 4), 2, seed=0)


def test_csv_rows():
    est = empirical_box_dim(gl_half(), range(3, 5), 2, seed=0)
    assert all(row[2] == "box_count" for row in est.rows())
    assert est.ci[0] < est.estimate < est.ci[1] or est.stderr == 0
