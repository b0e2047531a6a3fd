import math

import numpy as np
import pytest

import sinhgordon as sg
from sinhgordon.correlations import (
    ShiftData,
    _cylinder_engine,
    _entries_to_process,
)
from sinhgordon.errors import (
    InadmissibleAlpha,
    InadmissibleInsertions,
    WindowOutsideCylinder,
)
from sinhgordon.gmc import fourier_spec
from sinhgordon.propagator import default_c_quadrature
from sinhgordon.results import jackknife_func

from conftest import agree


# ---------------------------------------------------------------------------
# Insertion sets and shift data
# ---------------------------------------------------------------------------

def test_insertion_admissibility(unit_params):
    ins = sg.make_insertions([(0.5, 0.0, 0.0), (-2.4, 0.5, 1.0)], unit_params)
    assert ins.admissible  # Q = 2.5
    bad = sg.make_insertions([(2.5, 0.0, 0.0)], unit_params)
    assert not bad.admissible
    with pytest.raises(ValueError):
        sg.make_insertions([(0.5, 0.0, 1.0), (0.7, 0.0, 1.0)], unit_params)


def test_shift_boundary_matches_oracle_sum(unit_params):
    entries = ((0.5, 1.0, 0.3), (-0.25, 1.5, 2.0))
    shift = ShiftData(entries, kernel="exact")
    thetas = np.linspace(0, 2 * math.pi, 9, endpoint=False)
    h = shift.boundary_h(thetas)
    for j, th in enumerate(thetas):
        manual = sum(a * sg.covariance_oracle("slice", 0.0, th, s_i, th_i)
                     for a, s_i, th_i in entries)
        assert h[j] == pytest.approx(manual, abs=1e-12)


def test_shift_bulk_matches_oracle_pointwise(unit_params):
    entries = ((0.7, 0.8, 1.1),)
    shift = ShiftData(entries, kernel="exact")
    for t in (0.0, 0.4, 1.3, 2.0):
        for th in (0.0, 2.2):
            val = shift.bulk(t, np.array([th]))[0, 0]
            manual = 0.7 * sg.covariance_oracle("slice", t, th, 0.8, 1.1)
            assert val == pytest.approx(manual, abs=1e-12)


def test_shift_drift_and_decay():
    entries = ((0.5, 1.0, 0.0), (0.25, 2.0, 1.0))
    shift = ShiftData(entries, kernel=32)
    s = np.array([0.0, 0.5, 1.0, 3.0])
    drift = shift.drift(s)
    assert drift[0] == 0.0
    assert drift[-1] == pytest.approx(0.5 * 1.0 + 0.25 * 2.0)
    far = shift.bulk(40.0, np.array([0.0]))[0, 0]
    assert abs(far) < 1e-12
    h = shift.boundary_h(np.array([0.5]))
    at0 = shift.bulk(0.0, np.array([0.5]))[0, 0]
    assert h[0] == at0


def test_shift_truncated_kernel_consistency():
    # the truncated kernel converges to the closed form as modes grow
    entries = ((0.6, 1.0, 0.4),)
    exact = ShiftData(entries, kernel="exact").bulk(0.5, np.array([1.0]))[0, 0]
    approx = ShiftData(entries, kernel=256).bulk(0.5, np.array([1.0]))[0, 0]
    assert approx == pytest.approx(exact, abs=1e-10)


def test_scalar_log_single_and_pair():
    single = ShiftData(((0.5, 1.2, 0.0),), kernel=16)
    assert single.scalar_log() == pytest.approx(0.5 * 0.25 * 1.2, rel=1e-12)
    pair = ShiftData(((0.5, 1.0, 0.0), (0.3, 2.0, 1.0)), kernel=16)
    from sinhgordon.gff import truncated_slice_cov
    cov = float(truncated_slice_cov(16, 1.0, 1.0))
    expected = 0.5 * (0.25 * 1.0 + 0.09 * 2.0) + 0.5 * 0.3 * (1.0 + cov)
    assert pair.scalar_log() == pytest.approx(expected, rel=1e-12)


# ---------------------------------------------------------------------------
# Finite-T expectations
# ---------------------------------------------------------------------------

def test_finite_t_constant_observable(unit_params):
    res = sg.finite_T_expectation(lambda c, win: np.ones(win.brownian.shape[0]),
                                  1.0, unit_params, dt=1 / 8, n_modes=12,
                                  theta_cells=32, n_samples=256, seed=1)
    assert res.mean == pytest.approx(1.0, abs=1e-12)
    assert res.std_error == pytest.approx(0.0, abs=1e-12)


def test_finite_t_free_limit():
    p = sg.validate_params(1.0, 1e-9, 1.0)

    def obs(c, win):
        return np.tanh(win.field_at(0.0, 0.0))

    res = sg.finite_T_expectation(obs, 1.0, p, dt=1 / 8, n_modes=32,
                                  theta_cells=32, n_samples=4000, seed=2)
    # free stationary field: tanh of a centered Gaussian with the truncated variance
    rng = np.random.default_rng(3)
    var = sum(1.0 / n for n in range(1, 33))
    direct = np.tanh(math.sqrt(var) * rng.standard_normal(200000))
    assert agree(res.mean, res.std_error, direct.mean(), direct.std() / math.sqrt(direct.size))


def test_finite_t_window_checked(unit_params):
    with pytest.raises(WindowOutsideCylinder):
        sg.finite_T_expectation(lambda c, w: np.ones(1), 1.0, unit_params,
                                support=(-2.0, 0.0), n_samples=16)


def test_finite_t_convergence_in_t(unit_params):
    def obs(c, win):
        return np.cos(c + win.zero(0.0))

    a = sg.finite_T_expectation(obs, 1.0, unit_params, dt=1 / 8, n_modes=24,
                                theta_cells=48, n_samples=20000, seed=4)
    b = sg.finite_T_expectation(obs, 1.5, unit_params, dt=1 / 8, n_modes=24,
                                theta_cells=48, n_samples=20000, seed=5)
    assert agree(a.mean, a.std_error, b.mean, b.std_error)


# ---------------------------------------------------------------------------
# Vertex estimators
# ---------------------------------------------------------------------------

def test_vertex_zero_alpha_is_one(unit_params):
    ins = sg.make_insertions([(0.0, 0.0, 0.0)], unit_params)
    res = sg.vertex_direct(ins, None, 1.0, unit_params, dt=1 / 8, n_modes=12,
                           theta_cells=32, n_samples=256, seed=6)
    assert res.mean == pytest.approx(1.0, abs=1e-12)


def test_vertex_girsanov_requires_admissible(unit_params):
    bad = sg.make_insertions([(unit_params.q_const + 0.5, 0.0, 0.0)], unit_params)
    with pytest.raises(InadmissibleInsertions):
        sg.vertex_girsanov(bad, 1.0, unit_params, n_samples=16)


def test_vertex_insertion_must_sit_inside_window(unit_params):
    ins = sg.make_insertions([(0.5, 1.5, 0.0)], unit_params)
    with pytest.raises(WindowOutsideCylinder):
        sg.vertex_direct(ins, None, 1.0, unit_params, n_samples=16)


def test_girsanov_identity_numerator_level(unit_params):
    # E[direct numerator] == E[shifted numerator] exactly in law; tight check
    # through the per-path difference on shared paths
    entries = _entries_to_process(((0.6, 0.0, 0.3),), 0.5, 1 / 8)
    tasks = [
        {"kind": "vertex", "entries": entries, "reg": fourier_spec(+1, 6),
         "total_alpha": 0.6},
        {"kind": "girsanov", "shift": ShiftData(entries, kernel=6)},
    ]
    res = _cylinder_engine(sg.validate_params(1.0, 1.0, 1.0), 0.5, 1 / 8, 6, 16,
                           default_c_quadrature(1.0, n_nodes=17), 300000, 901, tasks,
                           batch=4096)
    diff, se = jackknife_func([res["num"][0], res["num"][1], res["den"]],
                              lambda a, b, w: (a - b) / w)
    assert abs(diff) <= 4.0 * se


def test_vertex_direct_vs_girsanov_statistical(unit_params):
    ins = sg.make_insertions([(0.5, 0.0, 0.0)], unit_params)
    d = sg.vertex_direct(ins, None, 1.0, unit_params, dt=1 / 16, n_modes=32,
                         theta_cells=64, n_samples=8000, seed=7)
    g = sg.vertex_girsanov(ins, 1.0, unit_params, dt=1 / 16, n_modes=32,
                           theta_cells=64, n_samples=8000, seed=8)
    assert agree(d.mean, d.std_error, g.mean, g.std_error)


def test_vertex_smc_matches_plain(unit_params):
    ins = sg.make_insertions([(0.5, 0.0, 0.0)], unit_params)
    a = sg.vertex_direct(ins, None, 1.0, unit_params, dt=1 / 16, n_modes=32,
                         theta_cells=64, n_samples=12000, seed=9, backend="plain")
    b = sg.vertex_direct(ins, None, 1.0, unit_params, dt=1 / 16, n_modes=32,
                         theta_cells=64, n_samples=12000, seed=10, backend="smc")
    assert agree(a.mean, a.std_error, b.mean, b.std_error)


def test_vertex_negation_coupling_exact(unit_params):
    ins_p = sg.make_insertions([(0.5, 0.2, 1.0)], unit_params)
    ins_m = sg.make_insertions([(-0.5, 0.2, 1.0)], unit_params)
    a = sg.vertex_direct(ins_p, None, 1.0, unit_params, dt=1 / 16, n_modes=16,
                         theta_cells=32, n_samples=512, seed=11)
    b = sg.vertex_direct(ins_m, None, 1.0, unit_params, dt=1 / 16, n_modes=16,
                         theta_cells=32, n_samples=512, seed=11, mirror=True)
    assert a.mean == b.mean


def test_vertex_rotation_invariance(unit_params):
    ins_a = sg.make_insertions([(0.5, 0.0, 0.0)], unit_params)
    ins_b = sg.make_insertions([(0.5, 0.0, 2.0)], unit_params)
    a = sg.vertex_direct(ins_a, None, 1.0, unit_params, dt=1 / 16, n_modes=32,
                         theta_cells=64, n_samples=8000, seed=12)
    b = sg.vertex_direct(ins_b, None, 1.0, unit_params, dt=1 / 16, n_modes=32,
                         theta_cells=64, n_samples=8000, seed=13)
    assert agree(a.mean, a.std_error, b.mean, b.std_error)


def test_vertex_time_translation_invariance(unit_params):
    ins_a = sg.make_insertions([(0.5, -0.25, 0.0)], unit_params)
    ins_b = sg.make_insertions([(0.5, +0.25, 0.0)], unit_params)
    a = sg.vertex_direct(ins_a, None, 1.0, unit_params, dt=1 / 16, n_modes=32,
                         theta_cells=64, n_samples=8000, seed=14)
    b = sg.vertex_direct(ins_b, None, 1.0, unit_params, dt=1 / 16, n_modes=32,
                         theta_cells=64, n_samples=8000, seed=15)
    assert agree(a.mean, a.std_error, b.mean, b.std_error)


def test_girsanov_multi_insertion_pair_factor(unit_params):
    # two-insertion sets exercise the pairwise interaction constant
    ins = sg.make_insertions([(0.5, -0.25, 0.0), (0.5, 0.25, 0.0)], unit_params)
    d = sg.vertex_direct(ins, None, 1.0, unit_params, dt=1 / 16, n_modes=24,
                         theta_cells=48, n_samples=20000, seed=16)
    g = sg.vertex_girsanov(ins, 1.0, unit_params, dt=1 / 16, n_modes=24,
                           theta_cells=48, n_samples=20000, seed=17)
    assert agree(d.mean, d.std_error, g.mean, g.std_error)


# ---------------------------------------------------------------------------
# Two-point covariance
# ---------------------------------------------------------------------------

def test_two_point_zero_alpha_vanishes(unit_params):
    rows = sg.two_point_covariance((0.0, 0.0), (0.0, 0.0), [0.5], 1.0, unit_params,
                                   dt=1 / 8, n_modes=12, theta_cells=32,
                                   n_samples=512, seed=18, smc_runs=4)
    assert rows[0]["covariance"] == pytest.approx(0.0, abs=1e-12)


def test_two_point_positive_and_decaying(unit_params):
    rows = sg.two_point_covariance((0.5, 0.0), (0.5, 0.0), [0.25, 0.75], 1.0,
                                   unit_params, dt=1 / 32, n_modes=48,
                                   theta_cells=96, n_samples=40000, seed=19,
                                   smc_runs=10)
    c_short, c_long = rows[0], rows[1]
    assert c_short["covariance"] > 0
    assert c_short["covariance"] - 3 * c_short["std_error"] > -1e-9
    # decay: |cov| smaller at the larger separation, at combined error
    assert (c_short["covariance"] - c_long["covariance"]
            > -3 * math.hypot(c_short["std_error"], c_long["std_error"]))


def test_two_point_separation_fits_window(unit_params):
    with pytest.raises(WindowOutsideCylinder):
        sg.two_point_covariance((0.5, 0.0), (0.5, 0.0), [3.0], 1.0, unit_params,
                                n_samples=16)


# ---------------------------------------------------------------------------
# One-point scaling
# ---------------------------------------------------------------------------

def test_scaling_one_point_r1_exact(unit_params):
    rep = sg.scaling_one_point(0.5, 1.0, unit_params, t_half=1.0, dt=1 / 16,
                               n_modes=16, theta_cells=32, n_samples=2000, seed=20)
    assert rep["ratio"] == 1.0
    assert rep["target_ratio"] == 1.0
    assert rep["pass"]


def test_scaling_one_point_alpha_zero(unit_params):
    rep = sg.scaling_one_point(0.0, 2.0, unit_params, t_half=1.0, dt=1 / 16,
                               n_modes=16, theta_cells=32, n_samples=1000, seed=21)
    assert rep["lhs"] == pytest.approx(1.0, abs=1e-12)
    assert rep["rhs"] == pytest.approx(1.0, abs=1e-12)


def test_scaling_one_point_inadmissible(unit_params):
    with pytest.raises(InadmissibleAlpha):
        sg.scaling_one_point(3.0, 2.0, unit_params, n_samples=16)


def test_refinement_report_flags():
    from sinhgordon.correlations import refinement_report
    conv = refinement_report([8, 16, 32], [(1.10, 0.01), (1.05, 0.01), (1.049, 0.01)])
    assert conv["converged_flag"]
    assert conv["richardson_extrapolation"] == pytest.approx(1.048, abs=1e-9)
    rough = refinement_report([8, 16], [(2.0, 0.001), (1.0, 0.001)])
    assert not rough["converged_flag"]
    assert len(conv["sequence"]) == 3
