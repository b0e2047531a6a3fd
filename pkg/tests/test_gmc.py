import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import sinhgordon as sg
from sinhgordon.errors import EmptyRegion
from sinhgordon.gff import TimeGrid
from sinhgordon.gmc import (
    Region,
    circle_spec,
    expected_mass,
    fourier_spec,
    sample_region_masses,
)

from conftest import agree


def test_harmonic_number_values():
    assert sg.renorm_constant(1) == 1.0
    assert sg.renorm_constant(2) == 1.5
    # anchors the large-N asymptotics log N + Euler-Mascheroni
    h = sg.renorm_constant(10 ** 6)
    assert h - math.log(10 ** 6) == pytest.approx(0.577216, abs=1e-6)


def test_gmc_spec_renorm_constants():
    assert fourier_spec(+1, 3).renorm_constant == pytest.approx(1 + 0.5 + 1 / 3, rel=1e-15)
    assert circle_spec(-1, 1 / 16).renorm_constant == pytest.approx(math.log(16.0), rel=1e-15)
    with pytest.raises(ValueError):
        sg.GmcSpec(sigma=0, kind="fourier", n_modes=4)


# ---------------------------------------------------------------------------
# Mass of a region: small-coupling limit, mean identity, sign symmetry
# ---------------------------------------------------------------------------

def _unit_path(n_modes=16, dt=1 / 16, k=16, seed=0, c=0.0):
    init = sg.sample_circle_field(n_modes, "stationary", seed=seed)
    return sg.evolve_path(init, c, TimeGrid(dt, k), seed=seed)


def test_mass_small_gamma_is_area():
    p = sg.validate_params(1e-9, 1.0, 1.0)
    path = _unit_path(seed=5)
    m = sg.gmc_mass(path, Region(0.0, 1.0), fourier_spec(+1, 16), p, theta_cells=64)
    assert m == pytest.approx(2 * math.pi, abs=1e-6)


def test_mass_mean_identity_gamma_1(unit_params):
    masses = sample_region_masses(Region(0.0, 1.0), fourier_spec(+1, 64), unit_params,
                                  8000, seed=101, dt=1 / 64, theta_cells=128)
    mean = masses.mean()
    se = masses.std() / math.sqrt(masses.size)
    target = expected_mass(Region(0.0, 1.0), unit_params)
    assert target == pytest.approx(8.15206, abs=1e-4)
    assert agree(mean, se, target, 0.0)


def test_mass_mean_identity_any_n_modes(unit_params):
    # renormalization is exact at every truncation, not just N = 64
    for n in (4, 16):
        masses = sample_region_masses(Region(0.0, 1.0), fourier_spec(+1, n), unit_params,
                                      6000, seed=7 + n, dt=1 / 32, theta_cells=96)
        mean = masses.mean()
        se = masses.std() / math.sqrt(masses.size)
        assert agree(mean, se, expected_mass(Region(0.0, 1.0), unit_params), 0.0)


def test_mass_mean_gamma_half():
    p = sg.validate_params(0.5, 1.0, 1.0)
    masses = sample_region_masses(Region(0.0, 1.0), fourier_spec(+1, 64), p,
                                  6000, seed=42, dt=1 / 64, theta_cells=128)
    target = expected_mass(Region(0.0, 1.0), p)
    assert target == pytest.approx(6.69279, abs=1e-4)
    assert agree(masses.mean(), masses.std() / math.sqrt(masses.size), target, 0.0)


def test_sign_symmetry_per_sample(unit_params):
    path = _unit_path(seed=31)
    neg = _unit_path(seed=31)
    neg.brownian[:] = -neg.brownian
    neg.mode_x[:] = -neg.mode_x
    neg.mode_y[:] = -neg.mode_y
    region = Region(0.25, 0.75)
    m_minus = sg.gmc_mass(path, region, fourier_spec(-1, 16), unit_params, 64)
    m_plus_negated = sg.gmc_mass(neg, region, fourier_spec(+1, 16), unit_params, 64)
    assert m_minus == pytest.approx(m_plus_negated, rel=1e-12)


def test_mass_nonnegative_and_region_checks(unit_params):
    path = _unit_path(seed=8)
    assert sg.gmc_mass(path, Region(0.5, 0.5), fourier_spec(+1, 16), unit_params, 64) == 0.0
    m = sg.gmc_mass(path, Region(0.0, 1.0), fourier_spec(+1, 16), unit_params, 64)
    assert m > 0.0
    with pytest.raises(Exception):
        sg.gmc_mass(path, Region(0.0, 9.0), fourier_spec(+1, 16), unit_params, 64)


def test_arc_region_mass_additivity(unit_params):
    path = _unit_path(seed=12)
    full = sg.gmc_mass(path, Region(0.0, 1.0), fourier_spec(+1, 16), unit_params, 128)
    left = sg.gmc_mass(path, Region(0.0, 1.0, arc=(0.0, math.pi)),
                       fourier_spec(+1, 16), unit_params, 64)
    right = sg.gmc_mass(path, Region(0.0, 1.0, arc=(math.pi, 2 * math.pi)),
                        fourier_spec(+1, 16), unit_params, 64)
    assert left + right == pytest.approx(full, rel=1e-9)


def test_log_sum_exp_never_nan(unit_params):
    path = _unit_path(seed=3)
    path.brownian[:] += 300.0  # extreme but finite shift
    m = sg.gmc_mass(path, Region(0.0, 1.0), fourier_spec(+1, 16), unit_params, 64)
    assert math.isfinite(math.log(m))


# ---------------------------------------------------------------------------
# Weighted mass
# ---------------------------------------------------------------------------

def test_weighted_mass_empty_and_zero_alpha(unit_params):
    path = _unit_path(seed=14)
    region = Region(0.25, 0.75)
    base = sg.gmc_mass(path, region, fourier_spec(+1, 16), unit_params, 64)
    same = sg.gmc_mass_weighted(path, region, fourier_spec(+1, 16), unit_params, [], 64)
    zero = sg.gmc_mass_weighted(path, region, fourier_spec(+1, 16), unit_params,
                                [(0.0, 0.5, 1.0)], 64)
    assert same == base
    assert zero == pytest.approx(base, rel=1e-12)


def test_weighted_mass_far_insertion_increases(unit_params):
    # insertion deep below the region: |e^{-s+i th} - e^{-t1+i th1}| < 1 on the
    # whole region, so a positive weight exponent raises the density pointwise
    path = _unit_path(dt=1 / 16, k=16, seed=15)
    region = Region(0.125, 0.375)
    w = sg.gmc_mass_weighted(path, region, fourier_spec(+1, 16), unit_params,
                             [(0.8, 3.2, 0.0)], 64)
    base = sg.gmc_mass(path, region, fourier_spec(+1, 16), unit_params, 64)
    assert w >= base


def test_weighted_mass_pole_jitter(unit_params):
    # insertion exactly on a cell midpoint must not produce inf/nan
    path = _unit_path(dt=1 / 16, k=16, seed=16)
    region = Region(0.0, 1.0)
    nodes_theta = (2 * math.pi) * (0.5 + 0.0) / 64  # first midpoint
    m = sg.gmc_mass_weighted(path, region, fourier_spec(+1, 16), unit_params,
                             [(0.5, 0.5, nodes_theta)], 64)
    assert math.isfinite(m) and m > 0


# ---------------------------------------------------------------------------
# Circle potential
# ---------------------------------------------------------------------------

def test_circle_potential_zero_field(unit_params):
    field = sg.sample_circle_field(8, ("fixed", np.zeros(8), np.zeros(8)))
    v = sg.circle_potential(field, +1, 8, unit_params, theta_cells=64)
    assert v == pytest.approx(2 * math.pi * math.exp(-0.5 * sg.renorm_constant(8)), rel=1e-12)


def test_circle_potential_unit_mean(unit_params):
    vals = []
    for s in range(4000):
        field = sg.sample_circle_field(32, "stationary", seed=s)
        vals.append(sg.circle_potential(field, +1, 32, unit_params, theta_cells=64))
    vals = np.array(vals)
    assert agree(vals.mean(), vals.std() / math.sqrt(len(vals)), 2 * math.pi, 0.0)


def test_circle_potential_sign_symmetry(unit_params):
    field = sg.sample_circle_field(16, "stationary", seed=77)
    neg = sg.sample_circle_field(16, ("fixed", -field.xs, -field.ys))
    v_minus = sg.circle_potential(field, -1, 16, unit_params, 64)
    v_plus_neg = sg.circle_potential(neg, +1, 16, unit_params, 64)
    assert v_minus == pytest.approx(v_plus_neg, rel=1e-12)


def test_circle_potential_warns_large_gamma():
    p = sg.validate_params(1.8, 1.0, 1.0)
    field = sg.sample_circle_field(8, "stationary", seed=1)
    with pytest.warns(RuntimeWarning):
        sg.circle_potential(field, +1, 8, p, 32)


# ---------------------------------------------------------------------------
# Regularization agreement, scaling, moments
# ---------------------------------------------------------------------------

def test_regularization_agreement(unit_params):
    region = Region(0.5, 1.5)
    mf = sample_region_masses(region, fourier_spec(+1, 64), unit_params, 4000,
                              seed=201, dt=1 / 64, theta_cells=128)
    mc = sample_region_masses(region, circle_spec(+1, 1 / 16), unit_params, 4000,
                              seed=202, dt=1 / 64, theta_cells=128)
    assert agree(mf.mean(), mf.std() / 63.2, mc.mean(), mc.std() / 63.2)


def test_scaling_check_r2(unit_params):
    rep = sg.scaling_check(Region(0.0, 1.0), sg.validate_params(1.0, 1.0, 2.0),
                           n_samples=4000, seed=55, dt=1 / 64, theta_cells=128)
    assert rep["target_ratio"] == pytest.approx(2 ** 2.5, rel=1e-12)
    assert rep["pass"]
    assert rep["ratio"] == pytest.approx(2 ** 2.5, rel=0.1)


def test_scaling_check_r1_identical(unit_params):
    rep = sg.scaling_check(Region(0.0, 1.0), unit_params, n_samples=500, seed=9,
                           dt=1 / 32, theta_cells=64)
    assert rep["mean_scaled_side"] == rep["mean_unit_side"]
    assert rep["ratio"] == 1.0


def test_scaling_check_degenerate_region(unit_params):
    rep = sg.scaling_check(Region(0.5, 0.5), sg.validate_params(1.0, 1.0, 2.0),
                           n_samples=200, seed=3, dt=1 / 32, theta_cells=64)
    assert rep["mean_scaled_side"] == 0.0
    assert rep["mean_unit_side"] == 0.0


def test_moment_estimator_first_moment(unit_params):
    res = sg.moment_estimator(Region(0.0, 1.0), fourier_spec(+1, 64), unit_params,
                              p=1.0, n_samples=6000, seed=61, dt=1 / 32, theta_cells=96)
    assert agree(res.mean, res.std_error, expected_mass(Region(0.0, 1.0), unit_params), 0.0)


def test_moment_estimator_negative_moment_stable(unit_params):
    res = sg.moment_estimator(Region(0.5, 1.0), fourier_spec(+1, 32), unit_params,
                              p=-1.0, n_samples=8000, seed=62, dt=1 / 32, theta_cells=96)
    assert math.isfinite(res.mean)
    assert not res.diagnostics["heavy_tail_flag"]


def test_moment_estimator_heavy_tail_flag(unit_params):
    # p = 4/gamma^2 + 1 = 5 at gamma = 1: beyond the finite-moment range
    res = sg.moment_estimator(Region(0.0, 1.0), fourier_spec(+1, 32), unit_params,
                              p=5.0, n_samples=8000, seed=63, dt=1 / 32, theta_cells=96)
    assert res.diagnostics["heavy_tail_flag"]


def test_moment_estimator_empty_region(unit_params):
    with pytest.raises(EmptyRegion):
        sg.moment_estimator(Region(1.0, 1.0), fourier_spec(+1, 16), unit_params,
                            p=1.0, n_samples=100, seed=1)


@given(t0=st.floats(0, 1), span=st.floats(0.1, 1.0))
@settings(max_examples=20, deadline=None)
def test_expected_mass_positive_monotone(t0, span):
    p = sg.validate_params(1.0, 1.0, 1.0)
    small = expected_mass(Region(t0, t0 + span / 2), p)
    big = expected_mass(Region(t0, t0 + span), p)
    assert 0 < small < big
