import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sinhgordon import EstimatorResult, merge_results
from sinhgordon.errors import FingerprintMismatch
from sinhgordon.results import jackknife_ratio, mean_and_se, params_fingerprint


def _result(values, fp="f0"):
    m, se = mean_and_se(np.asarray(values, dtype=float))
    return EstimatorResult(mean=m, std_error=se, n_samples=len(values), seed=0,
                           fingerprint=fp)


def test_self_merge_halves_variance():
    r = _result([1.0, 2.0, 4.0, 5.0])
    m = merge_results(r, r)
    assert m.n_samples == 8
    assert m.mean == pytest.approx(r.mean, rel=1e-15)
    assert m.std_error == pytest.approx(r.std_error / math.sqrt(2.0), rel=1e-12)


def test_merge_matches_pooled_statistics():
    rng = np.random.default_rng(5)
    a = rng.normal(2.0, 1.0, 337)
    b = rng.normal(2.1, 1.5, 211)
    merged = merge_results(_result(a), _result(b))
    pooled_m, pooled_se = mean_and_se(np.concatenate([a, b]))
    assert merged.mean == pytest.approx(pooled_m, rel=1e-12)
    assert merged.std_error == pytest.approx(pooled_se, rel=1e-12)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40),
       st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40),
       st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40))
@settings(max_examples=60, deadline=None)
def test_merge_associative(a, b, c):
    ra, rb, rc = _result(a), _result(b), _result(c)
    left = merge_results(merge_results(ra, rb), rc)
    right = merge_results(ra, merge_results(rb, rc))
    assert left.mean == pytest.approx(right.mean, abs=1e-9 * (1 + abs(left.mean)))
    assert left.std_error == pytest.approx(right.std_error, abs=1e-9 * (1 + left.std_error))
    assert left.n_samples == right.n_samples


def test_fingerprint_mismatch():
    with pytest.raises(FingerprintMismatch):
        merge_results(_result([1, 2], "a"), _result([1, 2], "b"))


def test_fingerprint_stable_and_order_free():
    f1 = params_fingerprint({"gamma": 1.0, "mu": 2.0})
    f2 = params_fingerprint({"mu": 2.0, "gamma": 1.0})
    assert f1 == f2
    assert f1 != params_fingerprint({"gamma": 1.5, "mu": 2.0})


def test_jackknife_ratio_exact_for_constant():
    num = np.full(50, 3.0)
    den = np.full(50, 1.5)
    est, se = jackknife_ratio(num, den)
    assert est == pytest.approx(2.0)
    assert se == pytest.approx(0.0, abs=1e-12)


def test_jackknife_ratio_reasonable_scale():
    rng = np.random.default_rng(9)
    den = np.exp(rng.normal(0, 0.2, 4000))
    num = den * (1.0 + rng.normal(0, 0.5, 4000))
    est, se = jackknife_ratio(num, den)
    assert est == pytest.approx(1.0, abs=5 * se)
    assert 0.001 < se < 0.05
