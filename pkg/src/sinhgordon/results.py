"""Estimate records, stable merging, and error helpers."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FingerprintMismatch


def params_fingerprint(payload: dict) -> str:
    """Stable short hash of the parameter record that produced an estimate."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def mean_and_se(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and standard error (population-variance convention).

    se = sqrt(sum (x - mean)^2) / n, i.e. M2-based with no Bessel term; this
    makes pairwise merging exactly associative and self-merge shrink the
    standard error by sqrt(2).
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        return float("nan"), float("nan")
    m = float(values.mean())
    m2 = float(((values - m) ** 2).sum())
    return m, math.sqrt(m2) / n


def jackknife_ratio(num: np.ndarray, den: np.ndarray) -> tuple[float, float]:
    """Delete-one jackknife mean and s.e. of sum(num)/sum(den)."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = num.size
    total_n, total_d = num.sum(), den.sum()
    est = total_n / total_d
    if n < 2:
        return est, float("inf")
    loo = (total_n - num) / (total_d - den)
    return est, math.sqrt((n - 1) / n * ((loo - loo.mean()) ** 2).sum())


def jackknife_func(columns: list[np.ndarray], func) -> tuple[float, float]:
    """Delete-one jackknife of func(col_sums...) for per-replica columns."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    n = cols[0].size
    totals = [c.sum() for c in cols]
    est = func(*totals)
    if n < 2:
        return est, float("inf")
    loo = func(*[(t - c) for t, c in zip(totals, cols)])
    loo = np.asarray(loo, dtype=float)
    return float(est), math.sqrt((n - 1) / n * ((loo - loo.mean()) ** 2).sum())


@dataclass
class EstimatorResult:
    """One Monte Carlo estimate with full provenance."""

    mean: float
    std_error: float
    n_samples: int
    seed: int
    fingerprint: str
    wall_ms: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def to_record(self, experiment: str) -> dict:
        rec = {
            "experiment": experiment,
            "fingerprint": self.fingerprint,
            "estimate": self.mean,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "wall_ms": round(self.wall_ms, 3),
        }
        if self.diagnostics:
            rec["diagnostics"] = _jsonable(self.diagnostics)
        return rec


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def merge_results(a: EstimatorResult, b: EstimatorResult) -> EstimatorResult:
    """Numerically stable pairwise combination of two estimates.

    Means and M2 values combine with the standard pairwise update; the
    operation is associative to rounding and order-fixed by the caller.
    """
    if a.fingerprint != b.fingerprint:
        raise FingerprintMismatch(
            f"cannot merge estimates with fingerprints {a.fingerprint} != {b.fingerprint}")
    na, nb = a.n_samples, b.n_samples
    n = na + nb
    delta = b.mean - a.mean
    mean = a.mean + delta * nb / n
    m2 = (a.std_error * na) ** 2 + (b.std_error * nb) ** 2 + delta ** 2 * na * nb / n
    return EstimatorResult(
        mean=mean,
        std_error=math.sqrt(m2) / n,
        n_samples=n,
        seed=a.seed,
        fingerprint=a.fingerprint,
        wall_ms=a.wall_ms + b.wall_ms,
    )
