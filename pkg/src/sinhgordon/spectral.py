"""Spectral extraction: lowest eigenvalue, gap from decay fits, profile proxy.

The lowest eigenvalue comes from the large-T slope of the log partition
function, the gap from log-linear decay fits of truncated two-point
functions.  Nothing here is a closed-form target; all numbers are
artifact-derived, so the module carries fit diagnostics rather than
reference values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFit, SignalLost
from .gff import TimeGrid, sample_path_batch, fluctuation_grid
from .gmc import harmonic_number, theta_nodes
from .params import ModelParams, reduce_to_unit_radius
from .parallel import map_chunks, seed_chunks
from .propagator import CQuadrature, mass_pair_slices
from .results import mean_and_se


@dataclass
class SpectralEstimate:
    """A fitted rate with its propagated error and fit diagnostics."""

    value: float
    std_error: float
    fit_window: list
    intercept: float = 0.0
    r_squared: float = float("nan")
    residuals: list = field(default_factory=list)


def _weighted_line_fit(x, y, y_se):
    """Weighted least squares y = a + b x; returns (a, b, se_b, r2, residuals).

    Zero input errors mean an exact fit request: uniform weights and exact
    error propagation (se_b = 0).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    y_se = np.asarray(y_se, dtype=float)
    if x.size < 3:
        raise DegenerateFit("need at least 3 points")
    if np.ptp(x) == 0:
        raise DegenerateFit("all abscissae equal")
    if np.any(y_se < 0):
        raise ValueError("negative standard errors")
    w = np.ones_like(x) if np.all(y_se == 0) else 1.0 / np.maximum(y_se, 1e-300) ** 2
    sw = w.sum()
    xbar = (w * x).sum() / sw
    ybar = (w * y).sum() / sw
    sxx = (w * (x - xbar) ** 2).sum()
    if sxx == 0:
        raise DegenerateFit("degenerate abscissae")
    b = (w * (x - xbar) * (y - ybar)).sum() / sxx
    a = ybar - b * xbar
    se_b = 0.0 if np.all(y_se == 0) else math.sqrt(1.0 / sxx)
    resid = y - (a + b * x)
    ss_tot = (w * (y - ybar) ** 2).sum()
    r2 = 1.0 - (w * resid ** 2).sum() / ss_tot if ss_tot > 0 else 1.0
    return a, b, se_b, r2, resid


def lambda0_fit(t_values, log_z) -> SpectralEstimate:
    """Lowest eigenvalue from log Z against 2T: the slope is -lambda0.

    ``log_z`` is a list of (estimate, standard error).  Adding a constant to
    all estimates leaves the result unchanged.
    """
    t_values = [float(t) for t in t_values]
    if sorted(t_values) != t_values or len(set(t_values)) != len(t_values):
        raise DegenerateFit("T values must be strictly increasing")
    y = [v for v, _ in log_z]
    se = [s for _, s in log_z]
    a, b, se_b, r2, resid = _weighted_line_fit([2.0 * t for t in t_values], y, se)
    return SpectralEstimate(value=-b, std_error=se_b, fit_window=t_values,
                            intercept=a, r_squared=r2, residuals=list(resid))


def spectral_gap_fit(separations, covariances) -> SpectralEstimate:
    """Decay rate of |covariance| against separation (= the spectral gap).

    Every covariance must be bounded away from zero at 3 standard errors;
    otherwise the log transform is meaningless and SignalLost is raised.
    """
    separations = [float(s) for s in separations]
    vals = np.array([v for v, _ in covariances], dtype=float)
    ses = np.array([s for _, s in covariances], dtype=float)
    if len(separations) < 3:
        raise DegenerateFit("need at least 3 separations")
    if np.any(np.abs(vals) <= 3.0 * ses):
        raise SignalLost("covariance consistent with zero at some separation")
    y = np.log(np.abs(vals))
    y_se = ses / np.abs(vals)
    a, b, se_b, r2, resid = _weighted_line_fit(separations, y, y_se)
    return SpectralEstimate(value=-b, std_error=se_b, fit_window=separations,
                            intercept=a, r_squared=r2, residuals=list(resid))


def lambda0_scaling_probe(r_values, lambda0_estimates) -> SpectralEstimate:
    """EXPERIMENTAL: log-log slope of lambda0 against the cylinder radius.

    Directional only; the conjectured large-R exponent is 2 but no pass/fail
    is attached at desk scale.
    """
    r_values = [float(r) for r in r_values]
    vals = np.array([v for v, _ in lambda0_estimates], dtype=float)
    ses = np.array([s for _, s in lambda0_estimates], dtype=float)
    if np.any(vals <= 0):
        raise DegenerateFit("lambda0 estimates must be positive for a log-log fit")
    y = np.log(vals)
    y_se = ses / vals
    a, b, se_b, r2, resid = _weighted_line_fit(np.log(r_values), y, y_se)
    return SpectralEstimate(value=b, std_error=se_b, fit_window=r_values,
                            intercept=a, r_squared=r2, residuals=list(resid))


# ---------------------------------------------------------------------------
# Ground-state profile proxy
# ---------------------------------------------------------------------------

@dataclass
class GroundStateProfile:
    """Binned (c, x_1) marginal proxy of the ground state, normalized to 1.

    Values approximate the damped-evolution image of the constant function up
    to one global constant; higher modes are integrated out.
    """

    t_used: float
    c_edges: np.ndarray
    x_edges: np.ndarray
    values: np.ndarray        # (nc, nx), sums to 1 over filled bins
    std_errors: np.ndarray
    counts: np.ndarray

    def rows(self):
        for i in range(self.values.shape[0]):
            for j in range(self.values.shape[1]):
                yield (0.5 * (self.c_edges[i] + self.c_edges[i + 1]),
                       0.5 * (self.x_edges[j] + self.x_edges[j + 1]),
                       self.values[i, j], self.std_errors[i, j], int(self.counts[i, j]))


def ground_state_profile(t: float, params: ModelParams, *, dt: float = 1.0 / 32.0,
                         n_modes: int = 64, theta_cells: int = 128,
                         quad: CQuadrature | None = None,
                         bins: tuple[int, int] = (12, 8), x_range: float = 3.0,
                         n_samples: int = 20000, seed=0, batch: int = 256,
                         workers: int = 1) -> GroundStateProfile:
    """Conditional damping weight binned over the start slice (c, x_1).

    The zero mode of the start is drawn uniformly over the quadrature window
    (Lebesgue reference), the rest stationary; each replica contributes its
    damping weight over [0, t] to the bin of its start.
    """
    pu = reduce_to_unit_radius(params)
    gamma, mu = pu.gamma, pu.mu
    if quad is None:
        from .propagator import default_c_quadrature
        quad = default_c_quadrature(gamma)
    n_steps = int(round(t / dt))
    if abs(n_steps * dt - t) > 1e-9:
        raise ValueError(f"t={t} is not a multiple of dt={dt}")
    grid = TimeGrid(dt, n_steps)
    nodes, dtheta = theta_nodes(theta_cells)
    trap = np.full(grid.n_steps + 1, dt)
    trap[0] = trap[-1] = dt / 2.0
    renorm = harmonic_number(n_modes)
    nc, nx = bins
    c_edges = np.linspace(quad.c_min, quad.c_max, nc + 1)
    x_edges = np.linspace(-x_range, x_range, nx + 1)

    def run(chunk):
        sub_seed, size = chunk
        rng = np.random.default_rng(sub_seed)
        cs = rng.uniform(quad.c_min, quad.c_max, size)
        b, xs, ys = sample_path_batch(rng, size, n_modes, grid)
        fields = fluctuation_grid(xs, ys, nodes)
        sp, sm = mass_pair_slices(b, fields, gamma, renorm, dtheta)
        m_plus = (sp * trap).sum(axis=-1)
        m_minus = (sm * trap).sum(axis=-1)
        with np.errstate(divide="ignore"):
            lp = np.log(m_plus) + gamma * cs
            lm = np.log(m_minus) - gamma * cs
        w = np.exp(-mu * (np.exp(np.minimum(lp, 700.0)) + np.exp(np.minimum(lm, 700.0))))
        return {"c": cs, "x1": xs[:, 0, 0], "w": w}

    chunks = seed_chunks(seed, n_samples, batch)
    parts = map_chunks(run, chunks, workers)
    cs = np.concatenate([p["c"] for p in parts])
    x1 = np.concatenate([p["x1"] for p in parts])
    w = np.concatenate([p["w"] for p in parts])

    values = np.zeros((nc, nx))
    ses = np.zeros((nc, nx))
    counts = np.zeros((nc, nx), dtype=int)
    ci = np.clip(np.digitize(cs, c_edges) - 1, 0, nc - 1)
    xi = np.clip(np.digitize(x1, x_edges) - 1, 0, nx - 1)
    for i in range(nc):
        for j in range(nx):
            sel = (ci == i) & (xi == j)
            counts[i, j] = sel.sum()
            if counts[i, j] > 1:
                values[i, j], ses[i, j] = mean_and_se(w[sel])
    total = values.sum()
    if total <= 0:
        raise SignalLost("all profile bins empty or zero")
    return GroundStateProfile(t_used=t, c_edges=c_edges, x_edges=x_edges,
                              values=values / total, std_errors=ses / total,
                              counts=counts)
