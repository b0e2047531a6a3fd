"""Exact free propagator kernel and Feynman-Kac semigroup estimators.

The interacting semigroup acts on functionals of a slice field by evolving
the free field and damping with the exponential of chaos masses; the
partition function of the finite cylinder integrates that damping over the
zero mode.  The zero-mode integral uses deterministic quadrature with common
random numbers: all c nodes share one set of field paths.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import GridSpanMismatch, NonPositiveTime, TailTolNotMet
from .gff import CircleField, TimeGrid, fluctuation_grid, sample_path_batch
from .gmc import GmcSpec, circle_potential_grid, region_time_weights, theta_nodes
from .params import ModelParams
from .parallel import map_chunks, seed_chunks
from .results import EstimatorResult, jackknife_func, mean_and_se, params_fingerprint

_EXP_CAP = 700.0  # exp argument cap; beyond this the FK weight underflows to 0


# ---------------------------------------------------------------------------
# Free kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelEval:
    """Kernel value with a certified truncation bound (|true - value| <= bound)."""

    t: float
    n_modes: int
    tail_tol: float
    value: float
    tail_bound: float


def mehler_factor(s: float, x, xp):
    """Single-coordinate transition factor against the stationary normal.

    (1-e^{-2s})^{-1/2} exp(-q_s(x,x')/(4 sinh s)) with
    q_s(x,x') = (x^2+x'^2) e^{-s} - 2 x x'; integrates to 1 in x' against the
    standard normal density.
    """
    q = (np.asarray(x) ** 2 + np.asarray(xp) ** 2) * np.exp(-s) - 2.0 * np.asarray(x) * np.asarray(xp)
    return np.exp(-q / (4.0 * np.sinh(s))) / np.sqrt(-np.expm1(-2.0 * s))


def _log_product_tail(t: float, n_from: int) -> float:
    """-sum_{n>n_from} log(1-e^{-2tn}), summed exactly via the k-series."""
    q = math.exp(-2.0 * t)
    total = 0.0
    k = 1
    while True:
        qk = q ** k
        term = qk ** (n_from + 1) / (k * (1.0 - qk))
        total += term
        if term < 1e-300 or term < 1e-18 * max(total, 1e-300):
            return total
        k += 1


def free_kernel(t: float, f1: CircleField, f2: CircleField, n_modes: int,
                tail_tol: float = 1e-10) -> KernelEval:
    """Evaluate the free propagator kernel between two slice fields.

    The zero-mode part is the heat kernel in the constants; each Fourier mode
    contributes a Mehler factor.  Modes above ``n_modes`` present in the
    fields are dropped; their worst-case contribution plus the (exactly
    summed) infinite product tail gives the certified ``tail_bound``.
    """
    if t <= 0.0:
        raise NonPositiveTime(f"propagator time must be > 0, got {t}")
    n_avail = min(f1.n_modes, f2.n_modes)
    if n_modes > n_avail:
        raise ValueError(f"n_modes={n_modes} exceeds available field modes {n_avail}")
    c1, c2 = f1.zero_mode, f2.zero_mode
    n = np.arange(1, n_modes + 1, dtype=float)
    s = t * n
    q_x = (f1.xs[:n_modes] ** 2 + f2.xs[:n_modes] ** 2) * np.exp(-s) \
        - 2.0 * f1.xs[:n_modes] * f2.xs[:n_modes]
    q_y = (f1.ys[:n_modes] ** 2 + f2.ys[:n_modes] ** 2) * np.exp(-s) \
        - 2.0 * f1.ys[:n_modes] * f2.ys[:n_modes]
    # q/(4 sinh s) written as q e^{-s} / (2 (1-e^{-2s})) to avoid sinh overflow
    inv_gain = np.exp(-s) / (2.0 * (-np.expm1(-2.0 * s)))
    log_val = (-0.5 * math.log(2.0 * math.pi * t)
               - (c1 - c2) ** 2 / (2.0 * t)
               - np.sum(np.log(-np.expm1(-2.0 * s)))
               - np.sum((q_x + q_y) * inv_gain)
               + _log_product_tail(t, n_modes))
    # worst-case magnitude of the dropped mode exponents
    bound_log = 0.0
    if n_avail > n_modes:
        m = np.arange(n_modes + 1, n_avail + 1, dtype=float)
        sm = t * m
        inv_gain_m = np.exp(-sm) / (2.0 * (-np.expm1(-2.0 * sm)))
        amp = (f1.xs[n_modes:n_avail] ** 2 + f2.xs[n_modes:n_avail] ** 2
               + f1.ys[n_modes:n_avail] ** 2 + f2.ys[n_modes:n_avail] ** 2)
        cross = 2.0 * (np.abs(f1.xs[n_modes:n_avail] * f2.xs[n_modes:n_avail])
                       + np.abs(f1.ys[n_modes:n_avail] * f2.ys[n_modes:n_avail]))
        bound_log = float(np.sum((amp * np.exp(-sm) + cross) * inv_gain_m))
    value = math.exp(log_val)
    bound = value * math.expm1(bound_log) if bound_log < _EXP_CAP else math.inf
    if bound > tail_tol:
        raise TailTolNotMet(
            f"certified truncation bound {bound:.3e} exceeds tail_tol={tail_tol}; "
            f"increase n_modes")
    return KernelEval(t=t, n_modes=n_modes, tail_tol=tail_tol, value=value, tail_bound=bound)


# ---------------------------------------------------------------------------
# Zero-mode quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CQuadrature:
    """Deterministic quadrature over the zero-mode window."""

    c_min: float
    c_max: float
    n_nodes: int = 65
    rule: str = "uniform-trapezoid"

    def __post_init__(self):
        if self.c_min >= self.c_max:
            raise ValueError("c_min must be < c_max")
        if self.n_nodes < 8:
            raise ValueError("n_nodes must be >= 8")
        if self.rule not in ("uniform-trapezoid", "gauss"):
            raise ValueError(f"unknown rule {self.rule!r}")

    def nodes(self):
        if self.rule == "uniform-trapezoid":
            c = np.linspace(self.c_min, self.c_max, self.n_nodes)
            w = np.full(self.n_nodes, (self.c_max - self.c_min) / (self.n_nodes - 1))
            w[0] *= 0.5
            w[-1] *= 0.5
            return c, w
        x, w = np.polynomial.legendre.leggauss(self.n_nodes)
        half = 0.5 * (self.c_max - self.c_min)
        return self.c_min + half * (x + 1.0), half * w


def default_c_quadrature(gamma: float, half_width: float = 8.0, n_nodes: int = 65) -> CQuadrature:
    """Window [-8/gamma, 8/gamma]: the double-exponential damping makes the
    tail negligible there; the boundary diagnostic checks this at run time."""
    return CQuadrature(-half_width / gamma, half_width / gamma, n_nodes)


# ---------------------------------------------------------------------------
# Shared path machinery
# ---------------------------------------------------------------------------

def mass_pair_slices(brownian, fields, gamma, renorm, dtheta):
    """Per-slice theta sums for both signs: returns (S+, S-), each (R, K+1).

    S_sigma[k] = e^{sigma*gamma*B_k} * sum_theta e^{sigma*gamma*field - (gamma^2/2) renorm} * dtheta
    """
    out = []
    for sigma in (+1, -1):
        expo = sigma * gamma * fields - 0.5 * gamma * gamma * renorm
        sums = np.exp(expo).sum(axis=-1) * dtheta
        out.append(np.exp(sigma * gamma * brownian) * sums)
    return out[0], out[1]


def fk_weights(mass_plus, mass_minus, cs, mu, gamma):
    """FK damping e^{-mu(e^{gc} M+ + e^{-gc} M-)} for paths x c nodes.

    Computed through logs with a cap so extreme masses underflow to weight 0
    instead of producing NaN.
    """
    cs = np.atleast_1d(cs)
    with np.errstate(divide="ignore"):
        log_p = np.log(mass_plus)[:, None] + gamma * cs[None, :]
        log_m = np.log(mass_minus)[:, None] - gamma * cs[None, :]
    total = np.exp(np.minimum(log_p, _EXP_CAP)) + np.exp(np.minimum(log_m, _EXP_CAP))
    return np.exp(-mu * total)


def _require_span(grid: TimeGrid, t: float) -> None:
    if t > grid.span * (1 + 1e-12) + 1e-12:
        raise GridSpanMismatch(f"grid span {grid.span} does not cover [0, {t}]")
    grid.index_of(t)


# ---------------------------------------------------------------------------
# Feynman-Kac estimators
# ---------------------------------------------------------------------------

def feynman_kac(observable, t: float, start, params: ModelParams, grid: TimeGrid,
                spec: GmcSpec, n_samples: int, seed, theta_cells: int = 128,
                batch: int = 256, workers: int = 1) -> EstimatorResult:
    """Monte Carlo estimate of the damped semigroup applied to an observable.

    ``start`` is (c, CircleField); paths are conditioned on that slice.
    ``observable(zero_total, x, y) -> (R,)`` receives c + B_t and the final
    mode coordinates; ``None`` means the constant 1.  Weights are the chaos
    masses of [0, t] x circle for both signs, combined in log space.
    """
    _require_span(grid, t)
    c0, init = start
    gamma, mu = params.gamma, params.mu_scaled
    weights_t = region_time_weights(grid, 0.0, t)
    nodes, dtheta = theta_nodes(theta_cells)
    k_end = grid.index_of(t)
    t0 = time.perf_counter()

    def run(chunk):
        sub_seed, size = chunk
        rng = np.random.default_rng(sub_seed)
        b, xs, ys = sample_path_batch(rng, size, init.n_modes, grid, initial=init)
        from .gmc import _effective_mode_arrays
        mx, my = _effective_mode_arrays(xs, ys, grid, spec)
        fields = fluctuation_grid(mx, my, nodes)
        sp, sm = mass_pair_slices(b, fields, gamma, spec.renorm_constant, dtheta)
        m_plus = (sp * weights_t).sum(axis=-1)
        m_minus = (sm * weights_t).sum(axis=-1)
        w = fk_weights(m_plus, m_minus, np.array([c0]), mu, gamma)[:, 0]
        if observable is None:
            obs = np.ones(size)
        else:
            obs = observable(c0 + b[:, k_end], xs[:, k_end, :], ys[:, k_end, :])
        return {"vals": obs * w}

    chunks = seed_chunks(seed, n_samples, batch)
    parts = map_chunks(run, chunks, workers)
    vals = np.concatenate([p["vals"] for p in parts])
    mean, se = mean_and_se(vals)
    return EstimatorResult(
        mean=mean, std_error=se, n_samples=n_samples, seed=_seed_int(seed),
        fingerprint=params_fingerprint({"op": "feynman_kac", "gamma": gamma, "mu": params.mu,
                                        "radius": params.radius, "t": t}),
        wall_ms=1e3 * (time.perf_counter() - t0))


def feynman_kac_circle_potential(observable, t: float, start, params: ModelParams,
                                 grid: TimeGrid, k_trunc: int, n_theta: int,
                                 n_samples: int, seed, batch: int = 256,
                                 workers: int = 1) -> EstimatorResult:
    """Same semigroup, with the damping written as a time integral of slice
    potentials instead of a two-dimensional mass."""
    import warnings
    if params.gamma >= math.sqrt(2.0):
        warnings.warn("circle-potential weights with gamma >= sqrt(2): the "
                      "untruncated potential does not exist in this regime",
                      RuntimeWarning, stacklevel=2)
    _require_span(grid, t)
    c0, init = start
    if k_trunc > init.n_modes:
        raise ValueError("k_trunc exceeds field mode count")
    gamma, mu = params.gamma, params.mu_scaled
    weights_t = region_time_weights(grid, 0.0, t)
    nodes, dtheta = theta_nodes(n_theta)
    k_end = grid.index_of(t)
    t0 = time.perf_counter()

    def run(chunk):
        sub_seed, size = chunk
        rng = np.random.default_rng(sub_seed)
        b, xs, ys = sample_path_batch(rng, size, init.n_modes, grid, initial=init)
        fields = fluctuation_grid(xs[..., :k_trunc], ys[..., :k_trunc], nodes)
        v_plus = circle_potential_grid(fields, +1, gamma, k_trunc, dtheta)
        v_minus = circle_potential_grid(fields, -1, gamma, k_trunc, dtheta)
        integ = (np.exp(np.minimum(gamma * (c0 + b), _EXP_CAP)) * v_plus
                 + np.exp(np.minimum(-gamma * (c0 + b), _EXP_CAP)) * v_minus)
        w = np.exp(-mu * (integ * weights_t).sum(axis=-1))
        if observable is None:
            obs = np.ones(size)
        else:
            obs = observable(c0 + b[:, k_end], xs[:, k_end, :], ys[:, k_end, :])
        return {"vals": obs * w}

    chunks = seed_chunks(seed, n_samples, batch)
    parts = map_chunks(run, chunks, workers)
    vals = np.concatenate([p["vals"] for p in parts])
    mean, se = mean_and_se(vals)
    return EstimatorResult(
        mean=mean, std_error=se, n_samples=n_samples, seed=_seed_int(seed),
        fingerprint=params_fingerprint({"op": "feynman_kac_circle", "gamma": gamma,
                                        "mu": params.mu, "radius": params.radius, "t": t}),
        wall_ms=1e3 * (time.perf_counter() - t0))


# ---------------------------------------------------------------------------
# Partition function
# ---------------------------------------------------------------------------

@dataclass
class PartitionPoint:
    """Z estimate at one cylinder half-height."""

    t_half: float
    z: float
    z_se: float
    log_z: float
    log_z_se: float
    boundary_fraction: float
    truncation_warning: bool
    samples: np.ndarray | None = field(default=None, repr=False)


def partition_curve(t_half_values, params: ModelParams, quad: CQuadrature,
                    dt: float, spec: GmcSpec, n_samples: int, seed,
                    theta_cells: int = 128, batch: int = 256, workers: int = 1,
                    keep_samples: bool = False) -> list[PartitionPoint]:
    """Z estimates at several half-heights from one set of shared paths.

    The chaos masses of the nested spans [0, 2T] are cumulative sums over the
    same paths, so the curve is per-sample coupled: larger T means more mass
    and a pointwise smaller weight.
    """
    t_half_values = sorted(float(v) for v in t_half_values)
    span = 2.0 * t_half_values[-1]
    n_steps = int(round(span / dt))
    if abs(n_steps * dt - span) > 1e-9:
        raise GridSpanMismatch(f"2*T_half={span} is not a multiple of dt={dt}")
    grid = TimeGrid(dt, n_steps)
    for th in t_half_values:
        grid.index_of(2.0 * th)
    gamma, mu = params.gamma, params.mu_scaled
    nodes, dtheta = theta_nodes(theta_cells)
    cs, cw = quad.nodes()
    n_modes = spec.n_modes if spec.kind == "fourier" else 64
    ends = [grid.index_of(2.0 * th) for th in t_half_values]
    trap = np.full(grid.n_steps + 1, dt)
    trap[0] = trap[-1] = dt / 2.0

    def run(chunk):
        sub_seed, size = chunk
        rng = np.random.default_rng(sub_seed)
        b, xs, ys = sample_path_batch(rng, size, n_modes, grid)
        from .gmc import _effective_mode_arrays
        mx, my = _effective_mode_arrays(xs, ys, grid, spec)
        fields = fluctuation_grid(mx, my, nodes)
        sp, sm = mass_pair_slices(b, fields, gamma, spec.renorm_constant, dtheta)
        # cumulative trapezoid masses of [0, t_k] for every grid node
        cum_p = np.cumsum(sp * dt, axis=-1) - 0.5 * dt * (sp + sp[:, :1])
        cum_m = np.cumsum(sm * dt, axis=-1) - 0.5 * dt * (sm + sm[:, :1])
        z_rows = np.empty((size, len(ends)))
        edge = np.zeros((size, len(ends), 2))
        peak = np.zeros((size, len(ends)))
        for j, k_end in enumerate(ends):
            w = fk_weights(cum_p[:, k_end], cum_m[:, k_end], cs, mu, gamma)
            z_rows[:, j] = w @ cw
            edge[:, j, 0] = w[:, 0]
            edge[:, j, 1] = w[:, -1]
            peak[:, j] = w.max(axis=1)
        return {"z": z_rows, "edge": edge, "peak": peak}

    chunks = seed_chunks(seed, n_samples, batch)
    parts = map_chunks(run, chunks, workers)
    z = np.concatenate([p["z"] for p in parts], axis=0)
    edge = np.concatenate([p["edge"] for p in parts], axis=0)
    peak = np.concatenate([p["peak"] for p in parts], axis=0)
    points = []
    for j, th in enumerate(t_half_values):
        mean, se = mean_and_se(z[:, j])
        log_z, log_se = jackknife_func([z[:, j]], lambda s: np.log(s))
        log_z = math.log(mean)
        frac = float(max(edge[:, j, 0].mean(), edge[:, j, 1].mean()) / max(peak[:, j].mean(), 1e-300))
        points.append(PartitionPoint(
            t_half=th, z=mean, z_se=se, log_z=log_z, log_z_se=log_se,
            boundary_fraction=frac, truncation_warning=frac > 1e-6,
            samples=z[:, j].copy() if keep_samples else None))
    return points


def partition_function(t_half: float, params: ModelParams, quad: CQuadrature,
                       grid: TimeGrid, spec: GmcSpec, n_samples: int, seed,
                       theta_cells: int = 128, workers: int = 1) -> EstimatorResult:
    """Partition function of the finite cylinder of half-height T."""
    import warnings
    _require_span(grid, 2.0 * t_half)
    t0 = time.perf_counter()
    pt = partition_curve([t_half], params, quad, grid.dt, spec, n_samples, seed,
                         theta_cells=theta_cells, workers=workers)[0]
    if pt.truncation_warning:
        warnings.warn(
            f"c-window boundary integrand is {pt.boundary_fraction:.2e} of the peak; "
            "widen the window", RuntimeWarning, stacklevel=2)
    res = EstimatorResult(
        mean=pt.z, std_error=pt.z_se, n_samples=n_samples, seed=_seed_int(seed),
        fingerprint=params_fingerprint({"op": "partition", "gamma": params.gamma,
                                        "mu": params.mu, "radius": params.radius,
                                        "t_half": t_half}),
        wall_ms=1e3 * (time.perf_counter() - t0))
    res.diagnostics = {"log_z": pt.log_z, "log_z_se": pt.log_z_se,
                       "boundary_fraction": pt.boundary_fraction,
                       "truncation_warning": pt.truncation_warning}
    return res


def _seed_int(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    if isinstance(seed, np.random.SeedSequence):
        ent = seed.entropy
        return int(ent if isinstance(ent, int) else ent[0])
    return -1
