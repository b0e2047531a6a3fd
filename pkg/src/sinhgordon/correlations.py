"""Finite-cylinder expectations and vertex correlations.

The finite cylinder [-T, T] x circle maps to process time [0, 2T]; all
estimators below are ratio estimators in which numerator and normalization
share paths and zero-mode quadrature nodes (common random numbers), with
delete-one jackknife errors.  Vertex insertions are renormalized
exponentials of the field; they can be estimated either directly or through
an exact change of measure that trades the exponential for a deterministic
field shift plus an insertion-weighted chaos mass.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InadmissibleAlpha,
    InadmissibleInsertions,
    WindowOutsideCylinder,
)
from .gff import TimeGrid, fluctuation_grid, sample_path_batch, truncated_slice_cov
from .gmc import GmcSpec, fourier_spec, harmonic_number, theta_nodes
from .params import ModelParams, reduce_to_unit_radius, validate_params
from .parallel import map_chunks, seed_chunks, stateless_children
from .propagator import CQuadrature, default_c_quadrature, fk_weights, mass_pair_slices, _seed_int
from .results import EstimatorResult, jackknife_func, jackknife_ratio, params_fingerprint
from .smc import ShiftTask, SmcSettings, combine_ratio, smc_flow


# ---------------------------------------------------------------------------
# Insertions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InsertionSet:
    """Vertex insertions (alpha, t, theta) in window coordinates.

    ``admissible`` is derived: every |alpha| must stay strictly below the
    bound Q of the model the set was built against.
    """

    entries: tuple[tuple[float, float, float], ...]
    q_bound: float

    def __post_init__(self):
        seen = set()
        for _, t, th in self.entries:
            key = (round(t, 12), round(th % (2.0 * np.pi), 12))
            if key in seen:
                raise ValueError(f"repeated insertion point (t={t}, theta={th})")
            seen.add(key)

    @property
    def admissible(self) -> bool:
        return all(abs(a) < self.q_bound for a, _, _ in self.entries)

    @property
    def total_alpha(self) -> float:
        return sum(a for a, _, _ in self.entries)


def make_insertions(entries, params: ModelParams) -> InsertionSet:
    return InsertionSet(tuple((float(a), float(t), float(th)) for a, t, th in entries),
                        q_bound=params.q_const)


# ---------------------------------------------------------------------------
# Change-of-measure data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShiftData:
    """Deterministic shift induced by removing vertex exponentials.

    ``insertions`` hold process-time coordinates (alpha, s_i, theta_i).  The
    covariance kernel is either the closed form of the full field
    (kernel="exact") or the mode-truncated sum actually sampled
    (kernel=N as an int); the latter makes the change of measure exact in law
    for the simulated process.
    """

    insertions: tuple[tuple[float, float, float], ...]
    kernel: int | str = "exact"

    def _mode_cov(self, s, thetas, s_i: float, th_i: float):
        s = np.asarray(s, dtype=float)
        thetas = np.asarray(thetas, dtype=float)
        if self.kernel == "exact":
            z = np.exp(-s[:, None] + 1j * thetas[None, :])
            sep = np.abs(z - np.exp(-s_i + 1j * th_i))
            return -np.minimum(s[:, None], s_i) - np.log(sep)
        dt = np.abs(s[:, None] - s_i) + 0.0 * thetas[None, :]
        dth = (thetas[None, :] - th_i) + 0.0 * s[:, None]
        return truncated_slice_cov(int(self.kernel), dt, dth)

    def boundary_h(self, thetas) -> np.ndarray:
        """Shift of the initial slice: sum_i alpha_i Cov(phi_0(theta), phi_{s_i}(theta_i))."""
        return self.bulk(0.0, thetas)[0]

    def bulk(self, s, thetas) -> np.ndarray:
        """Mode-field shift on slices, shape (len(s), len(thetas)); decays as s grows."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        total = np.zeros((s.size, thetas.size))
        for a, s_i, th_i in self.insertions:
            total += a * self._mode_cov(s, thetas, s_i, th_i)
        return total

    def drift(self, s) -> np.ndarray:
        """Zero-mode drift sum_i alpha_i min(s, s_i)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        total = np.zeros_like(s)
        for a, s_i, _ in self.insertions:
            total += a * np.minimum(s, s_i)
        return total

    def total_grid(self, s, thetas) -> np.ndarray:
        """Full field shift drift(s) + bulk(s, theta) on a (time, theta) grid."""
        return self.drift(s)[:, None] + self.bulk(s, thetas)

    def scalar_log(self) -> float:
        """Log of the constant produced by the change of measure.

        (1/2) sum_i alpha_i^2 s_i plus the pairwise interaction
        sum_{i<j} alpha_i alpha_j [min(s_i,s_j) + Cov(phi_{s_i}(th_i), phi_{s_j}(th_j))]
        (empty for a single insertion).
        """
        total = 0.5 * sum(a * a * s_i for a, s_i, _ in self.insertions)
        ins = self.insertions
        for i in range(len(ins)):
            for j in range(i + 1, len(ins)):
                a_i, s_i, th_i = ins[i]
                a_j, s_j, th_j = ins[j]
                cov = float(self._mode_cov(np.array([s_i]), np.array([th_i]), s_j, th_j)[0, 0])
                total += a_i * a_j * (min(s_i, s_j) + cov)
        return total


# ---------------------------------------------------------------------------
# Window view passed to observables
# ---------------------------------------------------------------------------

@dataclass
class WindowPaths:
    """Batch of paths exposed in window coordinates (t in [-T, T])."""

    grid: TimeGrid
    t_half: float
    brownian: np.ndarray            # (R, K+1)
    mode_x: np.ndarray = field(repr=False, default=None)
    mode_y: np.ndarray = field(repr=False, default=None)

    def index(self, t_window: float) -> int:
        return self.grid.index_of(t_window + self.t_half)

    def zero(self, t_window: float) -> np.ndarray:
        """Brownian value at a window time; add the c node yourself."""
        return self.brownian[:, self.index(t_window)]

    def field_at(self, t_window: float, theta: float, n_modes: int | None = None) -> np.ndarray:
        k = self.index(t_window)
        return fluctuation_grid(self.mode_x[:, k, :], self.mode_y[:, k, :],
                                np.array([theta]), n_modes)[:, 0]


# ---------------------------------------------------------------------------
# Shared finite-cylinder engine
# ---------------------------------------------------------------------------

def _insertion_field_values(b, xs, ys, grid, entries_proc, reg: GmcSpec):
    """log prod_i e^{alpha_i (B_{s_i} + phi_reg(s_i, theta_i)) - (alpha_i^2/2) renorm}."""
    log_v = np.zeros(b.shape[0])
    renorm = reg.renorm_constant
    for a, s_i, th_i in entries_proc:
        k = grid.index_of(s_i)
        if reg.kind == "fourier":
            val = fluctuation_grid(xs[:, k, :], ys[:, k, :], np.array([th_i]),
                                   reg.n_modes)[:, 0]
        else:
            qp = reg.quadrature_points
            v = 2.0 * np.pi * (np.arange(qp) + 0.5) / qp
            offs = np.rint(reg.epsilon * np.cos(v) / grid.dt).astype(int)
            acc = np.zeros(b.shape[0])
            for off, ang in zip(offs, reg.epsilon * np.sin(v)):
                kk = k + off
                if kk < 0 or kk > grid.n_steps:
                    raise WindowOutsideCylinder("averaging circle leaves the window")
                acc += fluctuation_grid(xs[:, kk, :], ys[:, kk, :],
                                        np.array([th_i + ang]))[:, 0]
            val = acc / qp
        log_v += a * (b[:, k] + val) - 0.5 * a * a * renorm
    return log_v


def _cylinder_engine(params: ModelParams, t_half: float, dt: float, n_modes: int,
                     theta_cells: int, quad: CQuadrature, n_samples: int, seed,
                     tasks, batch: int = 256, workers: int = 1,
                     mirror: bool = False):
    """Per-path numerator/denominator columns for the finite cylinder.

    Each task is a dict with "kind" in {"vertex", "girsanov", "observable"}.
    Returns {"den": (R,), "num": list of (R,)}.  ``mirror=True`` negates the
    field and the zero-mode axis (used by symmetry tests; it leaves the
    denominator invariant and maps vertex weights alpha -> -alpha).
    """
    pu = reduce_to_unit_radius(params)
    gamma, mu = pu.gamma, pu.mu
    span = 2.0 * t_half
    n_steps = int(round(span / dt))
    if abs(n_steps * dt - span) > 1e-9:
        raise WindowOutsideCylinder(f"window 2*T={span} is not a multiple of dt={dt}")
    grid = TimeGrid(dt, n_steps)
    nodes, dtheta = theta_nodes(theta_cells)
    cs, cw = quad.nodes()
    if mirror:
        cs = -cs
    trap = np.full(grid.n_steps + 1, dt)
    trap[0] = trap[-1] = dt / 2.0
    renorm_mass = harmonic_number(n_modes)

    prepared = []
    for task in tasks:
        kind = task["kind"]
        if kind == "girsanov":
            sh: ShiftData = task["shift"]
            s_grid = sh.total_grid(grid.times(), nodes)
            prepared.append({**task, "s_grid": s_grid, "scalar": sh.scalar_log(),
                             "total_alpha": sum(a for a, _, _ in sh.insertions)})
        else:
            prepared.append(task)

    def run(chunk):
        sub_seed, size = chunk
        rng = np.random.default_rng(sub_seed)
        b, xs, ys = sample_path_batch(rng, size, n_modes, grid)
        if mirror:
            b, xs, ys = -b, -xs, -ys
        fields = fluctuation_grid(xs, ys, nodes)
        sp, sm = mass_pair_slices(b, fields, gamma, renorm_mass, dtheta)
        m_plus = (sp * trap).sum(axis=-1)
        m_minus = (sm * trap).sum(axis=-1)
        w = fk_weights(m_plus, m_minus, cs, mu, gamma)
        out = {"den": w @ cw, "num": []}
        win = WindowPaths(grid, t_half, b, xs, ys)
        for task in prepared:
            kind = task["kind"]
            if kind == "vertex":
                log_v = _insertion_field_values(b, xs, ys, grid, task["entries"], task["reg"])
                cfac = cw * np.exp(task["total_alpha"] * cs)
                out["num"].append(np.exp(log_v) * (w @ cfac))
            elif kind == "girsanov":
                shifted = fields + task["s_grid"][None, :, :]
                sp_s, sm_s = mass_pair_slices(b, shifted, gamma, renorm_mass, dtheta)
                mp_s = (sp_s * trap).sum(axis=-1)
                mm_s = (sm_s * trap).sum(axis=-1)
                wg = fk_weights(mp_s, mm_s, cs, mu, gamma)
                cfac = cw * np.exp(task["total_alpha"] * cs)
                out["num"].append(math.exp(task["scalar"]) * (wg @ cfac))
            elif kind == "observable":
                f = task["f"]
                acc = np.zeros(size)
                for i, c in enumerate(cs):
                    acc += cw[i] * w[:, i] * np.asarray(f(c, win), dtype=float)
                out["num"].append(acc)
            else:
                raise ValueError(f"unknown task kind {kind!r}")
        return out

    chunks = seed_chunks(seed, n_samples, batch)
    parts = map_chunks(run, chunks, workers)
    den = np.concatenate([p["den"] for p in parts])
    nums = [np.concatenate([p["num"][i] for p in parts]) for i in range(len(tasks))]
    return {"den": den, "num": nums, "grid": grid}


def _entries_to_process(entries, t_half: float, grid_dt: float):
    """Window -> process coordinates, snapping times to the grid."""
    out = []
    for a, t, th in entries:
        if not (-t_half < t < t_half):
            raise WindowOutsideCylinder(f"insertion time {t} outside (-{t_half}, {t_half})")
        s = t + t_half
        k = round(s / grid_dt)
        out.append((a, k * grid_dt, th))
    return tuple(out)


def _fingerprint(params: ModelParams, extra: dict) -> str:
    base = {"gamma": params.gamma, "mu": params.mu, "radius": params.radius}
    base.update(extra)
    return params_fingerprint(base)


# ---------------------------------------------------------------------------
# Public estimators
# ---------------------------------------------------------------------------

def finite_T_expectation(observable, t_half: float, params: ModelParams, *,
                         dt: float = 1.0 / 32.0, n_modes: int = 64,
                         theta_cells: int = 128, quad: CQuadrature | None = None,
                         n_samples: int = 4096, seed=0, support=None,
                         workers: int = 1) -> EstimatorResult:
    """Expectation of a bounded window functional on the finite cylinder.

    ``observable(c, win) -> (R,)`` sees one zero-mode node and the batch of
    paths in window coordinates; ``support=(t1, t2)`` checks containment.
    """
    if support is not None:
        t1, t2 = support
        if t1 < -t_half or t2 > t_half:
            raise WindowOutsideCylinder(f"support {support} outside [-{t_half}, {t_half}]")
    pu = reduce_to_unit_radius(params)
    if quad is None:
        quad = default_c_quadrature(pu.gamma)
    t0 = time.perf_counter()
    res = _cylinder_engine(params, t_half, dt, n_modes, theta_cells, quad,
                           n_samples, seed, [{"kind": "observable", "f": observable}],
                           workers=workers)
    est, se = jackknife_ratio(res["num"][0], res["den"])
    return EstimatorResult(
        mean=est, std_error=se, n_samples=n_samples, seed=_seed_int(seed),
        fingerprint=_fingerprint(params, {"op": "finite_T", "t_half": t_half}),
        wall_ms=1e3 * (time.perf_counter() - t0))


def _smc_settings(n_samples: int, n_runs: int) -> SmcSettings:
    return SmcSettings(n_particles=max(256, n_samples // n_runs), n_runs=n_runs)


def vertex_direct(insertions: InsertionSet, regularization: GmcSpec | None,
                  t_half: float, params: ModelParams, *, dt: float = 1.0 / 32.0,
                  n_modes: int = 64, theta_cells: int = 128,
                  quad: CQuadrature | None = None, n_samples: int = 8192, seed=0,
                  batch: int = 256, workers: int = 1, mirror: bool = False,
                  backend: str = "plain", smc_runs: int = 12) -> EstimatorResult:
    """Renormalized-exponential estimator of a vertex correlation.

    Works for any insertion set; non-admissible weights give estimates that
    sink toward zero as the regularization is refined.  ``backend="plain"``
    is the free-path reweighting ratio estimator (fine for short cylinders);
    ``backend="smc"`` evaluates the same insertions as genealogy registers of
    a particle flow, which stays accurate on long cylinders.
    """
    pu = reduce_to_unit_radius(params)
    if regularization is None:
        regularization = fourier_spec(+1, n_modes)
    if quad is None:
        quad = default_c_quadrature(pu.gamma)
    entries = _entries_to_process(insertions.entries, t_half, dt)
    t0 = time.perf_counter()
    if backend == "smc":
        if regularization.kind != "fourier" or regularization.n_modes != n_modes:
            raise ValueError("smc backend uses the sampler's mode truncation")
        flow = smc_flow(params, [t_half], dt, n_modes, theta_cells,
                        _smc_settings(n_samples, smc_runs), seed,
                        register_groups=[entries], workers=workers)
        est, se = combine_ratio(flow["log_z"], flow["group_means"],
                                lambda u, w: u / w)
    elif backend == "plain":
        task = {"kind": "vertex", "entries": entries, "reg": regularization,
                "total_alpha": sum(a for a, _, _ in entries)}
        res = _cylinder_engine(params, t_half, dt, n_modes, theta_cells, quad,
                               n_samples, seed, [task], batch=batch, workers=workers,
                               mirror=mirror)
        est, se = jackknife_ratio(res["num"][0], res["den"])
    else:
        raise ValueError(f"unknown backend {backend!r}")
    out = EstimatorResult(
        mean=est, std_error=se, n_samples=n_samples, seed=_seed_int(seed),
        fingerprint=_fingerprint(params, {"op": "vertex_direct", "t_half": t_half,
                                          "entries": list(insertions.entries)}),
        wall_ms=1e3 * (time.perf_counter() - t0))
    out.diagnostics = {"admissible": insertions.admissible, "backend": backend}
    return out


def vertex_girsanov(insertions: InsertionSet, t_half: float, params: ModelParams, *,
                    dt: float = 1.0 / 32.0, n_modes: int = 64, theta_cells: int = 128,
                    quad: CQuadrature | None = None, n_samples: int = 8192, seed=0,
                    batch: int = 256, workers: int = 1,
                    backend: str = "plain", smc_runs: int = 12) -> EstimatorResult:
    """Shift-based estimator of the same vertex correlation.

    The vertex exponentials are removed exactly: the field acquires the
    deterministic shift of :class:`ShiftData` (with the mode-truncated kernel
    of the simulated process, so the identity is exact in law at any
    truncation), the chaos masses become insertion-weighted, and a scalar
    factor carries the variance terms.
    """
    if not insertions.admissible:
        raise InadmissibleInsertions(
            f"weights must satisfy |alpha| < {insertions.q_bound}")
    pu = reduce_to_unit_radius(params)
    if quad is None:
        quad = default_c_quadrature(pu.gamma)
    entries = _entries_to_process(insertions.entries, t_half, dt)
    shift = ShiftData(entries, kernel=n_modes)
    t0 = time.perf_counter()
    if backend == "smc":
        settings = _smc_settings(n_samples, smc_runs)
        grid = TimeGrid(dt, int(round(2.0 * t_half / dt)))
        nodes, _ = theta_nodes(theta_cells)
        s_grid = shift.total_grid(grid.times(), nodes)
        task = ShiftTask(shift_grid=s_grid, scalar_log=shift.scalar_log(),
                         total_alpha=sum(a for a, _, _ in entries))
        # numerator and denominator flows share run substreams (partial CRN)
        child = stateless_children(seed, 1)[0]
        num = smc_flow(params, [t_half], dt, n_modes, theta_cells, settings, child,
                       shift=task, workers=workers)
        den = smc_flow(params, [t_half], dt, n_modes, theta_cells, settings, child,
                       workers=workers)
        ref = max(num["log_z"][:, 0].max(), den["log_z"][:, 0].max())
        est, se = jackknife_func([np.exp(num["log_z"][:, 0] - ref),
                                  np.exp(den["log_z"][:, 0] - ref)],
                                 lambda u, w: u / w)
    elif backend == "plain":
        task = {"kind": "girsanov", "shift": shift}
        res = _cylinder_engine(params, t_half, dt, n_modes, theta_cells, quad,
                               n_samples, seed, [task], batch=batch, workers=workers)
        est, se = jackknife_ratio(res["num"][0], res["den"])
    else:
        raise ValueError(f"unknown backend {backend!r}")
    out = EstimatorResult(
        mean=est, std_error=se, n_samples=n_samples, seed=_seed_int(seed),
        fingerprint=_fingerprint(params, {"op": "vertex_girsanov", "t_half": t_half,
                                          "entries": list(insertions.entries)}),
        wall_ms=1e3 * (time.perf_counter() - t0))
    out.diagnostics = {"scalar_log": shift.scalar_log(), "backend": backend}
    return out


def two_point_covariance(ins1, ins2, separations, t_half: float, params: ModelParams, *,
                         dt: float = 1.0 / 16.0, n_modes: int = 64, theta_cells: int = 128,
                         quad: CQuadrature | None = None, n_samples: int = 16384, seed=0,
                         batch: int = 256, workers: int = 1,
                         backend: str = "smc", smc_runs: int = 16) -> list[dict]:
    """Truncated two-point function of two vertices across separations.

    ``ins1`` and ``ins2`` are (alpha, theta); the insertions sit at window
    times -sep/2 and +sep/2.  All separations and the three ratio components
    share randomness (one particle population or one path set), so the
    connected part benefits from cancellation; errors are delete-one
    jackknife over replicas (runs for the particle backend, paths for the
    plain one).
    """
    pu = reduce_to_unit_radius(params)
    if quad is None:
        quad = default_c_quadrature(pu.gamma)
    separations = [float(s) for s in separations]
    for s in separations:
        if s <= 0 or s >= 2.0 * t_half:
            raise WindowOutsideCylinder(f"separation {s} does not fit in the window")
    a1, th1 = ins1
    a2, th2 = ins2

    def groups_for(s):
        pair = _entries_to_process(((a1, -s / 2.0, th1), (a2, +s / 2.0, th2)), t_half, dt)
        one = _entries_to_process(((a1, -s / 2.0, th1),), t_half, dt)
        two = _entries_to_process(((a2, +s / 2.0, th2),), t_half, dt)
        return pair, one, two

    rows = []
    if backend == "smc":
        groups = []
        for s in separations:
            groups.extend(groups_for(s))
        flow = smc_flow(params, [t_half], dt, n_modes, theta_cells,
                        _smc_settings(n_samples, smc_runs), seed,
                        register_groups=groups, workers=workers)
        for j, s in enumerate(separations):
            sub = flow["group_means"][:, 3 * j:3 * j + 3]
            cov, cov_se = combine_ratio(
                flow["log_z"], sub,
                lambda su, s1, s2, sd: su / sd - (s1 / sd) * (s2 / sd))
            prod, _ = combine_ratio(flow["log_z"], sub[:, :1], lambda su, sd: su / sd)
            rows.append({"separation": s, "covariance": cov, "std_error": cov_se,
                         "product_moment": prod})
    elif backend == "plain":
        reg = fourier_spec(+1, n_modes)
        tasks = []
        for s in separations:
            for entries in groups_for(s):
                tasks.append({"kind": "vertex", "entries": entries, "reg": reg,
                              "total_alpha": sum(a for a, _, _ in entries)})
        res = _cylinder_engine(params, t_half, dt, n_modes, theta_cells, quad,
                               n_samples, seed, tasks, batch=batch, workers=workers)
        den = res["den"]
        for j, s in enumerate(separations):
            u, v1, v2 = res["num"][3 * j], res["num"][3 * j + 1], res["num"][3 * j + 2]
            cov, cov_se = jackknife_func(
                [u, v1, v2, den], lambda su, s1, s2, sd: su / sd - (s1 / sd) * (s2 / sd))
            prod, _ = jackknife_func([u, den], lambda su, sd: su / sd)
            rows.append({"separation": s, "covariance": cov, "std_error": cov_se,
                         "product_moment": prod})
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return rows


def refinement_report(resolutions, estimates) -> dict:
    """Resolution sequence with a Richardson-style extrapolation flag.

    Refined-limit quantities are reported as the whole sequence; the
    extrapolated value assumes a 1/N leading correction and the flag says
    whether the sequence looks converged (last step within combined errors),
    never presenting a single number as the limit.
    """
    resolutions = [float(n) for n in resolutions]
    vals = [float(v) for v, _ in estimates]
    ses = [float(s) for _, s in estimates]
    if len(vals) < 2 or sorted(resolutions) != resolutions:
        raise ValueError("need at least two strictly increasing resolutions")
    rows = [{"resolution": n, "estimate": v, "std_error": s}
            for n, v, s in zip(resolutions, vals, ses)]
    n1, n2 = resolutions[-2:]
    v1, v2 = vals[-2:]
    richardson = v2 + (v2 - v1) / (n2 / n1 - 1.0)
    last_step = abs(v2 - v1)
    converged = last_step <= 3.0 * math.hypot(ses[-1], ses[-2])
    return {"sequence": rows, "richardson_extrapolation": richardson,
            "last_step": last_step, "converged_flag": bool(converged)}


def two_point_panel(pairs, separations, t_half: float, params: ModelParams, *,
                    dt: float = 1.0 / 32.0, n_modes: int = 48, theta_cells: int = 96,
                    n_samples: int = 65536, seed=0, smc_runs: int = 16,
                    workers: int = 1) -> dict:
    """Two-point curves for several insertion pairs from one particle flow.

    ``pairs`` is a list of ((alpha1, theta1), (alpha2, theta2)); sharing the
    population across pairs and separations gives common random numbers
    everywhere, which is what makes rate comparisons between pairs sharp.
    Returns {pair_index: [rows...]} with the same row format as
    :func:`two_point_covariance`.
    """
    separations = [float(s) for s in separations]
    for s in separations:
        if s <= 0 or s >= 2.0 * t_half:
            raise WindowOutsideCylinder(f"separation {s} does not fit in the window")
    groups = []
    for (a1, th1), (a2, th2) in pairs:
        for s in separations:
            pair = _entries_to_process(((a1, -s / 2.0, th1), (a2, +s / 2.0, th2)),
                                       t_half, dt)
            one = _entries_to_process(((a1, -s / 2.0, th1),), t_half, dt)
            two = _entries_to_process(((a2, +s / 2.0, th2),), t_half, dt)
            groups.extend((pair, one, two))
    flow = smc_flow(params, [t_half], dt, n_modes, theta_cells,
                    _smc_settings(n_samples, smc_runs), seed,
                    register_groups=groups, workers=workers)
    out = {}
    for pi in range(len(pairs)):
        rows = []
        for j, s in enumerate(separations):
            base = 3 * (pi * len(separations) + j)
            sub = flow["group_means"][:, base:base + 3]
            cov, cov_se = combine_ratio(
                flow["log_z"], sub,
                lambda su, s1, s2, sd: su / sd - (s1 / sd) * (s2 / sd))
            rows.append({"separation": s, "covariance": cov, "std_error": cov_se})
        out[pi] = rows
    return out


def scaling_one_point(alpha: float, radius: float, params: ModelParams, *,
                      t_half: float = 1.5, dt: float = 1.0 / 32.0, n_modes: int = 64,
                      theta_cells: int = 128, n_samples: int = 8192, seed=0,
                      workers: int = 1, backend: str = "smc") -> dict:
    """One-point function on the radius-R cylinder against the reduced model.

    The left side is computed through the time/angle substitution; the
    reduction converts the short-distance normalization, so the substituted
    estimate carries the factor R^{alpha^2/2}.  At R = 1 both sides are the
    same computation (shared seed substream) and the ratio is exactly 1.
    """
    base = validate_params(params.gamma, params.mu, radius)
    if abs(alpha) >= base.q_const:
        raise InadmissibleAlpha(f"|alpha| must be < {base.q_const}")
    unit = reduce_to_unit_radius(base)
    t_half_reduced = t_half / radius
    ss = np.random.SeedSequence(seed)
    child_a, child_b = ss.spawn(2)
    if radius == 1.0:
        child_b = child_a
    ins = make_insertions([(alpha, 0.0, 0.0)], unit)
    factor = radius ** (alpha * alpha / 2.0)
    lhs_raw = vertex_direct(ins, None, t_half_reduced, unit, dt=dt, n_modes=n_modes,
                            theta_cells=theta_cells, n_samples=n_samples, seed=child_a,
                            workers=workers, backend=backend)
    rhs = vertex_direct(ins, None, t_half_reduced, unit, dt=dt, n_modes=n_modes,
                        theta_cells=theta_cells, n_samples=n_samples, seed=child_b,
                        workers=workers, backend=backend)
    lhs_mean = factor * lhs_raw.mean
    lhs_se = factor * lhs_raw.std_error
    ratio = lhs_mean / rhs.mean
    ratio_se = 0.0 if radius == 1.0 else abs(ratio) * math.sqrt(
        (lhs_se / lhs_mean) ** 2 + (rhs.std_error / rhs.mean) ** 2)
    target = factor
    return {
        "alpha": alpha, "radius": radius, "target_ratio": target,
        "lhs": lhs_mean, "lhs_se": lhs_se, "rhs": rhs.mean, "rhs_se": rhs.std_error,
        "ratio": ratio, "ratio_se": ratio_se,
        "pass": abs(ratio - target) <= 3.0 * ratio_se if ratio_se > 0 else ratio == target,
    }
