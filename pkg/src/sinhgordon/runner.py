"""Experiment orchestration and persistence.

One experiment per invocation.  Outputs: a manifest (full config, seed,
timings), line-delimited JSON records (one per estimate), and CSV files for
curves.  Identical config and seed reproduce byte-identical records up to the
wall-time fields.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import correlations as corr
from . import gmc as gmc_mod
from . import lz as lz_mod
from . import spectral as spec_mod
from .config import EXPERIMENTS, RunConfig, load_config, with_overrides
from .errors import ConfigError, SinhGordonError
from .gff import TimeGrid, evolve_path, dump_path, sample_path_batch, \
    fluctuation_grid, truncated_slice_cov
from .gmc import Region, circle_spec, fourier_spec
from .parallel import resolve_workers
from .params import reduce_to_unit_radius
from .propagator import CQuadrature, partition_curve
from .results import _jsonable, params_fingerprint
from .smc import SmcSettings, smc_log_partition


class OutputWriter:
    def __init__(self, out_dir: str | Path):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._records = []

    def record(self, rec: dict) -> None:
        self._records.append(_jsonable(rec))

    def csv(self, name: str, header, rows) -> Path:
        path = self.dir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        return path

    def flush(self, cfg: RunConfig, wall_s: float) -> None:
        with open(self.dir / "records.jsonl", "w") as fh:
            for rec in self._records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        manifest = {
            "config": cfg.raw(),
            "fingerprint": params_fingerprint(cfg.raw()),
            "wall_seconds": round(wall_s, 3),
            "n_records": len(self._records),
        }
        with open(self.dir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)


def _gmc_spec(cfg: RunConfig, sigma: int = +1):
    if cfg.gmc.kind == "fourier":
        return fourier_spec(sigma, cfg.gmc.n)
    return circle_spec(sigma, cfg.gmc.epsilon)


def _quad(cfg: RunConfig) -> CQuadrature:
    gamma = cfg.params.gamma
    return CQuadrature(-cfg.estimator.c_window / gamma, cfg.estimator.c_window / gamma,
                       cfg.estimator.c_nodes)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _exp_validate(cfg: RunConfig, out: OutputWriter, workers: int) -> None:
    """Covariance panel: sampled field against the mode-truncated kernels."""
    n = cfg.estimator.n_samples
    n_modes = cfg.sampler.n_modes
    grid = TimeGrid(cfg.sampler.dt, int(round(1.0 / cfg.sampler.dt)))
    rng = np.random.default_rng(cfg.estimator.seed)
    b, xs, ys = sample_path_batch(rng, n, n_modes, grid)
    probes = [((0.0, 0.0), (0.0, np.pi)), ((0.0, 0.0), (0.5, 0.0)),
              ((0.25, np.pi / 2), (0.75, np.pi / 2)), ((0.0, 0.0), (1.0, np.pi / 2)),
              ((0.5, 0.0), (0.5, np.pi))]
    worst = 0.0
    for (t1, th1), (t2, th2) in probes:
        k1, k2 = grid.index_of(t1), grid.index_of(t2)
        f1 = fluctuation_grid(xs[:, k1, :], ys[:, k1, :], np.array([th1]))[:, 0]
        f2 = fluctuation_grid(xs[:, k2, :], ys[:, k2, :], np.array([th2]))[:, 0]
        emp = float(np.mean(f1 * f2) - np.mean(f1) * np.mean(f2))
        se = float(np.std(f1 * f2) / np.sqrt(n))
        target = float(truncated_slice_cov(n_modes, t1 - t2, th1 - th2))
        pull = abs(emp - target) / max(se, 1e-12)
        worst = max(worst, pull)
        out.record({"experiment": "validate", "probe": [[t1, th1], [t2, th2]],
                    "empirical": emp, "oracle": target, "std_error": se, "pull": pull})
    if worst > 4.0:
        raise SinhGordonError(f"covariance panel failed: worst pull {worst:.2f} > 4")
    out.record({"experiment": "validate", "status": "pass", "worst_pull": worst})


def _exp_sample(cfg: RunConfig, out: OutputWriter, workers: int) -> None:
    from .gff import sample_circle_field
    init = sample_circle_field(cfg.sampler.n_modes, "stationary", cfg.estimator.seed)
    grid = TimeGrid(cfg.sampler.dt, int(round(2 * cfg.sampler.window / cfg.sampler.dt)))
    path = evolve_path(init, float(cfg.options.get("c", 0.0)), grid,
                       seed=cfg.estimator.seed)
    with open(out.dir / "path.bin", "wb") as fh:
        dump_path(path, fh)
    out.record({"experiment": "sample", "n_modes": path.n_modes,
                "n_steps": grid.n_steps, "file": "path.bin"})


def _exp_gmc_mass(cfg: RunConfig, out: OutputWriter, workers: int) -> None:
    t0 = time.perf_counter()
    opts = dict(cfg.options)
    region = Region(float(opts.pop("t_min", 0.0)), float(opts.pop("t_max", 1.0)))
    sigma = int(opts.pop("sigma", +1))
    if opts:
        raise ConfigError(f"unknown gmc-mass options: {sorted(opts)}")
    pu = reduce_to_unit_radius(cfg.params)
    spec = _gmc_spec(cfg, sigma)
    masses = gmc_mod.sample_region_masses(region, spec, pu, cfg.estimator.n_samples,
                                          cfg.estimator.seed, dt=cfg.sampler.dt,
                                          theta_cells=cfg.gmc.theta_cells)
    from .results import mean_and_se
    mean, se = mean_and_se(masses)
    out.record({"experiment": "gmc-mass", "estimate": mean, "std_error": se,
                "n_samples": cfg.estimator.n_samples, "seed": cfg.estimator.seed,
                "analytic_mean": gmc_mod.expected_mass(region, pu),
                "fingerprint": params_fingerprint(cfg.raw()),
                "wall_ms": round(1e3 * (time.perf_counter() - t0), 3)})


def _exp_moments(cfg: RunConfig, out: OutputWriter, workers: int) -> None:
    opts = dict(cfg.options)
    region = Region(float(opts.pop("t_min", 0.5)), float(opts.pop("t_max", 1.0)))
    p = float(opts.pop("p", 1.0))
    sigma = int(opts.pop("sigma", +1))
    if opts:
        raise ConfigError(f"unknown moments options: {sorted(opts)}")
    res = gmc_mod.moment_estimator(region, _gmc_spec(cfg, sigma),
                                   reduce_to_unit_radius(cfg.params), p,
                                   cfg.estimator.n_samples, cfg.estimator.seed,
                                   dt=cfg.sampler.dt, theta_cells=cfg.gmc.theta_cells)
    out.record({**res.to_record("moments"), "p": p})


def _exp_scaling_check(cfg: RunConfig, out: OutputWriter, workers: int) -> None:
    opts = dict(cfg.options)
    region = Region(float(opts.pop("t_min", 0.0)), float(opts.pop("t_max", 1.0)))
    if opts:
        raise ConfigError(f"unknown scaling-check options: {sorted(opts)}")
    rep = gmc_mod.scaling_check(region, cfg.params, cfg.estimator.n_samples,
                                cfg.estimator.seed, dt=cfg.sampler.dt,
                                theta_cells=cfg.gmc.theta_cells,
                                n_modes=cfg.sampler.n_modes)
    out.record({"experiment": "scaling-check", **rep})


def _exp_partition(cfg: RunConfig, out: OutputWriter, workers: int) -> None:
    t0 = time.perf_counter()
    opts = dict(cfg.options)
    t_list = opts.pop("T_list", [cfg.sampler.window])
    if opts:
        raise ConfigError(f"unknown partition options: {sorted(opts)}")
    pts = partition_curve([float(t) for t in t_list], reduce_to_unit_radius(cfg.params),
                          _quad(cfg), cfg.sampler.dt, _gmc_spec(cfg),
                          cfg.estimator.n_samples, cfg.estimator.seed,
                          theta_cells=cfg.gmc.theta_cells, workers=workers)
    for pt in pts:
        out.record({"experiment": "partition", "t_half": pt.t_half, "estimate": pt.z,
                    "std_error": pt.z_se, "log_z": pt.log_z, "log_z_se": pt.log_z_se,
                    "boundary_fraction": pt.boundary_fraction,
                    "truncation_warning": pt.truncation_warning,
                    "n_samples": cfg.estimator.n_samples, "seed": cfg.estimator.seed,
                    "fingerprint": params_fingerprint(cfg.raw()),
                    "wall_ms": round(1e3 * (time.perf_counter() - t0), 3)})


def _exp_lambda0(cfg: RunConfig, out: OutputWriter, workers: int) -> None:
    t0 = time.perf_counter()
    opts = dict(cfg.options)
    t_list = [float(t) for t in opts.pop("T_list", [1.0, 1.5, 2.0, 3.0])]
    drop_smallest = bool(opts.pop("drop_smallest", True))
    backend = opts.pop("backend", "smc")
    if opts:
        raise ConfigError(f"unknown lambda0 options: {sorted(opts)}")
    if backend == "smc":
        settings = SmcSettings(n_particles=max(256, cfg.estimator.n_samples // 12),
                               n_runs=12, c_half_width=cfg.estimator.c_window)
        pairs = smc_log_partition(cfg.params, t_list, cfg.sampler.dt,
                                  cfg.sampler.n_modes, cfg.gmc.theta_cells, settings,
                                  cfg.estimator.seed, workers=workers)
        curve = [{"t_half": t, "log_z": p[0], "log_z_se": p[1]}
                 for t, p in zip(t_list, pairs)]
    elif backend == "plain":
        pts = partition_curve(t_list, reduce_to_unit_radius(cfg.params), _quad(cfg),
                              cfg.sampler.dt, _gmc_spec(cfg), cfg.estimator.n_samples,
                              cfg.estimator.seed, theta_cells=cfg.gmc.theta_cells,
                              workers=workers)
        pairs = [(pt.log_z, pt.log_z_se) for pt in pts]
        curve = [{"t_half": pt.t_half, "log_z": pt.log_z, "log_z_se": pt.log_z_se}
                 for pt in pts]
    else:
        raise ConfigError(f"unknown lambda0 backend {backend!r}")
    window = t_list[1:] if drop_smallest and len(t_list) > 3 else t_list
    used = [(t, p) for t, p in zip(t_list, pairs) if t in window]
    fit = spec_mod.lambda0_fit([t for t, _ in used], [p for _, p in used])
    out.record({"experiment": "lambda0", "estimate": fit.value, "std_error": fit.std_error,
                "fit_window": fit.fit_window, "r_squared": fit.r_squared,
                "backend": backend, "curve": curve,
                "n_samples": cfg.estimator.n_samples, "seed": cfg.estimator.seed,
                "fingerprint": params_fingerprint(cfg.raw()),
                "wall_ms": round(1e3 * (time.perf_counter() - t0), 3)})


def _exp_ground_state(cfg: RunConfig, out: OutputWriter, workers: int) -> None:
    opts = dict(cfg.options)
    t = float(opts.pop("T", max(1.0, cfg.sampler.window)))
    bins_c = int(opts.pop("bins_c", 12))
    bins_x = int(opts.pop("bins_x", 8))
    if opts:
        raise ConfigError(f"unknown ground-state options: {sorted(opts)}")
    prof = spec_mod.ground_state_profile(
        t, cfg.params, dt=cfg.sampler.dt, n_modes=cfg.sampler.n_modes,
        theta_cells=cfg.gmc.theta_cells, quad=_quad(cfg), bins=(bins_c, bins_x),
        n_samples=cfg.estimator.n_samples, seed=cfg.estimator.seed, workers=workers)
    out.csv("ground_state_profile.csv",
            ["c_center", "x1_center", "value", "std_error", "count"],
            list(prof.rows()))
    out.record({"experiment": "ground-state", "T": t, "bins": [bins_c, bins_x],
                "file": "ground_state_profile.csv",
                "n_samples": cfg.estimator.n_samples, "seed": cfg.estimator.seed})


def _exp_vertex(cfg: RunConfig, out: OutputWriter, workers: int) -> None:
    opts = dict(cfg.options)
    alpha = float(opts.pop("alpha", 0.5))
    t_ins = float(opts.pop("t", 0.0))
    theta = float(opts.pop("theta", 0.0))
    method = opts.pop("method", "direct")
    n_list = opts.pop("n_list", None)
    if opts:
        raise ConfigError(f"unknown vertex options: {sorted(opts)}")
    ins = corr.make_insertions([(alpha, t_ins, theta)], reduce_to_unit_radius(cfg.params))
    common = dict(dt=cfg.sampler.dt, n_modes=cfg.sampler.n_modes,
                  theta_cells=cfg.gmc.theta_cells, quad=_quad(cfg),
                  n_samples=cfg.estimator.n_samples, seed=cfg.estimator.seed,
                  workers=workers)
    if n_list:
        # refinement sequence: one estimate per vertex truncation, reported
        # with a Richardson flag instead of a single number for the limit
        from .gmc import fourier_spec as _fs
        ests = []
        for nv in n_list:
            res = corr.vertex_direct(ins, _fs(+1, int(nv)), cfg.sampler.window,
                                     cfg.params, **common)
            ests.append((res.mean, res.std_error))
        out.record({"experiment": "vertex", "alpha": alpha, "method": "refinement",
                    **corr.refinement_report(n_list, ests),
                    "n_samples": cfg.estimator.n_samples, "seed": cfg.estimator.seed})
        return
    if method in ("direct", "both"):
        res = corr.vertex_direct(ins, _gmc_spec(cfg) if cfg.gmc.kind == "circle" else None,
                                 cfg.sampler.window, cfg.params, **common)
        out.record({**res.to_record("vertex"), "method": "direct", "alpha": alpha})
    if method in ("girsanov", "both"):
        res = corr.vertex_girsanov(ins, cfg.sampler.window, cfg.params, **common)
        out.record({**res.to_record("vertex"), "method": "girsanov", "alpha": alpha})
    if method not in ("direct", "girsanov", "both"):
        raise ConfigError(f"unknown vertex method {method!r}")


def _exp_two_point(cfg: RunConfig, out: OutputWriter, workers: int) -> None:
    t0 = time.perf_counter()
    opts = dict(cfg.options)
    a1 = float(opts.pop("alpha1", 0.5))
    a2 = float(opts.pop("alpha2", a1))
    th1 = float(opts.pop("theta1", 0.0))
    th2 = float(opts.pop("theta2", th1))
    seps = [float(s) for s in opts.pop("separations", [1.0, 1.5, 2.0, 2.5, 3.0])]
    if opts:
        raise ConfigError(f"unknown two-point options: {sorted(opts)}")
    rows = corr.two_point_covariance((a1, th1), (a2, th2), seps, cfg.sampler.window,
                                     cfg.params, dt=cfg.sampler.dt,
                                     n_modes=cfg.sampler.n_modes,
                                     theta_cells=cfg.gmc.theta_cells, quad=_quad(cfg),
                                     n_samples=cfg.estimator.n_samples,
                                     seed=cfg.estimator.seed, workers=workers)
    out.csv("two_point.csv", ["separation", "covariance", "std_error"],
            [(r["separation"], r["covariance"], r["std_error"]) for r in rows])
    wall = round(1e3 * (time.perf_counter() - t0), 3)
    for r in rows:
        out.record({"experiment": "two-point", **r, "alpha1": a1, "alpha2": a2,
                    "n_samples": cfg.estimator.n_samples, "seed": cfg.estimator.seed,
                    "fingerprint": params_fingerprint(cfg.raw()), "wall_ms": wall})


def _exp_gap_fit(cfg: RunConfig, out: OutputWriter, workers: int) -> None:
    opts = dict(cfg.options)
    csv_path = opts.pop("csv", None)
    seps = opts.pop("separations", None)
    covs = opts.pop("covariances", None)
    ses = opts.pop("std_errors", None)
    if opts:
        raise ConfigError(f"unknown gap-fit options: {sorted(opts)}")
    if csv_path:
        seps, covs, ses = [], [], []
        with open(csv_path) as fh:
            for row in csv.DictReader(fh):
                seps.append(float(row["separation"]))
                covs.append(float(row["covariance"]))
                ses.append(float(row["std_error"]))
    if not (seps and covs and ses):
        raise ConfigError("gap-fit needs separations/covariances/std_errors or csv")
    fit = spec_mod.spectral_gap_fit(seps, list(zip(covs, ses)))
    out.record({"experiment": "gap-fit", "estimate": fit.value,
                "std_error": fit.std_error, "r_squared": fit.r_squared,
                "fit_window": fit.fit_window})


def _exp_lz(cfg: RunConfig, out: OutputWriter, workers: int) -> None:
    opts = dict(cfg.options)
    alpha = float(opts.pop("alpha", 0.5))
    tol = float(opts.pop("tol", 1e-10))
    if opts:
        raise ConfigError(f"unknown lz options: {sorted(opts)}")
    res = lz_mod.lz_one_point(cfg.params, alpha, tol=tol)
    out.record({"experiment": "lz", "alpha": alpha, "value": res.value,
                "error_bound": res.error_bound, "diagnostics": res.diagnostics})


def _exp_mc_vs_lz(cfg: RunConfig, out: OutputWriter, workers: int) -> None:
    opts = dict(cfg.options)
    alpha = float(opts.pop("alpha", 0.5))
    r_values = [float(r) for r in opts.pop("R_values", [1.0, 2.0, 4.0])]
    estimates = opts.pop("estimates", None)
    if opts:
        raise ConfigError(f"unknown mc-vs-lz options: {sorted(opts)}")
    if estimates is None:
        estimates = []
        for i, r in enumerate(r_values):
            rep = corr.scaling_one_point(alpha, r, cfg.params,
                                         t_half=cfg.sampler.window, dt=cfg.sampler.dt,
                                         n_modes=cfg.sampler.n_modes,
                                         theta_cells=cfg.gmc.theta_cells,
                                         n_samples=cfg.estimator.n_samples,
                                         seed=cfg.estimator.seed + i, workers=workers)
            estimates.append([rep["lhs"], rep["lhs_se"]])
    report = lz_mod.mc_vs_lz_report(alpha, r_values,
                                    [(float(v), float(s)) for v, s in estimates],
                                    cfg.params)
    out.record({"experiment": "mc-vs-lz", **report})


_DISPATCH = {
    "validate": _exp_validate,
    "sample": _exp_sample,
    "gmc-mass": _exp_gmc_mass,
    "moments": _exp_moments,
    "scaling-check": _exp_scaling_check,
    "partition": _exp_partition,
    "lambda0": _exp_lambda0,
    "ground-state": _exp_ground_state,
    "vertex": _exp_vertex,
    "two-point": _exp_two_point,
    "gap-fit": _exp_gap_fit,
    "lz": _exp_lz,
    "mc-vs-lz": _exp_mc_vs_lz,
}
assert set(_DISPATCH) == set(EXPERIMENTS)


def run(config_path: str, seed: int | None = None, workers: int | None = None,
        fast: bool = False, out_dir: str = "runs") -> int:
    """Execute one experiment; returns the process exit code."""
    try:
        cfg = with_overrides(load_config(config_path), seed=seed, fast=fast)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = OutputWriter(Path(out_dir) / cfg.experiment)
    t0 = time.perf_counter()
    try:
        _DISPATCH[cfg.experiment](cfg, out, resolve_workers(workers))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SinhGordonError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        out.record({"experiment": cfg.experiment, "status": "failed", "error": str(exc)})
        out.flush(cfg, time.perf_counter() - t0)
        return 1
    out.flush(cfg, time.perf_counter() - t0)
    print(f"{cfg.experiment}: ok ({len(out._records)} records in {out.dir})")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sinhgordon",
                                 description="Cylinder Sinh-Gordon Monte Carlo toolkit")
    ap.add_argument("--config", required=True, help="path to a JSON run configuration")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--workers", type=int, default=None,
                    help="worker threads (env SINHGORDON_WORKERS also honored)")
    ap.add_argument("--fast", action="store_true",
                    help="CI profile: at most 16 modes and 1000 replicas")
    ap.add_argument("--out-dir", default="runs", help="output directory root")
    args = ap.parse_args(argv)
    return run(args.config, seed=args.seed, workers=args.workers, fast=args.fast,
               out_dir=args.out_dir)


if __name__ == "__main__":
    sys.exit(main())
