"""Free-field sampler on the unit cylinder.

The field on a time slice decomposes into a zero mode (constant plus a
Brownian motion in slice time) and independent Ornstein-Uhlenbeck Fourier
modes with mean-reversion rate n and unit stationary variance.  All updates
use the exact transition law, so mode truncation is the only field
approximation.  Radius R > 0 is handled upstream by the substitution
t -> t/R, theta -> theta/R together with the coupling rescaling in
:mod:`sinhgordon.params`; there is no R-specific code here.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CoincidentPoints,
    EmptyGrid,
    EpsilonGridMismatch,
    IndexOutOfRange,
    NegativeTime,
)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0, dt, 2*dt, ..., n_steps*dt."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0.0:
            raise EmptyGrid(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise EmptyGrid(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def span(self) -> float:
        return self.dt * self.n_steps

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Grid index of a time that must sit on (or within tol of) a node."""
        k = int(round(t / self.dt))
        if not (0 <= k <= self.n_steps) or abs(k * self.dt - t) > tol * max(1.0, abs(t)):
            raise IndexOutOfRange(f"time {t} is not on the grid (dt={self.dt}, K={self.n_steps})")
        return k


@dataclass
class CircleField:
    """One time slice: zero mode c and mode coordinates (x_n, y_n), n=1..N."""

    zero_mode: float
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        if self.xs.shape != self.ys.shape or self.xs.ndim != 1 or self.xs.size < 1:
            raise ValueError("xs and ys must be equal-length 1-d arrays with N >= 1")
        if not (np.all(np.isfinite(self.xs)) and np.all(np.isfinite(self.ys))):
            raise ValueError("mode coordinates must be finite")

    @property
    def n_modes(self) -> int:
        return self.xs.size


@dataclass
class PathSample:
    """One realization of (B_t, modes) on a uniform grid.

    ``brownian[0] == 0`` and ``mode_x[0], mode_y[0]`` equal the initial field.
    The zero-mode constant c travels in ``initial.zero_mode``.
    """

    grid: TimeGrid
    brownian: np.ndarray          # (K+1,)
    mode_x: np.ndarray            # (K+1, N)
    mode_y: np.ndarray            # (K+1, N)
    initial: CircleField = field(repr=False)

    @property
    def n_modes(self) -> int:
        return self.mode_x.shape[1]


def ou_step_coeffs(n, dt):
    """Exact one-step transition (decay, noise std) for the rate-n mode.

    x(t+dt) = x(t)*decay + std*xi with xi ~ N(0,1); composable exactly:
    two half steps reproduce one full step in mean and variance.
    """
    n = np.asarray(n, dtype=float)
    decay = np.exp(-n * dt)
    std = np.sqrt(-np.expm1(-2.0 * n * dt))
    return decay, std


def sample_circle_field(n_modes: int, mode="stationary", seed=None) -> CircleField:
    """Draw a slice field.

    ``mode="stationary"`` draws all 2N coordinates i.i.d. standard normal and
    sets the zero-mode placeholder to 0 (the constant c is supplied separately
    when evolving).  ``mode=("fixed", xs, ys)`` wraps given coordinates.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if mode == "stationary":
        rng = np.random.default_rng(seed)
        xs = rng.standard_normal(n_modes)
        ys = rng.standard_normal(n_modes)
        return CircleField(0.0, xs, ys)
    if isinstance(mode, tuple) and len(mode) == 3 and mode[0] == "fixed":
        return CircleField(0.0, np.array(mode[1], dtype=float), np.array(mode[2], dtype=float))
    raise ValueError(f"unknown sampling mode: {mode!r}")


def _evolve_arrays(rng: np.random.Generator, x0: np.ndarray, y0: np.ndarray, grid: TimeGrid):
    """Evolve a batch of initial modes; returns (B, X, Y).

    Shapes: x0, y0 are (R, N); output B is (R, K+1), X and Y are (R, K+1, N).
    Draw order per step is fixed (Brownian increment, then x noise, then y
    noise) so results are bit-reproducible for a given generator state.
    """
    n_paths, n_modes = x0.shape
    k_steps = grid.n_steps
    decay, std = ou_step_coeffs(np.arange(1, n_modes + 1), grid.dt)
    sqrt_dt = np.sqrt(grid.dt)

    brownian = np.empty((n_paths, k_steps + 1))
    xs = np.empty((n_paths, k_steps + 1, n_modes))
    ys = np.empty((n_paths, k_steps + 1, n_modes))
    brownian[:, 0] = 0.0
    xs[:, 0, :] = x0
    ys[:, 0, :] = y0
    for k in range(k_steps):
        brownian[:, k + 1] = brownian[:, k] + sqrt_dt * rng.standard_normal(n_paths)
        xs[:, k + 1, :] = xs[:, k, :] * decay + std * rng.standard_normal((n_paths, n_modes))
        ys[:, k + 1, :] = ys[:, k, :] * decay + std * rng.standard_normal((n_paths, n_modes))
    return brownian, xs, ys


def sample_path_batch(rng: np.random.Generator, n_paths: int, n_modes: int,
                      grid: TimeGrid, initial: CircleField | None = None):
    """Batch of paths from a stationary draw (default) or a fixed slice.

    Returns (B, X, Y) with shapes (R, K+1), (R, K+1, N), (R, K+1, N).
    """
    if initial is None:
        x0 = rng.standard_normal((n_paths, n_modes))
        y0 = rng.standard_normal((n_paths, n_modes))
    else:
        x0 = np.broadcast_to(initial.xs, (n_paths, initial.n_modes)).copy()
        y0 = np.broadcast_to(initial.ys, (n_paths, initial.n_modes)).copy()
    return _evolve_arrays(rng, x0, y0, grid)


def evolve_path(initial: CircleField, c: float, grid: TimeGrid, seed=None) -> PathSample:
    """Evolve one path from a fixed initial slice with an exact update scheme."""
    if grid.n_steps < 1:
        raise EmptyGrid("grid must have at least one step")
    rng = np.random.default_rng(seed)
    b, x, y = _evolve_arrays(rng, initial.xs[None, :], initial.ys[None, :], grid)
    start = CircleField(float(c), initial.xs.copy(), initial.ys.copy())
    return PathSample(grid=grid, brownian=b[0], mode_x=x[0], mode_y=y[0], initial=start)


def theta_basis(n_modes: int, thetas: np.ndarray):
    """Basis matrices (N, T): cos(n theta)/sqrt(n) and sin(n theta)/sqrt(n)."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    n = np.arange(1, n_modes + 1, dtype=float)[:, None]
    root = np.sqrt(n)
    return np.cos(n * thetas[None, :]) / root, np.sin(n * thetas[None, :]) / root


def fluctuation_grid(mode_x: np.ndarray, mode_y: np.ndarray, thetas: np.ndarray,
                     n_modes_used: int | None = None) -> np.ndarray:
    """Mode field on a theta grid: sum_n [x_n cos + y_n sin]/sqrt(n).

    ``mode_x`` and ``mode_y`` have shape (..., N); the result is (..., T).
    """
    n_avail = mode_x.shape[-1]
    n_used = n_avail if n_modes_used is None else n_modes_used
    if n_used > n_avail:
        raise IndexOutOfRange(f"requested {n_used} modes, path has {n_avail}")
    cb, sb = theta_basis(n_used, thetas)
    lead = mode_x.shape[:-1]
    x2 = mode_x[..., :n_used].reshape(-1, n_used)
    y2 = mode_y[..., :n_used].reshape(-1, n_used)
    out = x2 @ cb + y2 @ sb
    return out.reshape(*lead, -1)


def eval_field(path: PathSample, k: int, theta: float, n_modes_used: int | None = None) -> float:
    """Full field value c + B_{t_k} + mode sum at angle theta."""
    if not (0 <= k <= path.grid.n_steps):
        raise IndexOutOfRange(f"time index {k} outside 0..{path.grid.n_steps}")
    fluct = fluctuation_grid(path.mode_x[k], path.mode_y[k], np.array([theta]), n_modes_used)
    return float(path.initial.zero_mode + path.brownian[k] + fluct[0])


def harmonic_extension(initial: CircleField, t: float, theta) -> float | np.ndarray:
    """Harmonic interpolation of the slice data into the half cylinder.

    Returns sum_n e^{-n t} [x_n cos(n theta) + y_n sin(n theta)]/sqrt(n);
    equals the fluctuation field at t = 0 and decays to 0 as t grows.
    """
    if t < 0.0:
        raise NegativeTime(f"t must be >= 0, got {t}")
    thetas = np.atleast_1d(np.asarray(theta, dtype=float))
    n = np.arange(1, initial.n_modes + 1, dtype=float)
    damp = np.exp(-n * t)
    cb, sb = theta_basis(initial.n_modes, thetas)
    out = (initial.xs * damp) @ cb + (initial.ys * damp) @ sb
    return float(out[0]) if np.isscalar(theta) else out


# ---------------------------------------------------------------------------
# Closed-form covariance oracles (unit radius)
# ---------------------------------------------------------------------------

def covariance_oracle(kind: str, t: float, theta: float, t2: float, theta2: float) -> float:
    """Closed-form covariances used to validate the sampler.

    kind="slice":      stationary slice-field kernel
                       log( max(e^{-t2}, e^{-t}) / |e^{-t2+i theta2} - e^{-t+i theta}| )
    kind="dirichletY": zero-boundary part
                       log( |1-e^{-(t+t2)} e^{i d}| / |e^{-t2+i theta2} - e^{-t+i theta}| ) - min(t,t2)
    kind="harmonic":   -log|1 - e^{-(t+t2)} e^{i d}|  with d = theta - theta2

    Raises CoincidentPoints where the requested kernel is log-divergent.
    """
    if t < 0.0 or t2 < 0.0:
        raise NegativeTime("slice times must be >= 0")
    z = np.exp(-t + 1j * theta)
    z2 = np.exp(-t2 + 1j * theta2)
    sep = abs(z - z2)
    ring = abs(1.0 - np.exp(-(t + t2) + 1j * (theta - theta2)))
    if kind == "slice":
        if sep == 0.0:
            raise CoincidentPoints("slice kernel diverges at coincident points")
        return float(-min(t, t2) - np.log(sep))
    if kind == "dirichletY":
        if sep == 0.0:
            raise CoincidentPoints("dirichletY kernel diverges at coincident points")
        return float(np.log(ring) - np.log(sep) - min(t, t2))
    if kind == "harmonic":
        if ring == 0.0:
            raise CoincidentPoints("harmonic kernel diverges at t=t2=0, equal angles")
        return float(-np.log(ring))
    raise ValueError(f"unknown covariance kind {kind!r}")


def truncated_slice_cov(n_modes: int, dt_abs, dtheta):
    """Mode-truncated slice covariance sum_{n<=N} e^{-n|t-t2|} cos(n d)/n.

    Broadcasts over array arguments; this is the exact covariance of the
    sampled N-mode field and the kernel used by shift-based estimators.
    """
    dt_abs = np.abs(np.asarray(dt_abs, dtype=float))[..., None]
    dtheta = np.asarray(dtheta, dtype=float)[..., None]
    n = np.arange(1, n_modes + 1, dtype=float)
    terms = np.exp(-n * dt_abs) * np.cos(n * dtheta) / n
    return terms.sum(axis=-1)


# ---------------------------------------------------------------------------
# Circle average
# ---------------------------------------------------------------------------

def circle_average(path: PathSample, epsilon: float, k: int, theta: float,
                   quadrature_points: int = 16) -> float:
    """Average of the field over a radius-epsilon circle in (t, theta).

    The average applies to the mode field only; the Brownian zero mode enters
    at the slice time.  Off-grid times are snapped to the nearest grid node,
    so epsilon must be an integer multiple of dt and the circle must fit in
    the sampled span.
    """
    grid = path.grid
    ratio = epsilon / grid.dt
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise EpsilonGridMismatch(f"epsilon={epsilon} is not a positive multiple of dt={grid.dt}")
    if quadrature_points < 8:
        raise ValueError("quadrature_points must be >= 8")
    if not (0 <= k <= grid.n_steps):
        raise IndexOutOfRange(f"time index {k} outside grid")
    v = 2.0 * np.pi * (np.arange(quadrature_points) + 0.5) / quadrature_points
    k_off = np.rint(epsilon * np.cos(v) / grid.dt).astype(int)
    ks = k + k_off
    if ks.min() < 0 or ks.max() > grid.n_steps:
        raise IndexOutOfRange("averaging circle leaves the sampled span")
    th = theta + epsilon * np.sin(v)
    vals = [fluctuation_grid(path.mode_x[kk], path.mode_y[kk], np.array([tt]))[0]
            for kk, tt in zip(ks, th)]
    return float(path.initial.zero_mode + path.brownian[k] + np.mean(vals))


def averaged_mode_arrays(mode_x: np.ndarray, mode_y: np.ndarray, grid: TimeGrid,
                         epsilon: float, quadrature_points: int = 16):
    """Circle-averaged effective mode coefficients on the full grid.

    Averaging the field over a (t, theta)-circle is a time shift plus a
    rotation of each (x_n, y_n) pair by n * epsilon * sin(v); returns arrays
    shaped like the inputs, valid on grid rows where the circle fits
    (rows within epsilon of either end are left as NaN).
    """
    ratio = epsilon / grid.dt
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise EpsilonGridMismatch(f"epsilon={epsilon} is not a positive multiple of dt={grid.dt}")
    n_modes = mode_x.shape[-1]
    k_tot = grid.n_steps
    v = 2.0 * np.pi * (np.arange(quadrature_points) + 0.5) / quadrature_points
    k_off = np.rint(epsilon * np.cos(v) / grid.dt).astype(int)
    margin = int(round(ratio))
    n = np.arange(1, n_modes + 1, dtype=float)
    out_x = np.full_like(mode_x, np.nan)
    out_y = np.full_like(mode_y, np.nan)
    rows = np.arange(margin, k_tot + 1 - margin)
    if rows.size == 0:
        return out_x, out_y
    acc_x = np.zeros_like(mode_x[..., rows, :])
    acc_y = np.zeros_like(mode_y[..., rows, :])
    for off, ang in zip(k_off, epsilon * np.sin(v)):
        cos_r = np.cos(n * ang)
        sin_r = np.sin(n * ang)
        xr = mode_x[..., rows + off, :]
        yr = mode_y[..., rows + off, :]
        acc_x += xr * cos_r + yr * sin_r
        acc_y += -xr * sin_r + yr * cos_r
    out_x[..., rows, :] = acc_x / quadrature_points
    out_y[..., rows, :] = acc_y / quadrature_points
    return out_x, out_y


# ---------------------------------------------------------------------------
# Debug dump
# ---------------------------------------------------------------------------

def dump_path(path: PathSample, fileobj: io.IOBase) -> None:
    """Write a path to an open binary file.

    Layout: one JSON header line {dt, n_steps, n_modes, c}, then float64
    row-major blocks in order: brownian (K+1), mode_x (K+1, N), mode_y
    (K+1, N), initial xs (N), initial ys (N).
    """
    head = {"dt": path.grid.dt, "n_steps": path.grid.n_steps,
            "n_modes": path.n_modes, "c": path.initial.zero_mode}
    fileobj.write((json.dumps(head, sort_keys=True) + "\n").encode())
    for arr in (path.brownian, path.mode_x, path.mode_y, path.initial.xs, path.initial.ys):
        fileobj.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_path(fileobj: io.IOBase) -> PathSample:
    """Inverse of :func:`dump_path`."""
    head = json.loads(fileobj.readline().decode())
    grid = TimeGrid(head["dt"], head["n_steps"])
    kp1, n = head["n_steps"] + 1, head["n_modes"]

    def block(count):
        return np.frombuffer(fileobj.read(8 * count), dtype="<f8").copy()

    brownian = block(kp1)
    mode_x = block(kp1 * n).reshape(kp1, n)
    mode_y = block(kp1 * n).reshape(kp1, n)
    xs = block(n)
    ys = block(n)
    return PathSample(grid, brownian, mode_x, mode_y, CircleField(head["c"], xs, ys))
