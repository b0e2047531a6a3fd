"""Run configuration: strict JSON schema with defaults.

Unknown keys are rejected at every level so a typo cannot silently fall back
to a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .params import ModelParams, validate_params

EXPERIMENTS = (
    "validate", "sample", "gmc-mass", "moments", "scaling-check", "partition",
    "lambda0", "ground-state", "vertex", "two-point", "gap-fit", "lz", "mc-vs-lz",
)


@dataclass(frozen=True)
class SamplerCfg:
    n_modes: int = 64
    dt: float = 1.0 / 32.0
    window: float = 1.5          # cylinder half-height T


@dataclass(frozen=True)
class GmcCfg:
    kind: str = "fourier"        # "fourier" | "circle"
    n: int = 64
    epsilon: float = 1.0 / 16.0
    theta_cells: int = 128


@dataclass(frozen=True)
class EstimatorCfg:
    n_samples: int = 8192
    seed: int = 1
    c_window: float = 8.0        # window is [-c_window/gamma, c_window/gamma]
    c_nodes: int = 65


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    sampler: SamplerCfg
    gmc: GmcCfg
    estimator: EstimatorCfg
    experiment: str
    options: dict = field(default_factory=dict)

    def raw(self) -> dict:
        return {
            "params": {"gamma": self.params.gamma, "mu": self.params.mu,
                       "radius": self.params.radius},
            "sampler": {"n_modes": self.sampler.n_modes, "dt": self.sampler.dt,
                        "window": self.sampler.window},
            "gmc": {"regularization": ({"kind": "fourier", "n": self.gmc.n}
                                       if self.gmc.kind == "fourier"
                                       else {"kind": "circle", "epsilon": self.gmc.epsilon}),
                    "theta_cells": self.gmc.theta_cells},
            "estimator": {"n_samples": self.estimator.n_samples, "seed": self.estimator.seed,
                          "c_window": self.estimator.c_window,
                          "c_nodes": self.estimator.c_nodes},
            "experiment": {"name": self.experiment, "options": self.options},
        }


def _take(block: dict, context: str, allowed: dict):
    """Pop known keys with defaults; reject anything unknown."""
    block = dict(block)
    out = {}
    for key, default in allowed.items():
        out[key] = block.pop(key, default)
    if block:
        raise ConfigError(f"unknown keys in {context}: {sorted(block)}")
    return out


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be an object")
    top = _take(data, "top level", {
        "params": None, "sampler": {}, "gmc": {}, "estimator": {}, "experiment": None,
    })
    if top["params"] is None:
        raise ConfigError("missing required block 'params'")
    if top["experiment"] is None:
        raise ConfigError("missing required block 'experiment'")

    p = _take(top["params"], "params", {"gamma": None, "mu": None, "radius": 1.0})
    if p["gamma"] is None or p["mu"] is None:
        raise ConfigError("params block needs gamma and mu")
    try:
        params = validate_params(p["gamma"], p["mu"], p["radius"])
    except Exception as exc:
        raise ConfigError(f"invalid params: {exc}") from exc

    s = _take(top["sampler"], "sampler", {"n_modes": 64, "dt": 1.0 / 32.0, "window": 1.5})
    if s["n_modes"] < 1 or s["dt"] <= 0 or s["window"] <= 0:
        raise ConfigError("sampler block values out of range")
    sampler = SamplerCfg(int(s["n_modes"]), float(s["dt"]), float(s["window"]))

    g = _take(top["gmc"], "gmc", {"regularization": {"kind": "fourier", "n": 64},
                                  "theta_cells": 128})
    reg = dict(g["regularization"])
    kind = reg.pop("kind", "fourier")
    if kind == "fourier":
        reg = _take({"kind": kind, **reg}, "gmc.regularization", {"kind": None, "n": 64})
        gmc = GmcCfg(kind="fourier", n=int(reg["n"]), theta_cells=int(g["theta_cells"]))
    elif kind == "circle":
        reg = _take({"kind": kind, **reg}, "gmc.regularization",
                    {"kind": None, "epsilon": 1.0 / 16.0})
        gmc = GmcCfg(kind="circle", epsilon=float(reg["epsilon"]),
                     theta_cells=int(g["theta_cells"]))
    else:
        raise ConfigError(f"unknown regularization kind {kind!r}")

    e = _take(top["estimator"], "estimator",
              {"n_samples": 8192, "seed": 1, "c_window": 8.0, "c_nodes": 65})
    if e["n_samples"] < 2 or e["c_nodes"] < 8 or e["c_window"] <= 0:
        raise ConfigError("estimator block values out of range")
    est = EstimatorCfg(int(e["n_samples"]), int(e["seed"]), float(e["c_window"]),
                       int(e["c_nodes"]))

    exp = _take(top["experiment"], "experiment", {"name": None, "options": {}})
    if exp["name"] not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp['name']!r}; "
                          f"choose one of {', '.join(EXPERIMENTS)}")
    if not isinstance(exp["options"], dict):
        raise ConfigError("experiment.options must be an object")
    return RunConfig(params=params, sampler=sampler, gmc=gmc, estimator=est,
                     experiment=exp["name"], options=exp["options"])


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)


def with_overrides(cfg: RunConfig, seed: int | None = None, fast: bool = False) -> RunConfig:
    est = cfg.estimator
    sampler = cfg.sampler
    if seed is not None:
        est = EstimatorCfg(est.n_samples, int(seed), est.c_window, est.c_nodes)
    if fast:
        est = EstimatorCfg(min(est.n_samples, 1000), est.seed, est.c_window, est.c_nodes)
        sampler = SamplerCfg(min(sampler.n_modes, 16), sampler.dt, sampler.window)
    return RunConfig(params=cfg.params, sampler=sampler, gmc=cfg.gmc, estimator=est,
                     experiment=cfg.experiment, options=cfg.options)
