"""Experiment configuration files (YAML).

Keys::

    benchmark:          {id: analytic_field | linear_sde, params: {...}}
    lattice_resolution: int or list of ints (one per dimension)
    strategies:         list of strategy names
    n_initial:          initial training-set size N0 (>= 2)
    budget:             total simulations N_total
    batch_size:         M (1 = sequential)
    candidate_count:    M_T, candidates drawn for the k-DPP
    seeds:              list of ints or a range string such as "1..20"
    mle:                {restarts, refit_restarts, learn_noise, refit, noise_std, maxiter}
    mc_draws:           Monte-Carlo draws per point for simulated ground truth
    ground_truth_seed:  seed of the ground-truth sampling stream
    output_dir:         directory for CSV/JSON outputs
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from ..sampling import LoopConfig, MleSettings, Strategy
from ..systems import build_lattice, make_system

KNOWN_KEYS = {"benchmark", "lattice_resolution", "strategies", "n_initial", "budget",
              "batch_size", "candidate_count", "seeds", "mle", "mc_draws",
              "ground_truth_seed", "output_dir"}
MLE_KEYS = {"restarts", "refit_restarts", "learn_noise", "refit", "noise_std", "maxiter"}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` maps field names to messages."""

    def __init__(self, errors: dict):
        self.errors = errors
        super().__init__("invalid config: " + "; ".join(f"{k}: {v}" for k, v in errors.items()))


def parse_seeds(spec) -> list[int]:
    """``"1..20"`` (inclusive), ``"1,3,5"``, an int, or a list of ints."""
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, (list, tuple)):
        return [int(s) for s in spec]
    out = []
    for part in str(spec).split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    benchmark_id: str
    benchmark_params: dict = field(default_factory=dict)
    lattice_resolution: tuple = (201, 201)
    strategies: tuple = tuple(s.value for s in Strategy)
    n_initial: int = 50
    budget: int = 450
    batch_size: int = 10
    candidate_count: int = 1000
    seeds: tuple = (1,)
    mle: MleSettings = field(default_factory=MleSettings)
    mc_draws: int = 2000
    ground_truth_seed: int = 0
    output_dir: str = "out"

    @property
    def iterations(self) -> int:
        return (self.budget - self.n_initial) // self.batch_size

    def system(self):
        return make_system(self.benchmark_id, **dict(self.benchmark_params))

    def lattice(self):
        sys_ = self.system()
        return build_lattice(sys_.theta_bounds, self.lattice_resolution)

    def loop_config(self) -> LoopConfig:
        return LoopConfig(self.n_initial, self.iterations, self.batch_size,
                          self.candidate_count, self.mle)

    def to_dict(self) -> dict:
        return {
            "benchmark": {"id": self.benchmark_id, "params": dict(self.benchmark_params)},
            "lattice_resolution": list(self.lattice_resolution),
            "strategies": list(self.strategies),
            "n_initial": self.n_initial,
            "budget": self.budget,
            "batch_size": self.batch_size,
            "candidate_count": self.candidate_count,
            "seeds": list(self.seeds),
            "mle": asdict(self.mle),
            "mc_draws": self.mc_draws,
            "ground_truth_seed": self.ground_truth_seed,
            "output_dir": self.output_dir,
        }

    def run_hash(self) -> str:
        """Hash of everything that determines a single run (excludes seeds, strategies, output)."""
        d = self.to_dict()
        for k in ("seeds", "strategies", "output_dir"):
            d.pop(k)
        return _hash(d)

    def benchmark_hash(self) -> str:
        return _hash({"benchmark": self.to_dict()["benchmark"],
                      "lattice_resolution": list(self.lattice_resolution),
                      "mc_draws": self.mc_draws if self.benchmark_id != "analytic_field" else None,
                      "ground_truth_seed": self.ground_truth_seed})

    def with_overrides(self, seeds=None, strategies=None, output_dir=None) -> "ExperimentConfig":
        changes = {}
        if seeds is not None:
            changes["seeds"] = tuple(parse_seeds(seeds))
        if strategies is not None:
            if isinstance(strategies, str):
                strategies = [s.strip() for s in strategies.split(",") if s.strip()]
            changes["strategies"] = tuple(strategies)
        if output_dir is not None:
            changes["output_dir"] = str(output_dir)
        return validate(replace(self, **changes))


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    errors = {}
    try:
        sys_ = cfg.system()
    except (TypeError, ValueError) as exc:
        errors["benchmark"] = str(exc)
        sys_ = None
    res = tuple(int(r) for r in np.atleast_1d(cfg.lattice_resolution))
    n_lattice = None
    if sys_ is not None:
        if len(res) == 1:
            res = res * sys_.dim_theta
        if len(res) != sys_.dim_theta:
            errors["lattice_resolution"] = f"expected {sys_.dim_theta} entries, got {len(res)}"
        else:
            try:
                n_lattice = len(build_lattice(sys_.theta_bounds, res))
            except ValueError as exc:
                errors["lattice_resolution"] = str(exc)
    for s in cfg.strategies:
        try:
            Strategy(s)
        except ValueError:
            errors["strategies"] = f"unknown strategy {s!r}"
    if not cfg.strategies:
        errors["strategies"] = "at least one strategy required"
    if cfg.n_initial < 2:
        errors["n_initial"] = "must be >= 2"
    if cfg.budget < cfg.n_initial:
        errors["budget"] = "must be >= n_initial"
    elif n_lattice is not None and cfg.budget > n_lattice:
        errors["budget"] = f"exceeds lattice size {n_lattice}"
    if cfg.batch_size < 1:
        errors["batch_size"] = "must be >= 1"
    elif cfg.batch_size > 1 and cfg.candidate_count < cfg.batch_size:
        errors["candidate_count"] = "must be >= batch_size"
    if not cfg.seeds:
        errors["seeds"] = "at least one seed required"
    if cfg.mc_draws < 1:
        errors["mc_draws"] = "must be >= 1"
    if errors:
        raise ConfigError(errors)
    if res != tuple(cfg.lattice_resolution):
        cfg = replace(cfg, lattice_resolution=res)
    return cfg


def from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError({"<root>": "config must be a mapping"})
    unknown = set(d) - KNOWN_KEYS
    if unknown:
        raise ConfigError({k: "unknown key" for k in sorted(unknown)})
    bench = d.get("benchmark")
    if not isinstance(bench, dict) or "id" not in bench:
        raise ConfigError({"benchmark": "must be a mapping with an 'id'"})
    mle_d = d.get("mle") or {}
    bad = set(mle_d) - MLE_KEYS
    if bad:
        raise ConfigError({f"mle.{k}": "unknown key" for k in sorted(bad)})
    try:
        mle = MleSettings(**mle_d)
    except (TypeError, ValueError) as exc:
        raise ConfigError({"mle": str(exc)}) from None
    kwargs = {}
    try:
        for key in ("n_initial", "budget", "batch_size", "candidate_count", "mc_draws",
                    "ground_truth_seed"):
            if key in d:
                kwargs[key] = int(d[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError({key: str(exc)}) from None
    if "lattice_resolution" in d:
        kwargs["lattice_resolution"] = tuple(int(r) for r in np.atleast_1d(d["lattice_resolution"]))
    if "strategies" in d:
        kwargs["strategies"] = tuple(d["strategies"])
    if "seeds" in d:
        try:
            kwargs["seeds"] = tuple(parse_seeds(d["seeds"]))
        except ValueError as exc:
            raise ConfigError({"seeds": str(exc)}) from None
    if "output_dir" in d:
        kwargs["output_dir"] = str(d["output_dir"])
    cfg = ExperimentConfig(benchmark_id=str(bench["id"]),
                           benchmark_params=dict(bench.get("params") or {}), mle=mle, **kwargs)
    return validate(cfg)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError({"<file>": str(exc)}) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError({"<file>": f"YAML error: {exc}"}) from None
    return from_dict(data)
