"""Run paired-seed strategy comparisons and write their outputs."""
from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import dpp, sampling
from ..verify import GroundTruthField
from ..systems import ground_truth
from .config import ExperimentConfig
from .summary import TraceTable, summarize, trace_stem, write_summary_csv, write_trace_csv

logger = logging.getLogger(__name__)


def ground_truth_path(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output_dir) / "cache" / f"ground_truth_{cfg.benchmark_hash()}.npz"


def load_or_compute_ground_truth(cfg: ExperimentConfig, lattice=None) -> GroundTruthField:
    """Ground truth for the config's benchmark, cached under ``output_dir/cache``."""
    path = ground_truth_path(cfg)
    lattice = lattice if lattice is not None else cfg.lattice()
    if path.exists():
        with np.load(path) as data:
            p = data["p_sat_true"]
        if p.shape == (len(lattice),):
            return GroundTruthField(lattice.points, p)
        logger.warning("ignoring stale ground-truth cache %s", path)
    truth = ground_truth(cfg.system(), lattice, cfg.mc_draws, cfg.ground_truth_seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, p_sat_true=truth.p_sat_true)
    return truth


def run_one(cfg: ExperimentConfig, strategy: str, seed: int, lattice=None, truth=None):
    """A single (strategy, seed) run; sequential when ``batch_size == 1``."""
    lattice = lattice if lattice is not None else cfg.lattice()
    system = cfg.system()
    loop = cfg.loop_config()
    t0 = time.perf_counter()
    if cfg.batch_size == 1:
        trace = sampling.run_sequential(loop, system, lattice, seed, strategy, truth)
    else:
        trace = dpp.run_batch(loop, strategy, system, lattice, seed, truth)
    trace.meta.update(config_hash=cfg.run_hash(), seconds=time.perf_counter() - t0)
    return trace


def _job(args):
    cfg, strategy, seed, lattice, truth = args
    try:
        return run_one(cfg, strategy, seed, lattice, truth)
    except Exception as exc:  # recorded per run so sibling runs continue
        trace = sampling.RunTrace(strategy, seed, error=f"{type(exc).__name__}: {exc}")
        trace.meta["config_hash"] = cfg.run_hash()
        return trace


def write_trace(trace, cfg: ExperimentConfig, out_dir: Path) -> None:
    stem = trace_stem(trace.strategy, trace.seed)
    write_trace_csv(TraceTable.from_trace(trace), out_dir / f"{stem}.csv")
    meta = {
        "strategy": trace.strategy,
        "seed": trace.seed,
        "config_hash": trace.meta.get("config_hash", ""),
        "config": cfg.to_dict(),
        "error": trace.error,
        "initial_indices": trace.initial_indices,
        "euler_maruyama_dt": trace.meta.get("dt"),
        "records": [
            {"iteration": r.iteration, "n_train": r.n_train, "selected": r.selected,
             "measurements": r.measurements, "hyperparams": r.hyperparams,
             "mae": r.mae, "mae_drop05": r.mae_drop05, "mae_drop10": r.mae_drop10,
             "n_clamped": r.n_clamped}
            for r in trace.records
        ],
        "timing": {"total_seconds": trace.meta.get("seconds"),
                   "iteration_seconds": [r.seconds for r in trace.records]},
    }
    (out_dir / f"{stem}.json").write_text(json.dumps(meta, indent=1))
    if trace.final_field is not None:
        f = trace.final_field
        np.savez(out_dir / f"{stem}_field.npz", p_sat_hat=f.p_sat_hat,
                 cdf_variance=f.cdf_variance, mean=f.mean, variance=f.variance)


def run_experiment(cfg: ExperimentConfig, threads: int = 1, write: bool = True):
    """Every strategy x seed run from the same initial designs; returns the traces.

    Traces are written as they complete, followed by ``summary.csv``.
    ``threads == 0`` uses one worker per CPU.
    """
    lattice = cfg.lattice()
    truth = load_or_compute_ground_truth(cfg, lattice) if write else ground_truth(
        cfg.system(), lattice, cfg.mc_draws, cfg.ground_truth_seed)
    out_dir = Path(cfg.output_dir)
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, s, seed, lattice, truth) for seed in cfg.seeds for s in cfg.strategies]
    workers = (os.cpu_count() or 1) if threads == 0 else max(1, threads)
    traces = []
    if workers == 1:
        results = map(_job, jobs)
    else:
        pool = ProcessPoolExecutor(workers)
        results = pool.map(_job, jobs)
    for trace in results:
        if trace.error:
            logger.warning("%s seed %d failed: %s", trace.strategy, trace.seed, trace.error)
        if write:
            write_trace(trace, cfg, out_dir)
        traces.append(trace)
    if workers != 1:
        pool.shutdown()
    completed = [t for t in traces if t.records]
    if write and completed:
        write_summary_csv(summarize(completed), out_dir / "summary.csv")
    return traces
