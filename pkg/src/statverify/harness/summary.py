"""Per-trace CSV files and the cross-strategy summary table."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..sampling import PROPOSED

TRACE_COLUMNS = ["iter", "strategy", "seed", "mae", "mae_drop05", "mae_drop10", "n_train"]
SUMMARY_COLUMNS = ["iter", "strategy", "n_runs", "n_train", "mae_mean", "mae_std",
                   "mae_drop05_mean", "mae_drop10_mean", "ratio_proposed_le", "improvement_pct"]


@dataclass
class TraceTable:
    """The metric series of one run, as stored in its CSV."""

    strategy: str
    seed: int
    rows: list  # [(iter, mae, mae_drop05, mae_drop10, n_train)]
    config_hash: str = ""

    @classmethod
    def from_trace(cls, trace) -> "TraceTable":
        rows = [(r.iteration, r.mae, r.mae_drop05, r.mae_drop10, r.n_train) for r in trace.records]
        return cls(trace.strategy, trace.seed, rows, trace.meta.get("config_hash", ""))

    @property
    def mae(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def trace_stem(strategy: str, seed: int) -> str:
    return f"trace_{strategy}_seed{seed}"


def write_trace_csv(table: TraceTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for it, m, d05, d10, n in table.rows:
            w.writerow([it, table.strategy, table.seed, _fmt(m), _fmt(d05), _fmt(d10), n])


def read_trace_csv(path, config_hash: str = "") -> TraceTable:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        rows, strategy, seed = [], None, None
        for rec in reader:
            strategy, seed = rec["strategy"], int(rec["seed"])
            rows.append((int(rec["iter"]), float(rec["mae"]), float(rec["mae_drop05"]),
                         float(rec["mae_drop10"]), int(rec["n_train"])))
    if strategy is None:
        raise ValueError(f"{path}: empty trace")
    return TraceTable(strategy, seed, rows, config_hash)


def load_tables(directory) -> list[TraceTable]:
    directory = Path(directory)
    tables = []
    for csv_path in sorted(directory.glob("trace_*.csv")):
        meta = csv_path.with_suffix(".json")
        h = json.loads(meta.read_text()).get("config_hash", "") if meta.exists() else ""
        tables.append(read_trace_csv(csv_path, h))
    if not tables:
        raise ValueError(f"no trace CSVs in {directory}")
    return tables


def summarize(traces, proposed: str = PROPOSED.value) -> list[dict]:
    """Per strategy and iteration: MAE mean/std over seeds, paired ratios and improvement.

    ``ratio_proposed_le`` is the fraction of shared seeds where the proposed
    strategy's MAE is less than or equal to this strategy's;
    ``improvement_pct`` is ``100 (mean_s - mean_proposed) / mean_s``.  Both are
    NaN when the proposed strategy is absent.  Standard deviations use ddof=0.
    """
    tables = [t if isinstance(t, TraceTable) else TraceTable.from_trace(t) for t in traces]
    if not tables:
        raise ValueError("summarize needs at least one trace")
    hashes = {t.config_hash for t in tables}
    if len(hashes) > 1:
        raise ValueError(f"traces come from different configs: {sorted(hashes)}")
    by_strategy: dict[str, dict[int, TraceTable]] = {}
    for t in sorted(tables, key=lambda t: (t.strategy, t.seed)):
        by_strategy.setdefault(t.strategy, {})[t.seed] = t
    ref = by_strategy.get(proposed)
    out = []
    for strategy in sorted(by_strategy):
        runs = by_strategy[strategy]
        n_iter = min(len(t.rows) for t in runs.values())
        for i in range(n_iter):
            maes = np.array([t.rows[i][1] for t in runs.values()])
            d05 = np.array([t.rows[i][2] for t in runs.values()])
            d10 = np.array([t.rows[i][3] for t in runs.values()])
            ratio = improvement = float("nan")
            if ref is not None:
                shared = [s for s in runs if s in ref and len(ref[s].rows) > i]
                if shared:
                    ratio = float(np.mean([ref[s].rows[i][1] <= runs[s].rows[i][1]
                                           for s in shared]))
                    m_s = float(np.mean([runs[s].rows[i][1] for s in shared]))
                    m_p = float(np.mean([ref[s].rows[i][1] for s in shared]))
                    improvement = 100.0 * (m_s - m_p) / m_s if m_s > 0 else 0.0
            first = next(iter(runs.values()))
            out.append({
                "iter": first.rows[i][0],
                "strategy": strategy,
                "n_runs": len(runs),
                "n_train": first.rows[i][4],
                "mae_mean": float(np.mean(maes)),
                "mae_std": float(np.std(maes)),
                "mae_drop05_mean": float(np.mean(d05)),
                "mae_drop10_mean": float(np.mean(d10)),
                "ratio_proposed_le": ratio,
                "improvement_pct": improvement,
            })
    return out


def write_summary_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in SUMMARY_COLUMNS])


def final_rows(rows) -> dict:
    """Last-iteration summary row per strategy."""
    last = {}
    for r in rows:
        if r["strategy"] not in last or r["iter"] > last[r["strategy"]]["iter"]:
            last[r["strategy"]] = r
    return last
