"""Command-line entry point: ``statverify run | summarize | ground-truth``.

Exit codes: 0 on success, 2 when some runs failed, 1 on configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .runner import ground_truth_path, load_or_compute_ground_truth, run_experiment
from .summary import final_rows, load_tables, summarize, write_summary_csv

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _config_arg(p):
    p.add_argument("config_path", nargs="?", help="experiment config file (YAML)")
    p.add_argument("--config", dest="config_flag", metavar="PATH", help="experiment config file")
    p.add_argument("--out", metavar="DIR", help="override output_dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="statverify",
                                     description="Closed-loop statistical verification experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every strategy x seed and write CSVs")
    _config_arg(run)
    run.add_argument("--seeds", help='override seeds, e.g. "1..20" or "1,4,7"')
    run.add_argument("--strategies", help="override strategies, comma separated")
    run.add_argument("--threads", type=int, default=1, help="worker processes (0 = one per CPU)")

    summ = sub.add_parser("summarize", help="rebuild summary.csv from trace CSVs")
    summ.add_argument("directory")
    summ.add_argument("--out", metavar="PATH", help="summary file (default DIR/summary.csv)")

    gt = sub.add_parser("ground-truth", help="precompute and cache the ground-truth field")
    _config_arg(gt)
    return parser


def _load(args):
    path = args.config_flag or args.config_path
    if not path:
        raise ConfigError({"--config": "a config file is required"})
    cfg = load_config(path)
    overrides = {"output_dir": args.out}
    if args.command == "run":
        overrides.update(seeds=args.seeds, strategies=args.strategies)
    return cfg.with_overrides(**overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "summarize":
        try:
            rows = summarize(load_tables(args.directory))
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        out = Path(args.out) if args.out else Path(args.directory) / "summary.csv"
        write_summary_csv(rows, out)
        for strategy, r in final_rows(rows).items():
            print(f"{strategy:24s} iter {r['iter']:3d}  MAE {r['mae_mean']:.5f} +- {r['mae_std']:.5f}"
                  f"  ratio {r['ratio_proposed_le']:.2f}  improvement {r['improvement_pct']:.1f}%")
        return EXIT_OK

    try:
        cfg = _load(args)
    except ConfigError as exc:
        for key, msg in exc.errors.items():
            print(f"config error: {key}: {msg}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "ground-truth":
        truth = load_or_compute_ground_truth(cfg)
        print(f"{len(truth)} points cached at {ground_truth_path(cfg)}")
        return EXIT_OK

    traces = run_experiment(cfg, threads=args.threads)
    failed = [t for t in traces if t.error]
    print(f"{len(traces) - len(failed)}/{len(traces)} runs completed; outputs in {cfg.output_dir}")
    return EXIT_PARTIAL if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
