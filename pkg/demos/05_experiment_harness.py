"""Running a paired-seed comparison through the harness.

Equivalent to ``statverify run configs/linear_sde.yaml --seeds 1..2`` with
a reduced budget, followed by ``statverify summarize``.
"""
import tempfile
from pathlib import Path

from statverify.harness import config, runner, summary

root = Path(__file__).resolve().parents[1]
cfg = config.load_config(root / "configs" / "linear_sde.yaml")
out = Path(tempfile.mkdtemp(prefix="statverify_"))
cfg = cfg.with_overrides(seeds="1..2", output_dir=out)
print(f"{cfg.benchmark_id}: {cfg.iterations} iterations of {cfg.batch_size}, "
      f"strategies {list(cfg.strategies)}")

traces = runner.run_experiment(cfg)
for t in traces:
    print(f"  {t.strategy:24s} seed {t.seed}: final MAE {t.final_mae:.4f}")

rows = summary.summarize(summary.load_tables(out))
for name, r in summary.final_rows(rows).items():
    print(f"{name:24s} mean {r['mae_mean']:.4f}  ratio {r['ratio_proposed_le']:.2f}  "
          f"improvement {r['improvement_pct']:+.1f}%")
print("outputs:", sorted(p.name for p in out.iterdir()))
