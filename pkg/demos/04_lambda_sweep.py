"""Run a small lambda sweep over two style corpora and emit reports.

The sweep persists one JSON file per cell under <out>/cells/, so killing
and rerunning the script resumes instead of recomputing; rows.csv,
aggregates.json, pareto.csv, per-metric SVG charts and generations.txt land
next to it.
"""
import pathlib
import tempfile

from stylesteer import SteeringConfig, SweepConfig, run_sweep
from stylesteer.sampletext import chivalric_text, headline_text

workdir = pathlib.Path(tempfile.mkdtemp(prefix="stylesteer-sweep-"))
(workdir / "archaic.txt").write_text(chivalric_text(20_000, seed=31), encoding="utf-8")
(workdir / "news.txt").write_text(headline_text(20_000, seed=32), encoding="utf-8")
(workdir / "base.txt").write_text(
    headline_text(15_000, seed=33) + "\n" + chivalric_text(15_000, seed=34),
    encoding="utf-8",
)

config = SweepConfig(
    corpora=(
        ("archaic", str(workdir / "archaic.txt")),
        ("news", str(workdir / "news.txt")),
    ),
    out_dir=str(workdir / "out"),
    provider=f"ref:{workdir / 'base.txt'}",
    lambda_grid=(0.0, 0.1, 0.5, 1.0),
    prompts=(
        "the knight spoke of",
        "officials approve the deal",
        "at the crossroads stood",
        "markets rally amid",
    ),
    decode=SteeringConfig(max_new_tokens=32),
    run_seed=7,
)

report = run_sweep(config, on_cell=lambda row: print("  cell", row["cell_id"], row["status"]))

print(f"\n{len(report.rows)} cells -> {config.out_dir}")
for corpus, frontier in report.frontier.items():
    print(f"\npareto frontier for {corpus} (lambda, base_ppl, style_ppl):")
    for lam, base_ppl, style_ppl in frontier:
        print(f"  {lam:4.2f}  {base_ppl:10.2f}  {style_ppl:12.1f}")

print("\nartifacts:")
for path in sorted(pathlib.Path(config.out_dir).iterdir()):
    print("  " + path.name)
