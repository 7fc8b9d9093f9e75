"""Report emission: CSV rows, JSON aggregates, pareto table, SVG charts.

Floats are written with ``repr`` so a parsed CSV reproduces every numeric
field exactly; charts are small hand-built SVGs with no plotting
dependency.
"""
from __future__ import annotations

import csv
import json
import os

from .sweep import SweepReport

CSV_COLUMNS = (
    "corpus",
    "lambda",
    "prompt_id",
    "T",
    "style_ppl",
    "base_ppl",
    "mean_jsd_bits",
    "unigram_overlap",
    "bigram_seen",
    "seed",
    "status",
)

CHART_METRICS = (
    "style_ppl",
    "base_ppl",
    "mean_jsd_bits",
    "unigram_overlap",
    "bigram_seen",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_reports(report: SweepReport, out_dir) -> list[str]:
    """Write all report artifacts; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    rows_path = os.path.join(out_dir, "rows.csv")
    with open(rows_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in report.rows:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    written.append(rows_path)

    agg_path = os.path.join(out_dir, "aggregates.json")
    with open(agg_path, "w", encoding="utf-8") as fh:
        json.dump(
            {"aggregates": report.aggregates, "config_hash": report.meta.get("config_hash")},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    written.append(agg_path)

    pareto_path = os.path.join(out_dir, "pareto.csv")
    with open(pareto_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("corpus", "lambda", "base_ppl", "style_ppl"))
        for corpus in report.frontier:
            for lam, base, style in report.frontier[corpus]:
                writer.writerow((corpus, repr(lam), repr(base), repr(style)))
    written.append(pareto_path)

    gen_path = os.path.join(out_dir, "generations.txt")
    with open(gen_path, "w", encoding="utf-8") as fh:
        for row in report.rows:
            fh.write(
                f"### {row['cell_id']} corpus={row['corpus']} "
                f"lambda={row['lambda']} prompt={row['prompt_id']} "
                f"status={row['status']}\n"
            )
            fh.write((row.get("text") or "") + "\n\n")
    written.append(gen_path)

    for corpus, per_lambda in report.aggregates.items():
        if not per_lambda:
            continue
        lams = sorted(float(k) for k in per_lambda)
        for metric in CHART_METRICS:
            points = [
                (lam, per_lambda[repr(lam)][metric]["mean"])
                for lam in lams
                if metric in per_lambda[repr(lam)]
            ]
            if not points:
                continue
            chart_path = os.path.join(out_dir, f"chart_{corpus}_{metric}.svg")
            with open(chart_path, "w", encoding="utf-8") as fh:
                fh.write(line_chart_svg(f"{corpus}: {metric} vs lambda", points))
            written.append(chart_path)
    return written


def load_rows(path) -> list[dict]:
    """Parse rows.csv back into typed row dicts."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for raw in csv.DictReader(fh):
            row: dict = {"corpus": raw["corpus"], "status": raw["status"]}
            row["lambda"] = float(raw["lambda"])
            row["prompt_id"] = int(raw["prompt_id"])
            row["seed"] = int(raw["seed"])
            for name in ("T",):
                row[name] = int(raw[name]) if raw[name] else None
            for name in (
                "style_ppl",
                "base_ppl",
                "mean_jsd_bits",
                "unigram_overlap",
                "bigram_seen",
            ):
                row[name] = float(raw[name]) if raw[name] else None
            rows.append(row)
    return rows


def line_chart_svg(
    title: str,
    points: list[tuple[float, float]],
    width: int = 640,
    height: int = 400,
) -> str:
    """One polyline-with-markers chart; x is lambda, y the metric mean."""
    margin = 60
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x: float) -> float:
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(y: float) -> float:
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in points)
    circles = "".join(
        f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="#1f77b4"/>'
        for x, y in points
    )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<text x="{width / 2}" y="24" text-anchor="middle" font-size="14" '
        f'font-family="sans-serif">{title}</text>\n'
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>\n'
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        f'stroke="black"/>\n'
        f'<text x="{margin}" y="{height - margin + 20}" font-size="11" '
        f'font-family="sans-serif">{x_lo:g}</text>\n'
        f'<text x="{width - margin}" y="{height - margin + 20}" text-anchor="end" '
        f'font-size="11" font-family="sans-serif">{x_hi:g}</text>\n'
        f'<text x="{margin - 6}" y="{height - margin}" text-anchor="end" '
        f'font-size="11" font-family="sans-serif">{y_lo:.4g}</text>\n'
        f'<text x="{margin - 6}" y="{margin + 4}" text-anchor="end" font-size="11" '
        f'font-family="sans-serif">{y_hi:.4g}</text>\n'
        f'<polyline points="{path}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>\n'
        f"{circles}\n"
        f"</svg>\n"
    )
