"""Figures and delimited summaries rendered from run artifacts.

Everything draws through the Agg backend, so rendering works headless and
writes deterministic files next to the run's JSON output.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _report_fields(report) -> dict:
    if isinstance(report, dict):
        return report
    return {
        "condition": report.condition,
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "per_class_f1": report.per_class_f1,
        "n": report.n,
        "seed": report.seed,
    }


def render_loss_curve(history: list[dict], path: str | Path) -> Path:
    plt = _plt()
    path = Path(path)
    epochs = [entry["epoch"] for entry in history]
    losses = [entry["mean_loss"] for entry in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, losses, marker="o", linewidth=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean contrastive loss")
    ax.set_title("pretraining loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_ablation_chart(reports: list, path: str | Path) -> Path:
    plt = _plt()
    path = Path(path)
    rows = [_report_fields(r) for r in reports]
    labels = [r["condition"] for r in rows]
    x = range(len(rows))
    width = 0.38
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar([i - width / 2 for i in x], [r["accuracy"] for r in rows],
           width, label="accuracy")
    ax.bar([i + width / 2 for i in x], [r["macro_f1"] for r in rows],
           width, label="macro F1")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=15, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("ablation grid")
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_metrics_csv(reports: list, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["condition", "accuracy", "macro_f1", "n", "seed"])
        for report in reports:
            r = _report_fields(report)
            writer.writerow([r["condition"], f"{r['accuracy']:.6f}",
                             f"{r['macro_f1']:.6f}", r["n"], r["seed"]])
    return path


def render_run_report(run_dir: str | Path) -> list[Path]:
    """Re-render figures and CSVs from whatever artifacts a run left behind."""
    run_dir = Path(run_dir)
    written: list[Path] = []
    history_path = run_dir / "history.jsonl"
    if history_path.exists():
        history = [json.loads(line)
                   for line in history_path.read_text().splitlines() if line.strip()]
        history = [h for h in history if "mean_loss" in h]
        if history:
            written.append(render_loss_curve(history, run_dir / "loss_curve.png"))
    ablation_path = run_dir / "ablation.json"
    if ablation_path.exists():
        reports = json.loads(ablation_path.read_text())
        written.append(
            render_ablation_chart(reports, run_dir / "ablation_chart.png"))
        written.append(write_metrics_csv(reports, run_dir / "ablation.csv"))
    metrics_path = run_dir / "metrics.json"
    if metrics_path.exists():
        report = json.loads(metrics_path.read_text())
        written.append(write_metrics_csv([report], run_dir / "metrics.csv"))
    return written
