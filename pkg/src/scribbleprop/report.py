"""Report rendering: stats JSON/CSV plus matplotlib figures written to files."""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _savefig(fig, path):
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def write_eval_report(report, out_dir, stem="eval"):
    """stats.json + per-class CSV + bar figure for one IoU report."""
    os.makedirs(out_dir, exist_ok=True)
    stats = {
        "per_class": {str(c): report.per_class[c] for c in sorted(report.per_class)},
        "miou": report.mean,
    }
    with open(os.path.join(out_dir, "stats.json"), "w", encoding="utf-8") as f:
        json.dump(stats, f, indent=2, sort_keys=True)
        f.write("\n")

    csv_path = os.path.join(out_dir, f"{stem}_per_class.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "iou"])
        for c in sorted(report.per_class):
            iou = report.per_class[c]
            writer.writerow([c, "" if iou is None else f"{iou:.6f}"])

    present = [(c, v) for c, v in sorted(report.per_class.items()) if v is not None]
    fig, ax = plt.subplots(figsize=(max(3.0, 0.6 * len(present) + 1.5), 3.0))
    if present:
        ax.bar([str(c) for c, _ in present], [v for _, v in present], color="#4878cf")
    ax.axhline(report.mean, color="#d65f5f", linestyle="--", linewidth=1,
               label=f"mIoU = {report.mean:.3f}")
    ax.set_xlabel("class")
    ax.set_ylabel("IoU")
    ax.set_ylim(0, 1.05)
    ax.legend(loc="lower right")
    _savefig(fig, os.path.join(out_dir, f"{stem}_per_class.png"))


def write_train_report(stats, out_dir):
    """iterations.csv + training-curve figure from per-iteration statistics."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "iterations.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "mean_energy", "label_changes", "train_examples"])
        for it in stats:
            writer.writerow([it.iteration, f"{it.mean_energy:.6f}",
                             sum(it.label_changes.values()), it.train_examples])

    iters = [it.iteration for it in stats]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3))
    ax1.plot(iters, [it.mean_energy for it in stats], marker="o", color="#4878cf")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("mean labeling energy")
    ax1.set_xticks(iters)
    ax2.plot(iters, [sum(it.label_changes.values()) for it in stats],
             marker="o", color="#d65f5f")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("pixels relabeled")
    ax2.set_xticks(iters)
    fig.tight_layout()
    _savefig(fig, os.path.join(out_dir, "training_curves.png"))
