"""Report figures, written next to the CSV/JSON outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import ClassReport  # noqa: E402

# Fixed metadata keeps PNG bytes reproducible.
_META = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def plot_class_f1(r: ClassReport, path: str | Path, title: str = "per-predicate F1") -> Path:
    names = r.classes
    fig, ax = plt.subplots(figsize=(max(4.0, 0.45 * len(names) + 1.5), 3.5))
    ax.bar(range(len(names)), [r.per_class[n]["f1"] for n in names], color="#4c72b0")
    ax.axhline(r.macro_f1, color="#c44e52", lw=1, ls="--", label=f"macro {r.macro_f1:.3f}")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("F1")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, path)


def plot_ablation(rows: Sequence[dict], path: str | Path, key: str = "macro_f1", title: str = "ablation") -> Path:
    names = [r["cell"] for r in rows]
    means = [r[f"{key}_mean"] for r in rows]
    stds = [r[f"{key}_std"] for r in rows]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.7 * len(names) + 1.5), 3.5))
    ax.bar(range(len(names)), means, yerr=stds, capsize=3, color="#55a868")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel(key.replace("_", " "))
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    return _save(fig, path)


def plot_loss(losses: Sequence[float], path: str | Path, stage_break: int | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(range(len(losses)), losses, lw=0.8, color="#4c72b0")
    if stage_break is not None and 0 < stage_break < len(losses):
        ax.axvline(stage_break, color="#8c8c8c", ls=":", lw=1)
    ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    return _save(fig, path)


def plot_vpq(ks: Sequence[int], scores: Sequence[float], path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.plot(list(ks), list(scores), marker="o", color="#4c72b0")
    ax.set_xlabel("window k")
    ax.set_ylabel("VPQ")
    ax.set_ylim(0, 1.05)
    return _save(fig, path)
