"""Per-predicate precision/recall/F1 over exact triplet matches."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .graph import SceneGraph
from .vocab import DEFAULT_VOCAB, PREDICATE_COUNTS

HEAD_MIN = 10_000
BODY_MIN = 1_000


@dataclass
class ConfusionTallies:
    counts: dict = field(default_factory=dict)  # predicate -> [tp, fp, fn]

    def _row(self, p: str) -> list:
        return self.counts.setdefault(p, [0, 0, 0])

    def add(self, p: str, tp: int = 0, fp: int = 0, fn: int = 0) -> None:
        row = self._row(p)
        row[0] += tp
        row[1] += fp
        row[2] += fn

    def __add__(self, other: "ConfusionTallies") -> "ConfusionTallies":
        out = ConfusionTallies({p: list(v) for p, v in self.counts.items()})
        for p, (tp, fp, fn) in other.counts.items():
            out.add(p, tp, fp, fn)
        return out

    def __iadd__(self, other: "ConfusionTallies") -> "ConfusionTallies":
        for p, (tp, fp, fn) in other.counts.items():
            self.add(p, tp, fp, fn)
        return self

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConfusionTallies):
            return NotImplemented
        nz = lambda c: {p: tuple(v) for p, v in c.items() if any(v)}
        return nz(self.counts) == nz(other.counts)


def tally(pred: SceneGraph, gt: SceneGraph) -> ConfusionTallies:
    out = ConfusionTallies()
    ps, gs = pred.as_set(), gt.as_set()
    for t in ps:
        if t in gs:
            out.add(t.predicate, tp=1)
        else:
            out.add(t.predicate, fp=1)
    for t in gs - ps:
        out.add(t.predicate, fn=1)
    return out


def tally_all(preds: Iterable[SceneGraph], gts: Iterable[SceneGraph]) -> ConfusionTallies:
    total = ConfusionTallies()
    for p, g in zip(preds, gts, strict=True):
        total += tally(p, g)
    return total


def f1_from_pr(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def _div(a: float, b: float) -> float:
    return a / b if b else 0.0


@dataclass
class ClassReport:
    per_class: dict  # predicate -> {"precision", "recall", "f1", "support", "tp", "fp", "fn"}
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float

    @property
    def classes(self) -> list[str]:
        return list(self.per_class)

    def support(self, p: str) -> int:
        return self.per_class[p]["support"]

    def to_json(self) -> dict:
        return {
            "per_class": self.per_class,
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall, "f1": self.macro_f1},
            "weighted": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
            },
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["predicate", "precision", "recall", "f1", "support"])
        for p, row in self.per_class.items():
            w.writerow([p, f"{row['precision']:.6f}", f"{row['recall']:.6f}", f"{row['f1']:.6f}", row["support"]])
        total = sum(r["support"] for r in self.per_class.values())
        w.writerow(["macro_avg", f"{self.macro_precision:.6f}", f"{self.macro_recall:.6f}", f"{self.macro_f1:.6f}", total])
        w.writerow(
            ["weighted_avg", f"{self.weighted_precision:.6f}", f"{self.weighted_recall:.6f}", f"{self.weighted_f1:.6f}", total]
        )
        return buf.getvalue()


def report(t: ConfusionTallies, predicates: Sequence[str] = DEFAULT_VOCAB.predicates) -> ClassReport:
    """Per-class scores plus macro and support-weighted averages.

    The macro average runs over predicates that appear in the run at all
    (ground truth or prediction); zero denominators score 0.
    """
    per = {}
    for p in predicates:
        tp, fp, fn = t.counts.get(p, (0, 0, 0))
        if tp + fp + fn == 0:
            continue
        prec, rec = _div(tp, tp + fp), _div(tp, tp + fn)
        per[p] = {
            "precision": prec,
            "recall": rec,
            "f1": f1_from_pr(prec, rec),
            "support": tp + fn,
            "tp": tp,
            "fp": fp,
            "fn": fn,
        }
    n = len(per)
    macro = [_div(sum(r[k] for r in per.values()), n) for k in ("precision", "recall", "f1")]
    total = sum(r["support"] for r in per.values())
    weighted = [_div(sum(r[k] * r["support"] for r in per.values()), total) for k in ("precision", "recall", "f1")]
    return ClassReport(per, *macro, *weighted)


def subset_report(r: ClassReport, predicates: Iterable[str]) -> ClassReport:
    keep = set(predicates)
    t = ConfusionTallies()
    for p, row in r.per_class.items():
        if p in keep:
            t.add(p, row["tp"], row["fp"], row["fn"])
    return report(t, [p for p in r.per_class if p in keep])


def frequency_group(count: int) -> str:
    if count >= HEAD_MIN:
        return "head"
    if count >= BODY_MIN:
        return "body"
    return "tail"


def group_by_frequency(r: ClassReport, train_counts: Mapping[str, int] = PREDICATE_COUNTS) -> dict[str, ClassReport]:
    groups: dict[str, list[str]] = {"head": [], "body": [], "tail": []}
    for p, c in train_counts.items():
        groups[frequency_group(int(c))].append(p)
    return {g: subset_report(r, ps) for g, ps in groups.items()}


def fuse_views(graphs: Sequence[SceneGraph]) -> SceneGraph:
    """Union of triplets detected in any view."""
    if not graphs:
        raise ValueError("need at least one view")
    seen = {}
    for g in graphs:
        for t in g.triplets:
            seen.setdefault(t, None)
    return SceneGraph(graphs[0].timepoint_id, tuple(seen))


def write_report(r: ClassReport, stem: str, extra: dict | None = None) -> None:
    with open(stem + ".csv", "w") as fh:
        fh.write(r.to_csv())
    payload = r.to_json()
    if extra:
        payload.update(extra)
    with open(stem + ".json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
