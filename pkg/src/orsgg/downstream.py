"""Scene-graph-only downstream tasks: phase prediction and next-action anticipation."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from .graph import SceneGraph, Triplet
from .rawarray import read_container, write_container
from .sample import TimepointSample
from .vocab import DEFAULT_VOCAB, PHASES, VocabSpec

TASKS = ("phase", "next_action")
NO_ACTION = "none"
DEFAULT_HISTORY = 8


def task_labels(task: str, v: VocabSpec = DEFAULT_VOCAB) -> tuple[str, ...]:
    if task == "phase":
        return tuple(PHASES)
    if task == "next_action":
        return (NO_ACTION,) + tuple(v.predicates)
    raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")


def sample_label(sample: TimepointSample, task: str) -> str:
    if task == "phase":
        return sample.phase
    if task == "next_action":
        return sample.next_action or NO_ACTION
    raise ValueError(f"unknown task {task!r}")


def triplet_enumeration(graphs: Sequence[SceneGraph]) -> tuple[Triplet, ...]:
    """Sorted set of triplets seen in the given (training) graphs."""
    return tuple(sorted({t for g in graphs for t in g.triplets}))


def featurize_history(
    graphs: Sequence[SceneGraph], enumeration: Sequence[Triplet], v: VocabSpec = DEFAULT_VOCAB
) -> np.ndarray:
    """Per window position: triplet indicators over ``enumeration``, then predicate counts.

    Triplets outside the enumeration only show up in the counts.
    """
    if len(graphs) < 1:
        raise ValueError("window length must be >= 1")
    index = {t: i for i, t in enumerate(enumeration)}
    n_e, n_p = len(enumeration), len(v.predicates)
    out = np.zeros((len(graphs), n_e + n_p), dtype=np.float32)
    for row, g in enumerate(graphs):
        for t in g.triplets:
            i = index.get(t)
            if i is not None:
                out[row, i] = 1.0
            out[row, n_e + v.predicate_index(t.predicate)] += 1.0
    return out.reshape(-1)


def history_windows(samples: Sequence[TimepointSample], graphs: Sequence[SceneGraph], w: int) -> list[list[SceneGraph]]:
    """For each sample, its scenario's last ``w`` graphs ending at it, left-padded with empty graphs."""
    by_scen = defaultdict(list)
    for i, s in enumerate(samples):
        by_scen[s.scenario_id].append(i)
    out: list[Optional[list]] = [None] * len(samples)
    for idx in by_scen.values():
        idx.sort(key=lambda i: samples[i].t)
        for pos, i in enumerate(idx):
            window = [graphs[j] for j in idx[max(0, pos - w + 1) : pos + 1]]
            pad = [SceneGraph(-1, ())] * (w - len(window))
            out[i] = pad + window
    return out


@dataclass(frozen=True)
class ClassifierConfig:
    history: int = DEFAULT_HISTORY
    hidden: int = 64
    epochs: int = 200
    lr: float = 1e-2
    weight_decay: float = 0.0
    seed: int = 0


class TaskClassifier(nn.Module):
    def __init__(self, task: str, enumeration: Sequence[Triplet], config: ClassifierConfig, v: VocabSpec = DEFAULT_VOCAB):
        super().__init__()
        self.task = task
        self.labels = task_labels(task, v)
        self.enumeration = tuple(Triplet(*t) for t in enumeration)
        self.config = config
        self.vocab = v
        self.dim = config.history * (len(self.enumeration) + len(v.predicates))
        self.net = nn.Sequential(nn.Linear(self.dim, config.hidden), nn.ReLU(), nn.Linear(config.hidden, len(self.labels)))

    def features(self, windows: Sequence[Sequence[SceneGraph]]) -> torch.Tensor:
        rows = [featurize_history(w, self.enumeration, self.vocab) for w in windows]
        return torch.from_numpy(np.stack(rows)) if rows else torch.zeros(0, self.dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.dim:
            raise ValueError(f"feature dimension {x.shape[-1]} does not match classifier ({self.dim})")
        return self.net(x)


def train_task_classifier(
    samples: Sequence[TimepointSample],
    task: str,
    config: ClassifierConfig = ClassifierConfig(),
    graphs: Optional[Sequence[SceneGraph]] = None,
) -> TaskClassifier:
    """Full-batch training on ground-truth graph windows (or ``graphs`` if given)."""
    if not samples:
        raise ValueError("downstream training set is empty")
    graphs = [s.gt_graph for s in samples] if graphs is None else list(graphs)
    torch.use_deterministic_algorithms(True)
    torch.manual_seed(config.seed)
    clf = TaskClassifier(task, triplet_enumeration(graphs), config)
    x = clf.features(history_windows(samples, graphs, config.history))
    y = torch.as_tensor([clf.labels.index(sample_label(s, task)) for s in samples])
    opt = torch.optim.Adam(clf.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    for _ in range(config.epochs):
        loss = nn.functional.cross_entropy(clf(x), y)
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
    clf.eval()
    return clf


@torch.no_grad()
def predict_task(clf: TaskClassifier, windows: Sequence[Sequence[SceneGraph]]) -> list[str]:
    """Argmax label per window; ties go to the earlier label (torch argmax returns the first maximum)."""
    for w in windows:
        if len(w) != clf.config.history:
            raise ValueError(f"window length {len(w)} does not match classifier history {clf.config.history}")
    if not windows:
        return []
    logits = clf(clf.features(windows))
    return [clf.labels[int(i)] for i in logits.argmax(dim=-1)]


def predict_samples(clf: TaskClassifier, samples: Sequence[TimepointSample], graphs: Sequence[SceneGraph]) -> list[str]:
    return predict_task(clf, history_windows(samples, graphs, clf.config.history))


def save_classifier(clf: TaskClassifier, path: str | Path) -> Path:
    header = {
        "kind": "task_classifier",
        "version": 1,
        "task": clf.task,
        "labels": list(clf.labels),
        "enumeration": [list(t) for t in clf.enumeration],
        "config": clf.config.__dict__,
    }
    arrays = [(n, p.detach().numpy()) for n, p in clf.named_parameters()]
    return write_container(path, header, arrays)


def load_classifier(path: str | Path) -> TaskClassifier:
    header, arrays = read_container(path)
    if header.get("kind") != "task_classifier":
        raise ValueError(f"{path}: not a task classifier")
    clf = TaskClassifier(header["task"], header["enumeration"], ClassifierConfig(**header["config"]))
    if list(clf.labels) != header["labels"]:
        raise ValueError(f"{path}: label set differs from this build")
    with torch.no_grad():
        for n, p in clf.named_parameters():
            p.copy_(torch.from_numpy(arrays[n].copy()))
    clf.eval()
    return clf
