"""Ablation cells and grids: train, evaluate, aggregate over seeds."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .augment import AugmentConfig, drop_one
from .graph import SceneGraph
from .metrics import ClassReport, fuse_views, report, subset_report, tally_all
from .model import ModelConfig
from .sample import DROPPABLE, MODALITIES, TimepointSample
from .synth.dataset import DatasetConfig, generate_corpus, split_scenarios
from .synth.world import EXCLUSIVE
from .memory import DEFAULT_WINDOW
from .training import TrainSchedule, TrainState, generate, init_model, restrict, train

log = logging.getLogger(__name__)

TAGGED = tuple(sorted(EXCLUSIVE))

# Modality stack-up, cumulative in the order of the ablation table columns.
STACKUP = (
    ("room", ("room_images",)),
    ("+detail", ("room_images", "detail_images")),
    ("+pc", ("room_images", "detail_images", "pointcloud")),
    ("+audio+speech", ("room_images", "detail_images", "pointcloud", "audio", "transcript")),
    ("+robot+tracker", ("room_images", "detail_images", "pointcloud", "audio", "transcript", "robot_log", "tracker")),
    ("+masks", MODALITIES),
)


@dataclass(frozen=True)
class Cell:
    name: str
    enabled: tuple = MODALITIES
    augment: AugmentConfig = field(default_factory=AugmentConfig.none)
    memory: bool = False


@dataclass
class CellResult:
    name: str
    seed: int
    report: ClassReport
    tagged: ClassReport
    seconds: float
    final_loss: float

    @property
    def macro_f1(self) -> float:
        return self.report.macro_f1

    @property
    def tagged_f1(self) -> float:
        return self.tagged.macro_f1


def corpus_splits(cfg: DatasetConfig) -> dict[str, list[TimepointSample]]:
    """Generate a corpus in memory and split it by scenario, as ``gen-data`` would."""
    _, samples = generate_corpus(cfg)
    splits = split_scenarios(cfg.n_scenarios, cfg.seed, cfg.split_fractions)
    return {name: [s for s in samples if s.scenario_id in set(ids)] for name, ids in splits.items()}


def missing_modality(
    samples: Sequence[TimepointSample], seed: int, allowed: Sequence[str] = DROPPABLE
) -> list[TimepointSample]:
    """Test protocol: each sample loses one random present modality."""
    out = []
    for s in samples:
        rng = np.random.default_rng([seed, s.timepoint_id, 0xD20])
        out.append(drop_one(s, rng, allowed))
    return out


def evaluate_graphs(preds: Sequence[SceneGraph], samples: Sequence[TimepointSample]) -> ClassReport:
    return report(tally_all(preds, [s.gt_graph for s in samples]))


def train_cell(
    cell: Cell,
    train_set: Sequence[TimepointSample],
    model_config: ModelConfig,
    schedule: TrainSchedule,
    seed: int,
) -> TrainState:
    cfg = replace(model_config, seed=seed)
    sched = replace(schedule, seed=seed, memory_steps=schedule.memory_steps if cell.memory else 0)
    state = init_model(cfg, sched.lr)
    return train(state, train_set, replace(cell.augment, seed=seed), sched, enabled=cell.enabled)


def score_cell(
    state: TrainState,
    cell: Cell,
    test_set: Sequence[TimepointSample],
    seed: int,
    protocol: str = "full",
    memory_k: int = DEFAULT_WINDOW,
) -> tuple[ClassReport, ClassReport]:
    """Overall and tagged-predicate reports on ``test_set``.

    ``protocol`` is "full" (test samples as given, minus switched-off
    modalities) or "missing" (one random enabled modality removed per sample,
    with the removal stream shared by all cells at the same seed).
    """
    test = [restrict(s, cell.enabled) for s in test_set]
    if protocol == "missing":
        test = missing_modality(test, seed)
    elif protocol != "full":
        raise ValueError(f"unknown protocol {protocol!r}")
    preds = generate(state.model, test, use_memory=cell.memory, memory_k=memory_k)
    r = evaluate_graphs(preds, test)
    return r, subset_report(r, TAGGED)


def run_cell(
    cell: Cell,
    train_set: Sequence[TimepointSample],
    test_set: Sequence[TimepointSample],
    model_config: ModelConfig,
    schedule: TrainSchedule,
    seed: int,
    protocol: str = "full",
) -> CellResult:
    """Train one cell at one seed and score it on ``test_set``."""
    t0 = time.perf_counter()
    state = train_cell(cell, train_set, model_config, schedule, seed)
    r, tagged = score_cell(state, cell, test_set, seed, protocol, schedule.memory_k)
    dt = time.perf_counter() - t0
    log.info("cell %s seed %d: macro %.4f tagged %.4f (%.0fs)", cell.name, seed, r.macro_f1, tagged.macro_f1, dt)
    return CellResult(cell.name, seed, r, tagged, dt, state.losses[-1] if state.losses else float("nan"))


class GridRunner:
    """Trains each distinct (modalities, augmentation, memory, seed) once.

    Cells that share training settings, or one cell scored under several
    protocols, reuse the same trained model.
    """

    def __init__(self, train_set, test_set, model_config: ModelConfig, schedule: TrainSchedule):
        self.train_set = list(train_set)
        self.test_set = list(test_set)
        self.model_config = model_config
        self.schedule = schedule
        self.states: dict = {}
        self.seconds: dict = {}
        self.results: dict = {}

    def _key(self, cell: Cell, seed: int) -> tuple:
        return (tuple(cell.enabled), cell.augment, cell.memory, seed)

    def state(self, cell: Cell, seed: int) -> TrainState:
        key = self._key(cell, seed)
        if key not in self.states:
            t0 = time.perf_counter()
            self.states[key] = train_cell(cell, self.train_set, self.model_config, self.schedule, seed)
            self.seconds[key] = time.perf_counter() - t0
        return self.states[key]

    def result(self, cell: Cell, seed: int, protocol: str) -> CellResult:
        key = self._key(cell, seed) + (protocol,)
        if key not in self.results:
            st = self.state(cell, seed)
            t0 = time.perf_counter()
            r, tagged = score_cell(st, cell, self.test_set, seed, protocol, self.schedule.memory_k)
            dt = self.seconds[self._key(cell, seed)] + time.perf_counter() - t0
            log.info("cell %s seed %d [%s]: macro %.4f tagged %.4f", cell.name, seed, protocol, r.macro_f1, tagged.macro_f1)
            self.results[key] = CellResult(cell.name, seed, r, tagged, dt, st.losses[-1] if st.losses else float("nan"))
        return replace(self.results[key], name=cell.name)

    def grid(self, cells: Sequence[Cell], seeds: Sequence[int], protocol: str = "full") -> dict[str, list[CellResult]]:
        return {c.name: [self.result(c, s, protocol) for s in seeds] for c in cells}


def run_grid(
    cells: Sequence[Cell],
    seeds: Sequence[int],
    train_set: Sequence[TimepointSample],
    test_set: Sequence[TimepointSample],
    model_config: ModelConfig,
    schedule: TrainSchedule,
    protocol: str = "full",
) -> dict[str, list[CellResult]]:
    """Every cell at every seed; equal training settings share one run."""
    return GridRunner(train_set, test_set, model_config, schedule).grid(cells, seeds, protocol)


def summarize(results: dict[str, list[CellResult]]) -> list[dict]:
    rows = []
    for name, runs in results.items():
        macro = np.array([r.macro_f1 for r in runs])
        tagged = np.array([r.tagged_f1 for r in runs])
        rows.append(
            {
                "cell": name,
                "n_seeds": len(runs),
                "macro_f1_mean": float(macro.mean()),
                "macro_f1_std": float(macro.std(ddof=0)),
                "tagged_f1_mean": float(tagged.mean()),
                "tagged_f1_std": float(tagged.std(ddof=0)),
            }
        )
    return rows


def summary_csv(rows: Iterable[dict]) -> str:
    rows = list(rows)
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def modality_cells(stack: Sequence = STACKUP) -> list[Cell]:
    return [Cell(name, tuple(mods)) for name, mods in stack]


def augmentation_cells(drop_prob: float = 0.5, base: Optional[AugmentConfig] = None) -> list[Cell]:
    base = base or AugmentConfig()
    return [
        Cell("none", augment=replace(base, drop_prob=0.0, mix_prob=0.0)),
        Cell("drop", augment=replace(base, drop_prob=drop_prob, mix_prob=0.0)),
        Cell("drop+mix", augment=replace(base, drop_prob=drop_prob)),
    ]


def drop_sweep_cells(probs: Sequence[float] = (0.0, 0.25, 0.5, 0.75), base: Optional[AugmentConfig] = None) -> list[Cell]:
    base = base or AugmentConfig()
    return [Cell(f"drop={p:g}", augment=replace(base, drop_prob=p, mix_prob=0.0)) for p in probs]


def per_view_samples(samples: Sequence[TimepointSample], view: int) -> list[TimepointSample]:
    out = []
    for s in samples:
        room = s.modalities.room_images
        if room is None or view >= len(room):
            raise ValueError(f"sample {s.timepoint_id} has no room view {view}")
        out.append(replace(s, modalities=replace(s.modalities, room_images=(room[view],))))
    return out


def predict(
    model, samples: Sequence[TimepointSample], use_memory: bool = False, views: str = "joint", batch_size: int = 64
) -> list[SceneGraph]:
    """Graphs from one joint pass over all cameras, or one pass per room camera fused by union."""
    if views == "joint":
        return generate(model, samples, use_memory=use_memory, batch_size=batch_size)
    if views != "per_view":
        raise ValueError(f"unknown view mode {views!r}")
    n_views = min(len(s.modalities.room_images or ()) for s in samples) if samples else 0
    per = [generate(model, per_view_samples(samples, v), use_memory=use_memory, batch_size=batch_size) for v in range(n_views)]
    return [fuse_views([p[i] for p in per]) for i in range(len(samples))]
