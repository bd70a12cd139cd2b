"""Per-timepoint multimodal bundles.

A modality field set to ``None`` means the modality is absent for this sample
(dropped by augmentation, disabled in a run, or removed by a test protocol).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .graph import SceneGraph

# Every modality tag, in canonical order. room_images are never dropped.
MODALITIES = (
    "room_images",
    "detail_images",
    "pointcloud",
    "audio",
    "transcript",
    "robot_log",
    "tracker",
    "masks",
)
DROPPABLE = MODALITIES[1:]
TEXT_MODALITIES = ("transcript", "robot_log", "tracker")


@dataclass(frozen=True)
class ModalityBundle:
    room_images: Optional[tuple] = None  # of H x W x 3 float32 arrays
    detail_images: Optional[tuple] = None
    pointcloud: Optional[np.ndarray] = None  # P x 6
    audio: Optional[np.ndarray] = None  # sample_rate samples
    transcript: Optional[tuple] = None  # of (timestamp, sentence)
    robot_log: Optional[dict] = None  # {"phase": ..., "action": ...}
    tracker: Optional[tuple] = None  # of {"tool", "translation", "rotation"}
    masks: Optional[tuple] = None  # of (entity, H x W bool array)

    def present(self) -> tuple[str, ...]:
        return tuple(m for m in MODALITIES if getattr(self, m) is not None)

    def without(self, *tags: str) -> "ModalityBundle":
        for t in tags:
            if t not in MODALITIES:
                raise KeyError(f"unknown modality {t!r}")
        return replace(self, **{t: None for t in tags})

    def with_from(self, other: "ModalityBundle", *tags: str) -> "ModalityBundle":
        return replace(self, **{t: getattr(other, t) for t in tags})


@dataclass(frozen=True)
class TimepointSample:
    timepoint_id: int
    modalities: ModalityBundle
    gt_graph: SceneGraph
    phase: str
    next_action: Optional[str] = None
    breach: bool = False
    scenario_id: int = 0
    t: int = 0

    def labels(self) -> tuple:
        """Everything augmentation must leave untouched."""
        return (self.gt_graph, self.phase, self.next_action, self.breach)


def _value_equal(a, b) -> bool:
    if a is None or b is None:
        return a is b
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        a, b = np.asarray(a), np.asarray(b)
        return a.shape == b.shape and a.dtype == b.dtype and np.array_equal(a, b)
    if isinstance(a, (tuple, list)) and isinstance(b, (tuple, list)):
        return len(a) == len(b) and all(_value_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_value_equal(a[k], b[k]) for k in a)
    return a == b


def bundles_equal(a: ModalityBundle, b: ModalityBundle) -> bool:
    return all(_value_equal(getattr(a, f.name), getattr(b, f.name)) for f in fields(ModalityBundle))


def samples_equal(a: TimepointSample, b: TimepointSample) -> bool:
    return (
        a.timepoint_id == b.timepoint_id
        and a.scenario_id == b.scenario_id
        and a.t == b.t
        and a.labels() == b.labels()
        and a.gt_graph.triplets == b.gt_graph.triplets
        and bundles_equal(a.modalities, b.modalities)
    )
