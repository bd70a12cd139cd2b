"""Modality dropping and multimodality mixing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .graph import jaccard
from .sample import DROPPABLE, MODALITIES, TimepointSample

DEFAULT_SWAPPABLE = ("audio", "robot_log", "tracker", "transcript")


@dataclass(frozen=True)
class AugmentConfig:
    drop_prob: float = 0.5
    mix_prob: float = 0.5
    jaccard_threshold: float = 0.5
    swappable: tuple = DEFAULT_SWAPPABLE
    droppable: tuple = DROPPABLE
    seed: int = 0

    def validate(self) -> None:
        for name in ("drop_prob", "mix_prob", "jaccard_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for tag in self.swappable:
            if tag not in MODALITIES:
                raise ValueError(f"unknown swappable modality {tag!r}")
        for tag in self.droppable:
            if tag not in DROPPABLE:
                raise ValueError(f"modality {tag!r} cannot be dropped")

    @classmethod
    def none(cls, **kw) -> "AugmentConfig":
        return cls(drop_prob=0.0, mix_prob=0.0, **kw)


@dataclass
class AuditRecord:
    timepoint_id: int
    dropped: list = field(default_factory=list)
    swapped: list = field(default_factory=list)  # [{"tag", "donor_id", "jaccard"}]

    def to_json_line(self) -> str:
        return json.dumps(
            {"timepoint_id": self.timepoint_id, "dropped": self.dropped, "swapped": self.swapped},
            sort_keys=True,
        )


class CorpusIndex:
    """Ground-truth triplet sets of a corpus with cached neighbour lists."""

    def __init__(self, samples: Sequence[TimepointSample]):
        self.samples = list(samples)
        self.sets = [s.gt_graph.as_set() for s in self.samples]
        self.position = {s.timepoint_id: i for i, s in enumerate(self.samples)}
        self._cache: dict[tuple[int, float], np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.samples)

    def candidates(self, sample: TimepointSample, tau: float) -> np.ndarray:
        """Corpus positions with jaccard >= tau, excluding the sample itself."""
        pos = self.position.get(sample.timepoint_id)
        if pos is not None and self.samples[pos] is sample:
            key = (pos, tau)
            if key not in self._cache:
                self._cache[key] = self._scan(sample, tau, exclude=pos)
            return self._cache[key]
        return self._scan(sample, tau, exclude=pos)

    def _scan(self, sample, tau, exclude) -> np.ndarray:
        target = sample.gt_graph.as_set()
        hits = [
            i
            for i, s in enumerate(self.sets)
            if i != exclude and self.samples[i].timepoint_id != sample.timepoint_id and jaccard(target, s) >= tau
        ]
        return np.asarray(hits, dtype=np.int64)


def drop_modalities(
    sample: TimepointSample, cfg: AugmentConfig, rng: np.random.Generator
) -> tuple[TimepointSample, set]:
    """Independently remove each droppable modality with probability drop_prob.

    One uniform draw is consumed per droppable tag whether or not the
    modality is present, so the stream stays aligned across samples.
    """
    draws = rng.random(len(cfg.droppable))
    dropped = {
        tag
        for tag, u in zip(cfg.droppable, draws)
        if u < cfg.drop_prob and getattr(sample.modalities, tag) is not None
    }
    if not dropped:
        return sample, set()
    return replace(sample, modalities=sample.modalities.without(*sorted(dropped))), dropped


def find_similar(
    sample: TimepointSample, index: CorpusIndex, cfg: AugmentConfig, rng: np.random.Generator
) -> Optional[TimepointSample]:
    cands = index.candidates(sample, cfg.jaccard_threshold)
    if cands.size == 0:
        return None
    return index.samples[int(cands[rng.integers(cands.size)])]


def mix_modalities(
    sample: TimepointSample,
    donor: TimepointSample,
    cfg: AugmentConfig,
    rng: np.random.Generator,
    tags: Optional[Sequence[str]] = None,
) -> tuple[TimepointSample, list[str]]:
    """Replace a random non-empty subset of swappable modalities with the donor's.

    Labels stay the original sample's. Tags the donor lacks are skipped.
    """
    pool = list(cfg.swappable)
    if tags is None:
        if not pool:
            return sample, []
        while True:
            pick = rng.random(len(pool)) < 0.5
            if pick.any():
                break
        tags = [t for t, p in zip(pool, pick) if p]
    usable = [t for t in tags if getattr(donor.modalities, t) is not None]
    if not usable:
        return sample, []
    return replace(sample, modalities=sample.modalities.with_from(donor.modalities, *usable)), usable


def augment(
    sample: TimepointSample,
    index: Optional[CorpusIndex],
    cfg: AugmentConfig,
    rng: np.random.Generator,
) -> tuple[TimepointSample, AuditRecord]:
    """Mix first (when a donor exists), then drop."""
    record = AuditRecord(sample.timepoint_id)
    out = sample
    if index is not None and cfg.mix_prob > 0 and rng.random() < cfg.mix_prob:
        donor = find_similar(sample, index, cfg, rng)
        if donor is not None:
            out, used = mix_modalities(out, donor, cfg, rng)
            j = jaccard(sample.gt_graph, donor.gt_graph)
            record.swapped = [{"tag": t, "donor_id": donor.timepoint_id, "jaccard": j} for t in used]
    if cfg.drop_prob > 0:
        out, dropped = drop_modalities(out, cfg, rng)
        record.dropped = sorted(dropped)
    return out, record


def drop_one(sample: TimepointSample, rng: np.random.Generator, allowed: Sequence[str] = DROPPABLE) -> TimepointSample:
    """Missing-modality test protocol: remove one random present droppable modality."""
    present = [t for t in allowed if getattr(sample.modalities, t) is not None]
    if not present:
        return sample
    tag = present[int(rng.integers(len(present)))]
    return replace(sample, modalities=sample.modalities.without(tag))
