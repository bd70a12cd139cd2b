"""Phase-structured scenario scripts."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..graph import SceneGraph, Triplet
from ..vocab import PHASES, PREDICATE_COUNTS
from . import world


@dataclass(frozen=True)
class SynthConfig:
    total_timepoints: int = 96
    n_phases: int = 8
    height: int = 64
    width: int = 64
    n_room_views: int = 3
    n_detail_views: int = 1
    n_points: int = 1024
    sample_rate: int = 4000
    max_masks: int = 16
    breach_rate: float = 0.03
    # Sampling weight of an action is max(count ** skew, floor * max_weight)
    # where count is the real annotation count of its predicate.
    skew: float = 1.0
    tail_floor: float = 0.02
    action_min_len: int = 2
    action_max_len: int = 6
    idle_gap_prob: float = 0.25
    speech_prob: float = 0.8
    chatter_rate: float = 0.1
    image_noise: float = 0.02
    position_jitter: float = 0.03
    layout_jitter: float = 0.15
    audio_noise: float = 0.02
    version: int = 1

    def validate(self) -> None:
        if not 1 <= self.n_phases <= len(PHASES):
            raise ValueError(f"n_phases must be in [1, {len(PHASES)}]")
        if self.total_timepoints < self.n_phases:
            raise ValueError("total_timepoints must be >= number of phases")
        if not 2 <= self.n_room_views <= 5:
            raise ValueError("n_room_views must be in [2, 5]")
        if not 0 <= self.n_detail_views <= 3:
            raise ValueError("n_detail_views must be in [0, 3]")
        if self.height < 8 or self.width < 8 or self.n_points < 1 or self.sample_rate < 64:
            raise ValueError("resolution settings too small")
        for name in ("breach_rate", "idle_gap_prob", "speech_prob", "chatter_rate", "tail_floor"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 1 <= self.action_min_len <= self.action_max_len:
            raise ValueError("need 1 <= action_min_len <= action_max_len")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "SynthConfig":
        return cls(**data)


@dataclass(frozen=True)
class Action:
    start: int
    end: int  # exclusive
    triplets: tuple[Triplet, ...]

    @property
    def predicate(self) -> str:
        return self.triplets[0].predicate


@dataclass(frozen=True)
class ScenarioScript:
    seed: int
    phases: tuple[tuple[str, int], ...]
    actions: tuple[Action, ...]
    breach_events: tuple[tuple[int, Triplet], ...]
    speech: tuple[tuple[float, str], ...]
    layout: dict = field(compare=False, repr=False)
    exclusive: dict = field(default_factory=lambda: dict(world.EXCLUSIVE))

    @property
    def length(self) -> int:
        return sum(d for _, d in self.phases)

    def phase_at(self, t: int) -> str:
        self._check(t)
        acc = 0
        for name, d in self.phases:
            acc += d
            if t < acc:
                return name
        raise AssertionError("unreachable")

    def phase_bounds(self) -> list[tuple[str, int, int]]:
        out, acc = [], 0
        for name, d in self.phases:
            out.append((name, acc, acc + d))
            acc += d
        return out

    def active_actions(self, t: int) -> list[Action]:
        return [a for a in self.actions if a.start <= t < a.end]

    def graph_at(self, t: int, timepoint_id: Optional[int] = None) -> SceneGraph:
        phase = self.phase_at(t)
        trips = [Triplet(*s) for s in world.PHASE_TABLE[phase]["static"]]
        for a in self.active_actions(t):
            trips.extend(a.triplets)
        trips.extend(tr for bt, tr in self.breach_events if bt == t)
        return SceneGraph.from_triplets(trips, t if timepoint_id is None else timepoint_id)

    def next_action(self, t: int) -> Optional[str]:
        upcoming = [a for a in self.actions if a.start > t]
        if not upcoming:
            return None
        first = min(upcoming, key=lambda a: (a.start, self.actions.index(a)))
        return first.predicate

    def _check(self, t: int) -> None:
        if not 0 <= t < self.length:
            raise IndexError(f"timepoint {t} outside script of length {self.length}")


def predicate_weights(config: SynthConfig) -> dict[str, float]:
    raw = {p: float(c) ** config.skew for p, c in PREDICATE_COUNTS.items()}
    action_preds = {
        tr[0][2] for spec in world.PHASE_TABLE.values() for _, tr in spec["actions"]
    }
    top = max(raw[p] for p in action_preds)
    return {p: max(w, config.tail_floor * top) for p, w in raw.items()}


def _pick_phases(config: SynthConfig, rng: np.random.Generator) -> list[str]:
    if config.n_phases == len(PHASES):
        return list(PHASES)
    # Keep the canonical order; always open with idle.
    rest = sorted(rng.choice(np.arange(1, len(PHASES)), config.n_phases - 1, replace=False))
    return [PHASES[0]] + [PHASES[i] for i in rest]


def _durations(total: int, n: int, rng: np.random.Generator) -> list[int]:
    """Split ``total`` into ``n`` phase lengths >= 1 of comparable size."""
    share = rng.dirichlet(np.full(n, 6.0))
    extra = total - n
    base = np.floor(share * extra).astype(int)
    rem = extra - int(base.sum())
    base[np.argsort(-(share * extra - base), kind="stable")[:rem]] += 1
    return [int(d) + 1 for d in base]


def generate_scenario(config: SynthConfig, seed: int) -> ScenarioScript:
    config.validate()
    rng = np.random.default_rng([int(seed), 0x5C])
    names = _pick_phases(config, rng)
    durations = _durations(config.total_timepoints, len(names), rng)
    weights = predicate_weights(config)

    actions: list[Action] = []
    speech: list[tuple[float, str]] = []
    start = 0
    for name, dur in zip(names, durations):
        end = start + dur
        pool = world.PHASE_TABLE[name]["actions"]
        for track in sorted({tr for tr, _ in pool}):
            options = [deltas for tr, deltas in pool if tr == track]
            w = np.array([weights[d[0][2]] for d in options])
            w = w / w.sum()
            t = start
            while t < end:
                if rng.random() < config.idle_gap_prob:
                    t += 1
                    continue
                deltas = options[rng.choice(len(options), p=w)]
                length = int(rng.integers(config.action_min_len, config.action_max_len + 1))
                a = Action(t, min(t + length, end), tuple(Triplet(*d) for d in deltas))
                actions.append(a)
                pred = a.predicate
                if pred in world.SPEECH and rng.random() < config.speech_prob:
                    lines = world.SPEECH[pred]
                    speech.append((t + float(rng.random()), lines[rng.integers(len(lines))]))
                t = a.end
        start = end
    actions.sort(key=lambda a: (a.start, a.triplets))

    total = config.total_timepoints
    for t in range(total):
        if rng.random() < config.chatter_rate:
            speech.append((t + float(rng.random()), world.CHATTER[rng.integers(len(world.CHATTER))]))
    speech.sort(key=lambda s: s[0])

    breaches = []
    bounds = []
    acc = 0
    for name, d in zip(names, durations):
        bounds.append((name, acc, acc + d))
        acc += d
    for t in range(total):
        phase = next(n for n, a, b in bounds if a <= t < b)
        if phase != "idle" and config.breach_rate > 0 and rng.random() < config.breach_rate:
            tmpl = world.BREACH_TEMPLATES[rng.integers(len(world.BREACH_TEMPLATES))]
            breaches.append((t, Triplet(*tmpl)))

    # Per-scenario layout offsets keep room geometry varied across takes.
    layout = {
        e: tuple(float(x) for x in rng.normal(0.0, config.layout_jitter, size=2))
        for e in world.ANCHORS
    }
    return ScenarioScript(
        seed=int(seed),
        phases=tuple(zip(names, durations)),
        actions=tuple(actions),
        breach_events=tuple(breaches),
        speech=tuple(speech),
        layout=layout,
    )
