"""Scene graph data model and the triplet text grammar."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

from .vocab import DEFAULT_VOCAB, VocabSpec

MAX_TRIPLETS = 64


class Triplet(NamedTuple):
    subject: str
    object: str
    predicate: str


@dataclass(frozen=True, eq=False)
class SceneGraph:
    """Triplets at one timepoint.

    Order is insertion order (used for serialization); equality and hashing
    use set semantics over the triplets.
    """

    timepoint_id: int = 0
    triplets: tuple[Triplet, ...] = ()

    @classmethod
    def from_triplets(cls, triplets: Iterable, timepoint_id: int = 0) -> "SceneGraph":
        seen: dict[Triplet, None] = {}
        for t in triplets:
            seen.setdefault(Triplet(*t), None)
        return cls(timepoint_id, tuple(seen))

    def as_set(self) -> frozenset[Triplet]:
        return frozenset(self.triplets)

    def __eq__(self, other):
        if not isinstance(other, SceneGraph):
            return NotImplemented
        return self.timepoint_id == other.timepoint_id and self.as_set() == other.as_set()

    def __hash__(self):
        return hash((self.timepoint_id, self.as_set()))

    def __len__(self):
        return len(self.triplets)

    def __iter__(self):
        return iter(self.triplets)

    def __contains__(self, item):
        return Triplet(*item) in self.as_set()

    def nodes(self) -> set[str]:
        out = set()
        for s, o, _ in self.triplets:
            out.add(s)
            out.add(o)
        return out

    def to_json(self) -> dict:
        return {"timepoint_id": self.timepoint_id, "triplets": [list(t) for t in self.triplets]}

    @classmethod
    def from_json(cls, data: dict) -> "SceneGraph":
        return cls(int(data["timepoint_id"]), tuple(Triplet(*t) for t in data["triplets"]))


def validate_graph(g: SceneGraph, v: VocabSpec = DEFAULT_VOCAB) -> list[str]:
    """Return human-readable invariant violations; empty when the graph is valid."""
    problems = []
    if g.timepoint_id < 0:
        problems.append(f"negative timepoint_id {g.timepoint_id}")
    if len(g.triplets) > MAX_TRIPLETS:
        problems.append(f"too many triplets: {len(g.triplets)} > {MAX_TRIPLETS}")
    seen = set()
    for t in g.triplets:
        if len(t) != 3:
            problems.append(f"malformed triplet {t!r}")
            continue
        s, o, p = t
        if not v.is_entity(s):
            problems.append(f"unknown entity {s!r} in {tuple(t)}")
        if not v.is_entity(o):
            problems.append(f"unknown entity {o!r} in {tuple(t)}")
        if not v.is_predicate(p):
            problems.append(f"unknown predicate {p!r} in {tuple(t)}")
        if s == o:
            problems.append(f"self-loop {tuple(t)}")
        key = tuple(t)
        if key in seen:
            problems.append(f"duplicate triplet {key}")
        seen.add(key)
    return problems


def serialize_triplets(g: SceneGraph, v: VocabSpec = DEFAULT_VOCAB) -> str:
    problems = validate_graph(g, v)
    if problems:
        raise ValueError(f"invalid scene graph: {problems[0]}")
    return " ".join(
        f"{s}{v.delimiter}{o}{v.delimiter}{p}{v.separator}" for s, o, p in g.triplets
    )


def parse_triplets(
    text: str | bytes, v: VocabSpec = DEFAULT_VOCAB, timepoint_id: int = 0
) -> tuple[SceneGraph, list[str]]:
    """Tolerant inverse of :func:`serialize_triplets`.

    Fragments are separator-delimited. Blank fragments are ignored, well-formed
    in-vocabulary ones become triplets (first occurrence wins), and anything
    else is returned stripped in ``rejected``.
    """
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    accepted: dict[Triplet, None] = {}
    rejected = []
    for raw in text.split(v.separator):
        frag = raw.strip()
        if not frag:
            continue
        parts = [p.strip() for p in frag.split(v.delimiter)]
        if (
            len(parts) == 3
            and v.is_entity(parts[0])
            and v.is_entity(parts[1])
            and v.is_predicate(parts[2])
            and parts[0] != parts[1]
        ):
            accepted.setdefault(Triplet(*parts), None)
        else:
            rejected.append(frag)
    return SceneGraph(timepoint_id, tuple(accepted)), rejected


def jaccard(a: SceneGraph | Iterable, b: SceneGraph | Iterable) -> float:
    sa = a.as_set() if isinstance(a, SceneGraph) else frozenset(a)
    sb = b.as_set() if isinstance(b, SceneGraph) else frozenset(b)
    union = sa | sb
    if not union:
        return 1.0
    return len(sa & sb) / len(union)


def write_graphs_jsonl(graphs: Iterable[SceneGraph], path: str | Path) -> None:
    with open(path, "w") as fh:
        for g in graphs:
            fh.write(json.dumps(g.to_json()) + "\n")


def read_graphs_jsonl(path: str | Path) -> list[SceneGraph]:
    with open(path) as fh:
        return [SceneGraph.from_json(json.loads(line)) for line in fh if line.strip()]
