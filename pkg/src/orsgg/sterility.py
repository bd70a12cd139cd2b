"""Rule-based sterility breach detection over scene graphs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .graph import SceneGraph, Triplet
from .vocab import DEFAULT_VOCAB, VocabSpec

POLICY_VERSION = 1

DEFAULT_STERILE = frozenset(
    {
        "head_surgeon",
        "assistant_surgeon",
        "nurse",
        "instrument",
        "instrument_table",
        "drape",
        "drill",
        "saw",
        "hammer",
    }
)
DEFAULT_NON_STERILE = frozenset(
    {
        "circulator",
        "anaesthetist",
        "mps",
        "student",
        "anesthesia_equipment",
        "mps_station",
        "c_arm",
        "monitor",
    }
)
DEFAULT_CONTACT = frozenset({"touching", "holding", "manipulating"})


@dataclass(frozen=True)
class SterilityPolicy:
    sterile: frozenset = DEFAULT_STERILE
    non_sterile: frozenset = DEFAULT_NON_STERILE
    contact_predicates: frozenset = DEFAULT_CONTACT
    version: int = field(default=POLICY_VERSION)

    def validate(self, v: VocabSpec = DEFAULT_VOCAB) -> None:
        overlap = self.sterile & self.non_sterile
        if overlap:
            raise ValueError(f"entities both sterile and non-sterile: {sorted(overlap)}")
        for e in self.sterile | self.non_sterile:
            if not v.is_entity(e):
                raise ValueError(f"unknown entity in policy: {e!r}")
        for p in self.contact_predicates:
            if not v.is_predicate(p):
                raise ValueError(f"unknown predicate in policy: {p!r}")

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "sterile": sorted(self.sterile),
            "non_sterile": sorted(self.non_sterile),
            "contact_predicates": sorted(self.contact_predicates),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SterilityPolicy":
        if data.get("version", POLICY_VERSION) != POLICY_VERSION:
            raise ValueError(f"unsupported policy version {data.get('version')!r}")
        p = cls(
            frozenset(data["sterile"]),
            frozenset(data["non_sterile"]),
            frozenset(data.get("contact_predicates", DEFAULT_CONTACT)),
        )
        p.validate()
        return p

    @classmethod
    def load(cls, path: str | Path) -> "SterilityPolicy":
        return cls.from_json(json.loads(Path(path).read_text()))


DEFAULT_POLICY = SterilityPolicy()


def is_breach_triplet(t: Triplet, policy: SterilityPolicy = DEFAULT_POLICY) -> bool:
    s, o, p = t
    if p not in policy.contact_predicates:
        return False
    return (s in policy.sterile and o in policy.non_sterile) or (
        s in policy.non_sterile and o in policy.sterile
    )


def detect_breach(g: SceneGraph, policy: SterilityPolicy = DEFAULT_POLICY) -> tuple[bool, list[Triplet]]:
    offending = [t for t in g.triplets if is_breach_triplet(t, policy)]
    return bool(offending), offending
