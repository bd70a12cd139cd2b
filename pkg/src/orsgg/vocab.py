"""Closed operating-room vocabulary: entities, predicates, phases and structural tokens."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

VOCAB_VERSION = 1

ENTITIES = (
    "anaesthetist",
    "anesthesia_equipment",
    "assistant_surgeon",
    "c_arm",
    "circulator",
    "drape",
    "drill",
    "hammer",
    "head_surgeon",
    "instrument",
    "instrument_table",
    "mako_robot",
    "monitor",
    "mps",
    "mps_station",
    "nurse",
    "operating_table",
    "patient",
    "saw",
    "student",
    "tracker",
)

PREDICATES = (
    "assisting",
    "calibrating",
    "cementing",
    "cleaning",
    "close_to",
    "cutting",
    "drilling",
    "hammering",
    "holding",
    "lying_on",
    "manipulating",
    "preparing",
    "sawing",
    "scanning",
    "suturing",
    "touching",
)

PHASES = (
    "idle",
    "robot_calibration",
    "base_array_installation",
    "saw_installation",
    "registration",
    "sawing_execution",
    "implant_placement",
    "closure",
)

# Annotation counts per predicate / entity in the real recordings. Used to
# shape the synthetic long tail and for head/body/tail grouping.
PREDICATE_COUNTS = {
    "assisting": 4635,
    "calibrating": 1721,
    "cementing": 48,
    "cleaning": 113,
    "close_to": 67148,
    "cutting": 123,
    "drilling": 1539,
    "hammering": 269,
    "holding": 23487,
    "lying_on": 45924,
    "manipulating": 14273,
    "preparing": 11681,
    "sawing": 2383,
    "scanning": 69,
    "suturing": 132,
    "touching": 13963,
}

ENTITY_COUNTS = {
    "anaesthetist": 14853,
    "anesthesia_equipment": 4891,
    "assistant_surgeon": 25831,
    "c_arm": 731,
    "circulator": 12225,
    "drape": 31525,
    "drill": 2005,
    "hammer": 401,
    "head_surgeon": 27583,
    "instrument": 17544,
    "instrument_table": 32775,
    "mako_robot": 14062,
    "monitor": 738,
    "mps": 25895,
    "mps_station": 14411,
    "nurse": 39397,
    "operating_table": 30266,
    "patient": 73671,
    "saw": 2874,
    "student": 2432,
    "tracker": 877,
}


@dataclass(frozen=True)
class VocabSpec:
    entities: tuple[str, ...] = ENTITIES
    predicates: tuple[str, ...] = PREDICATES
    start: str = "<s>"
    end: str = "</s>"
    separator: str = ";"
    delimiter: str = ","
    version: int = VOCAB_VERSION
    _entity_index: dict = field(init=False, repr=False, compare=False)
    _predicate_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.entities)) != len(self.entities):
            raise ValueError("duplicate entity labels")
        if len(set(self.predicates)) != len(self.predicates):
            raise ValueError("duplicate predicate labels")
        object.__setattr__(self, "_entity_index", {e: i for i, e in enumerate(self.entities)})
        object.__setattr__(self, "_predicate_index", {p: i for i, p in enumerate(self.predicates)})

    def is_entity(self, name: str) -> bool:
        return name in self._entity_index

    def is_predicate(self, name: str) -> bool:
        return name in self._predicate_index

    def entity_index(self, name: str) -> int:
        return self._entity_index[name]

    def predicate_index(self, name: str) -> int:
        return self._predicate_index[name]

    @property
    def structural(self) -> tuple[str, str, str, str]:
        return (self.start, self.end, self.separator, self.delimiter)

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "entities": list(self.entities),
            "predicates": list(self.predicates),
            "structural": {
                "start": self.start,
                "end": self.end,
                "separator": self.separator,
                "delimiter": self.delimiter,
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "VocabSpec":
        if data.get("version") != VOCAB_VERSION:
            raise ValueError(f"unsupported vocabulary version {data.get('version')!r}")
        s = data["structural"]
        return cls(
            entities=tuple(data["entities"]),
            predicates=tuple(data["predicates"]),
            start=s["start"],
            end=s["end"],
            separator=s["separator"],
            delimiter=s["delimiter"],
        )


def load_vocab(path: str | Path | None = None) -> VocabSpec:
    """Load a vocabulary file; the packaged one when no path is given."""
    if path is None:
        text = resources.files("orsgg").joinpath("data/vocab.json").read_text()
    else:
        text = Path(path).read_text()
    return VocabSpec.from_json(json.loads(text))


DEFAULT_VOCAB = VocabSpec()
