"""Static description of the synthetic operating room.

Phase tables list the entities on stage, the relations that hold for the whole
phase, and the pool of scheduled actions. Each action is a triplet delta that
is active over an interval.
"""

from __future__ import annotations

from ..vocab import ENTITIES

LYING = ("patient", "operating_table", "lying_on")

# Nominal floor positions (x, y in metres, room is 4 x 4) and heights.
ANCHORS = {
    "anaesthetist": (0.6, 3.2, 1.7),
    "anesthesia_equipment": (0.4, 3.6, 1.2),
    "assistant_surgeon": (2.6, 1.4, 1.7),
    "c_arm": (3.4, 3.4, 1.8),
    "circulator": (3.4, 0.6, 1.7),
    "drape": (2.0, 2.3, 1.0),
    "drill": (2.3, 1.9, 1.1),
    "hammer": (1.7, 1.9, 1.1),
    "head_surgeon": (1.4, 1.4, 1.7),
    "instrument": (2.0, 1.8, 1.1),
    "instrument_table": (3.2, 1.8, 0.9),
    "mako_robot": (1.0, 2.4, 1.4),
    "monitor": (0.4, 0.6, 1.6),
    "mps": (0.6, 1.6, 1.7),
    "mps_station": (0.4, 1.1, 1.2),
    "nurse": (3.0, 1.3, 1.7),
    "operating_table": (2.0, 2.4, 0.9),
    "patient": (2.0, 2.4, 1.0),
    "saw": (2.2, 2.0, 1.1),
    "student": (3.5, 3.0, 1.7),
    "tracker": (1.5, 2.2, 1.2),
}

# Glyph half-size in pixels at 64 px resolution.
GLYPH_SIZE = {
    "operating_table": 6,
    "patient": 4,
    "instrument_table": 5,
    "mako_robot": 5,
    "c_arm": 5,
    "anesthesia_equipment": 4,
    "mps_station": 4,
    "drape": 3,
    "monitor": 3,
}
DEFAULT_GLYPH = 2

# Draw order: large furniture first so people and tools stay visible.
DRAW_ORDER = sorted(ENTITIES, key=lambda e: (-GLYPH_SIZE.get(e, DEFAULT_GLYPH), ENTITIES.index(e)))


def _palette(n: int) -> dict:
    import colorsys

    out = {}
    for i, e in enumerate(ENTITIES):
        h = (i * 0.61803398875) % 1.0
        s = 0.55 + 0.4 * ((i * 7) % 5) / 4
        v = 0.6 + 0.4 * ((i * 3) % 4) / 3
        out[e] = colorsys.hsv_to_rgb(h, s, v)
    return out


ENTITY_COLOR = _palette(len(ENTITIES))

# Visual class of each action predicate: the colour of the interaction stripe.
# Confusable pairs share a class so images cannot separate them.
VISUAL_CLASS = {
    "assisting": 0,
    "calibrating": 1,
    "manipulating": 1,
    "cementing": 2,
    "cleaning": 3,
    "cutting": 4,
    "drilling": 5,
    "hammering": 5,
    "holding": 6,
    "preparing": 7,
    "sawing": 8,
    "scanning": 9,
    "suturing": 10,
    "touching": 11,
}
STRIPE_COLOR = {
    c: ((0.15 + 0.07 * c) % 1.0, (0.9 - 0.06 * c) % 1.0, (0.35 + 0.13 * c) % 1.0)
    for c in set(VISUAL_CLASS.values())
}

# Predicates whose identity only one non-visual modality reveals.
EXCLUSIVE = {"hammering": "audio", "drilling": "audio", "calibrating": "robot_log"}

# Audio signature kinds.
AUDIO_SIGNATURE = {
    "hammering": ("impulse", 8.0),  # impulses per second
    "drilling": ("tone", 220.0),  # Hz
    "sawing": ("tone", 640.0),
}

# Robot log action strings; the default is "standby".
ROBOT_ACTION = {
    ("mps", "mako_robot", "calibrating"): "calibrate_array",
    ("mps", "mako_robot", "manipulating"): "standby",
    ("mps", "tracker", "scanning"): "register_points",
    ("head_surgeon", "patient", "sawing"): "cut_monitor",
    ("mps", "mps_station", "manipulating"): "plan_review",
}

# Spoken templates per action; tagged predicates are deliberately silent.
SPEECH = {
    "assisting": ["retract here please", "hold the leg steady"],
    "cementing": ["mix the cement now", "cement is ready"],
    "cleaning": ["clean this instrument", "wipe the tray"],
    "cutting": ["scalpel please", "making the incision"],
    "holding": ["give me that", "take this one"],
    "manipulating": ["move the arm back", "adjust the screen"],
    "preparing": ["prepare the next tray", "set up the instruments"],
    "sawing": ["hand me the saw", "starting the cut"],
    "scanning": ["collect the points", "touch the landmarks"],
    "suturing": ["suture please", "closing the wound"],
    "touching": ["feel the bone here", "check the joint"],
}
CHATTER = [
    "how is the patient doing",
    "can you adjust the light",
    "blood pressure is stable",
    "we are on schedule",
    "thank you",
    "next step please",
]

# Tools reported by the infrared tracker per phase.
TRACKED_TOOLS = {
    "idle": (),
    "robot_calibration": ("tracker",),
    "base_array_installation": ("drill", "tracker"),
    "saw_installation": ("saw",),
    "registration": ("tracker",),
    "sawing_execution": ("saw",),
    "implant_placement": ("hammer",),
    "closure": (),
}

# phase -> (entities on stage, static relations, action pool)
# action pool entries: (track, (delta triplets, ...)); the first triplet's
# predicate drives the sampling weight.
_BASE_STAFF = ("patient", "operating_table", "nurse", "instrument_table", "anaesthetist", "anesthesia_equipment", "circulator")
_BASE_STATIC = (
    LYING,
    ("nurse", "instrument_table", "close_to"),
    ("anaesthetist", "anesthesia_equipment", "close_to"),
    ("anaesthetist", "patient", "close_to"),
)
_SURGICAL_STATIC = _BASE_STATIC + (
    ("head_surgeon", "patient", "close_to"),
    ("assistant_surgeon", "patient", "close_to"),
    ("drape", "patient", "close_to"),
)
_SURGICAL_STAFF = _BASE_STAFF + ("head_surgeon", "assistant_surgeon", "drape", "instrument")

PHASE_TABLE = {
    "idle": {
        "entities": _BASE_STAFF + ("monitor",),
        "static": _BASE_STATIC,
        "actions": (),
    },
    "robot_calibration": {
        "entities": _BASE_STAFF + ("mps", "mako_robot", "mps_station", "tracker", "head_surgeon"),
        "static": _BASE_STATIC + (("mps", "mako_robot", "close_to"), ("mps_station", "mako_robot", "close_to")),
        "actions": (
            ("robot", (("mps", "mako_robot", "calibrating"),)),
            ("robot", (("mps", "mako_robot", "manipulating"),)),
            ("robot", (("mps", "mps_station", "manipulating"),)),
            ("staff", (("nurse", "instrument_table", "preparing"),)),
            ("staff", (("nurse", "instrument_table", "cleaning"),)),
        ),
    },
    "base_array_installation": {
        "entities": _SURGICAL_STAFF + ("drill", "mps", "mako_robot"),
        "static": _SURGICAL_STATIC + (("mps", "mako_robot", "close_to"),),
        "actions": (
            ("surgeon", (("head_surgeon", "instrument", "drilling"),)),
            ("surgeon", (("head_surgeon", "instrument", "hammering"),)),
            ("surgeon", (("head_surgeon", "patient", "cutting"),)),
            ("surgeon", (("head_surgeon", "patient", "touching"),)),
            ("surgeon", (("head_surgeon", "drill", "holding"),)),
            ("staff", (("assistant_surgeon", "head_surgeon", "assisting"),)),
            ("staff", (("nurse", "instrument", "holding"),)),
            ("staff", (("assistant_surgeon", "patient", "touching"),)),
        ),
    },
    "saw_installation": {
        "entities": _SURGICAL_STAFF + ("saw", "mps", "mako_robot", "mps_station"),
        "static": _SURGICAL_STATIC + (("mps", "mako_robot", "close_to"),),
        "actions": (
            ("robot", (("mps", "mako_robot", "manipulating"),)),
            ("robot", (("head_surgeon", "mako_robot", "manipulating"),)),
            ("robot", (("mps", "mako_robot", "calibrating"),)),
            ("surgeon", (("head_surgeon", "saw", "holding"),)),
            ("staff", (("nurse", "instrument_table", "preparing"),)),
            ("staff", (("nurse", "instrument", "holding"),)),
        ),
    },
    "registration": {
        "entities": _SURGICAL_STAFF + ("mps", "mako_robot", "mps_station", "tracker", "monitor"),
        "static": _SURGICAL_STATIC + (("mps", "mps_station", "close_to"),),
        "actions": (
            ("robot", (("mps", "tracker", "scanning"),)),
            ("robot", (("mps", "mps_station", "manipulating"),)),
            ("robot", (("mps", "mako_robot", "calibrating"),)),
            ("surgeon", (("head_surgeon", "patient", "touching"),)),
            ("staff", (("assistant_surgeon", "head_surgeon", "assisting"),)),
        ),
    },
    "sawing_execution": {
        "entities": _SURGICAL_STAFF + ("saw", "mako_robot", "mps", "mps_station"),
        "static": _SURGICAL_STATIC + (("head_surgeon", "mako_robot", "close_to"),),
        "actions": (
            ("surgeon", (("head_surgeon", "patient", "sawing"), ("head_surgeon", "saw", "holding"))),
            ("surgeon", (("head_surgeon", "saw", "holding"),)),
            ("surgeon", (("head_surgeon", "patient", "touching"),)),
            ("staff", (("assistant_surgeon", "head_surgeon", "assisting"),)),
            ("staff", (("assistant_surgeon", "patient", "holding"),)),
        ),
    },
    "implant_placement": {
        "entities": _SURGICAL_STAFF + ("hammer", "c_arm", "student"),
        "static": _SURGICAL_STATIC + (("student", "c_arm", "close_to"),),
        "actions": (
            ("surgeon", (("head_surgeon", "instrument", "hammering"),)),
            ("surgeon", (("head_surgeon", "patient", "cementing"),)),
            ("surgeon", (("head_surgeon", "hammer", "holding"),)),
            ("surgeon", (("head_surgeon", "patient", "touching"),)),
            ("staff", (("nurse", "instrument", "preparing"),)),
            ("staff", (("assistant_surgeon", "head_surgeon", "assisting"),)),
        ),
    },
    "closure": {
        "entities": _SURGICAL_STAFF + ("student",),
        "static": _SURGICAL_STATIC,
        "actions": (
            ("surgeon", (("head_surgeon", "patient", "suturing"),)),
            ("surgeon", (("head_surgeon", "patient", "cutting"),)),
            ("surgeon", (("head_surgeon", "instrument", "holding"),)),
            ("staff", (("nurse", "instrument", "cleaning"),)),
            ("staff", (("assistant_surgeon", "patient", "touching"),)),
        ),
    },
}

# Contact events injected as sterility breaches: (non-sterile, sterile, contact).
BREACH_TEMPLATES = (
    ("circulator", "head_surgeon", "touching"),
    ("circulator", "instrument_table", "touching"),
    ("student", "drape", "touching"),
    ("circulator", "instrument", "holding"),
    ("mps", "assistant_surgeon", "touching"),
)
