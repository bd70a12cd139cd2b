"""Text renderings of the text-native modalities (speech, robot logs, tracker)."""

from __future__ import annotations

import math
from typing import Iterable, Optional

SPEECH_WINDOW = 5


def serialize_transcript(lines: Iterable[tuple[float, str]] | None, window: int = SPEECH_WINDOW) -> str:
    """The ``window`` most recent sentences, oldest first.

    Sorting by timestamp is stable, so sentences sharing a timestamp keep
    their input order.
    """
    ordered = sorted(lines or (), key=lambda x: x[0])
    recent = ordered[-window:] if window else []
    if not recent:
        return "speech: none"
    return "speech: " + " . ".join(s.strip() for _, s in recent) + " ."


def serialize_robot_log(record: Optional[dict]) -> str:
    record = record or {}
    phase = record.get("phase") or "none"
    action = record.get("action") or "none"
    return f"robot: phase={phase} action={action}"


def _check_unit(q, tol: float = 1e-6) -> None:
    n = math.sqrt(sum(float(x) * float(x) for x in q))
    if len(q) != 4 or abs(n - 1.0) > tol:
        raise ValueError(f"rotation {list(q)} is not a unit quaternion (norm {n:.8f})")


def serialize_tracker(records: Iterable[dict] | None) -> str:
    items = sorted(records or (), key=lambda r: r["tool"])
    if not items:
        return "tracker: none"
    clauses = []
    for r in items:
        _check_unit(r["rotation"])
        t = ",".join(f"{float(x):.1f}" for x in r["translation"])
        q = ",".join(f"{float(x):.4f}" for x in r["rotation"])
        clauses.append(f"{r['tool']} t=({t}) q=({q})")
    return "tracker: " + " | ".join(clauses)
