"""Memory scene graphs: recent full graphs plus a deduplicated long-term triplet list."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .graph import SceneGraph, Triplet, serialize_triplets
from .vocab import DEFAULT_VOCAB, VocabSpec

DEFAULT_WINDOW = 3


@dataclass(frozen=True)
class MemoryContext:
    short_term: tuple[SceneGraph, ...] = ()
    long_term: tuple[Triplet, ...] = ()


def build_memory(history: Sequence[SceneGraph], k: int = DEFAULT_WINDOW) -> MemoryContext:
    if k < 0:
        raise ValueError("window size must be >= 0")
    seen: dict[Triplet, None] = {}
    for g in history:
        for t in g.triplets:
            seen.setdefault(t, None)
    short = tuple(history[-k:]) if k else ()
    return MemoryContext(short, tuple(seen))


def extend_memory(m: MemoryContext, g: SceneGraph, k: int = DEFAULT_WINDOW) -> MemoryContext:
    """Fold one more graph into an existing context (incremental form of build_memory)."""
    known = set(m.long_term)
    long_term = list(m.long_term)
    for t in g.triplets:
        if t not in known:
            known.add(t)
            long_term.append(t)
    short = (m.short_term + (g,))[-k:] if k else ()
    return MemoryContext(short, tuple(long_term))


def render_memory(m: MemoryContext, v: VocabSpec = DEFAULT_VOCAB) -> str:
    if not m.short_term and not m.long_term:
        return "memory: none"

    def _fmt(triplets) -> str:
        return serialize_triplets(SceneGraph(0, tuple(triplets)), v) or "none"

    parts = ["long: " + _fmt(m.long_term)]
    n = len(m.short_term)
    for i, g in enumerate(m.short_term):
        parts.append(f"recent[t-{n - i}]: " + _fmt(g.triplets))
    return "memory: " + " | ".join(parts)
