"""Closed-vocabulary tokenizer for prompts and triplet targets.

One token per entity, predicate and phase label, the structural tokens, a
fixed word list for prompt text, single digits, and punctuation.
"""

from __future__ import annotations

import re
from typing import Iterable, Sequence

from .synth import world
from .vocab import DEFAULT_VOCAB, PHASES, VocabSpec

PAD = "<pad>"
UNK = "<unk>"

_PUNCT = tuple(".()=-[]:|,;+")
_KEYWORDS = (
    "speech", "robot", "phase", "action", "tracker", "memory", "long", "recent", "none",
    "t", "q", "scene", "graph", "triplets", "standby",
)

_TOKEN_RE = re.compile(r"<[a-z/]+>|[a-z_]+|\d|[^\sa-z_\d]")


def _prompt_words() -> list[str]:
    words = set(_KEYWORDS)
    for lines in world.SPEECH.values():
        for line in lines:
            words.update(line.split())
    for line in world.CHATTER:
        words.update(line.split())
    words.update(world.ROBOT_ACTION.values())
    return sorted(words)


class Tokenizer:
    def __init__(self, vocab: VocabSpec = DEFAULT_VOCAB):
        self.vocab = vocab
        tokens = [PAD, UNK, vocab.start, vocab.end]
        seen = set(tokens)
        for group in (
            (vocab.delimiter, vocab.separator),
            vocab.entities,
            vocab.predicates,
            PHASES,
            _prompt_words(),
            tuple("0123456789"),
            _PUNCT,
        ):
            for tok in group:
                if tok not in seen:
                    seen.add(tok)
                    tokens.append(tok)
        self.tokens = tuple(tokens)
        self.index = {t: i for i, t in enumerate(tokens)}
        self.pad_id = self.index[PAD]
        self.unk_id = self.index[UNK]
        self.start_id = self.index[vocab.start]
        self.end_id = self.index[vocab.end]

    def __len__(self) -> int:
        return len(self.tokens)

    def split(self, text: str) -> list[str]:
        return _TOKEN_RE.findall(text.lower())

    def encode(self, text: str) -> list[int]:
        return [self.index.get(tok, self.unk_id) for tok in self.split(text)]

    def decode(self, ids: Iterable[int]) -> str:
        """Inverse of encode for triplet text; stops at the end token."""
        out = []
        for i in ids:
            i = int(i)
            if i == self.end_id:
                break
            if i in (self.pad_id, self.start_id):
                continue
            tok = self.tokens[i] if 0 <= i < len(self.tokens) else UNK
            if tok == self.vocab.separator:
                out.append(tok + " ")
            else:
                out.append(tok)
        return "".join(out).strip()

    def encode_target(self, text: str) -> list[int]:
        return self.encode(text) + [self.end_id]

    def words(self) -> Sequence[str]:
        return self.tokens
