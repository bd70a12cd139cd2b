"""Multimodal autoregressive scene-graph decoder."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .encoders import EncoderConfig, ModalityEncoders, TOKEN_MODALITIES
from .graph import SceneGraph, parse_triplets, serialize_triplets
from .nn import Block, init_weights
from .sample import MODALITIES, ModalityBundle
from .textify import serialize_robot_log, serialize_tracker, serialize_transcript
from .tokenizer import Tokenizer

PROMPT_VERSION = 1
# Token types added to every input position.
TYPE_IDS = {"images": 0, "pointcloud": 1, "audio": 2, "masks": 3, "text": 4}


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 128
    n_layers: int = 4
    n_heads: int = 4
    d_ff: int = 512
    max_seq_len: int = 1024
    seed: int = 0
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    dtype: str = "float32"

    @property
    def n_image_tokens(self) -> int:
        return self.encoder.n_image_tokens

    def validate(self) -> None:
        for name in ("d_model", "n_layers", "n_heads", "d_ff", "max_seq_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        e = self.encoder
        if e.d_enc % e.heads:
            raise ValueError("encoder width not divisible by encoder heads")
        if e.image_size % e.patch:
            raise ValueError("image size must be a multiple of the patch size")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "ModelConfig":
        data = dict(data)
        enc = EncoderConfig(**data.pop("encoder", {}))
        return cls(encoder=enc, **data)


def build_prompt(bundle: ModalityBundle, memory_text: Optional[str] = None) -> str:
    """Prompt text from the text-native modalities present in ``bundle``.

    Absent modalities contribute no line at all.
    """
    lines = []
    if bundle.transcript is not None:
        lines.append(serialize_transcript(bundle.transcript))
    if bundle.robot_log is not None:
        lines.append(serialize_robot_log(bundle.robot_log))
    if bundle.tracker is not None:
        lines.append(serialize_tracker(bundle.tracker))
    if memory_text is not None:
        lines.append(memory_text)
    lines.append("triplets: <s>")
    return "\n".join(lines)


class SceneGraphModel(nn.Module):
    def __init__(self, config: ModelConfig, tokenizer: Optional[Tokenizer] = None):
        super().__init__()
        config.validate()
        self.config = config
        self.tokenizer = tokenizer or Tokenizer()
        d = config.d_model
        self.encoders = ModalityEncoders(config.encoder, d)
        self.tok = nn.Embedding(len(self.tokenizer), d)
        self.pos = nn.Embedding(config.max_seq_len, d)
        self.type_emb = nn.Embedding(len(TYPE_IDS), d)
        self.blocks = nn.ModuleList(Block(d, config.n_heads, config.d_ff) for _ in range(config.n_layers))
        self.ln_f = nn.LayerNorm(d)
        self.head = nn.Linear(d, len(self.tokenizer))
        self.reset_parameters()
        if config.dtype == "float64":
            self.double()

    @property
    def dtype(self) -> torch.dtype:
        return self.head.weight.dtype

    def reset_parameters(self) -> None:
        g = torch.Generator().manual_seed(int(self.config.seed))
        init_weights(self, g)
        with torch.no_grad():
            for p in (self.tok.weight, self.pos.weight, self.type_emb.weight):
                p.normal_(0.0, 0.02, generator=g)
            img = self.encoders.images
            for p in (img.pos, img.view, img.queries):
                p.normal_(0.0, 0.02, generator=g)

    # ------------------------------------------------------------ encoding

    def encode_bundles(self, bundles: Sequence[ModalityBundle]) -> list[list[tuple[str, torch.Tensor]]]:
        """Projected modality tokens per sample, as ordered (type, [n, d]) pieces."""
        enc = self.encoders
        dt = self.dtype
        out: list[list[tuple[str, torch.Tensor]]] = [[] for _ in bundles]

        def t(x):
            return torch.as_tensor(np.asarray(x), dtype=dt)

        img_idx, img_batch = [], []
        for i, b in enumerate(bundles):
            views = list(b.room_images or ()) + list(b.detail_images or ())
            if views:
                img_idx.append(i)
                img_batch.append(torch.stack([t(v) for v in views]))
        if img_batch:
            toks = enc.project("images", enc.images(img_batch))
            for j, i in enumerate(img_idx):
                out[i].append(("images", toks[j]))

        pc_idx = [i for i, b in enumerate(bundles) if b.pointcloud is not None]
        if pc_idx:
            toks = enc.project("pointcloud", enc.pointcloud([t(bundles[i].pointcloud) for i in pc_idx]))
            for j, i in enumerate(pc_idx):
                out[i].append(("pointcloud", toks[j]))

        au_idx = [i for i, b in enumerate(bundles) if b.audio is not None]
        if au_idx:
            toks = enc.project("audio", enc.audio([t(bundles[i].audio) for i in au_idx]))
            for j, i in enumerate(au_idx):
                out[i].append(("audio", toks[j]))

        mk_idx = [i for i, b in enumerate(bundles) if b.masks]
        if mk_idx:
            counts = [min(len(bundles[i].masks), enc.cfg.max_masks) for i in mk_idx]
            stack = torch.stack(
                [t(m) for i, c in zip(mk_idx, counts) for _, m in bundles[i].masks[:c]]
            )
            toks = enc.project("masks", enc.masks(stack))
            start = 0
            for i, c in zip(mk_idx, counts):
                out[i].append(("masks", toks[start : start + c]))
                start += c
        return out

    # ------------------------------------------------------------ decoding

    def _embed_sequences(self, pieces_list, id_lists):
        """Left-padded input embeddings, position ids and validity mask."""
        seqs = []
        for pieces, ids in zip(pieces_list, id_lists):
            parts = []
            for kind, toks in pieces:
                parts.append(toks + self.type_emb.weight[TYPE_IDS[kind]])
            if ids:
                idt = torch.as_tensor(ids, dtype=torch.long)
                parts.append(self.tok(idt) + self.type_emb.weight[TYPE_IDS["text"]])
            seqs.append(torch.cat(parts, dim=0) if parts else self.tok.weight.new_zeros(0, self.config.d_model))
        lengths = [s.shape[0] for s in seqs]
        L = max(lengths)
        if L > self.config.max_seq_len:
            raise ValueError(f"sequence length {L} exceeds max_seq_len {self.config.max_seq_len}")
        b, d = len(seqs), self.config.d_model
        x = self.tok.weight.new_zeros(b, L, d)
        valid = torch.zeros(b, L, dtype=torch.bool)
        pos = torch.zeros(b, L, dtype=torch.long)
        for i, s in enumerate(seqs):
            pad = L - lengths[i]
            x[i, pad:] = s
            valid[i, pad:] = True
            pos[i, pad:] = torch.arange(lengths[i])
        x = x + self.pos(pos)
        return x, valid, pos, lengths

    @staticmethod
    def _allowed(valid: torch.Tensor) -> torch.Tensor:
        b, L = valid.shape
        causal = torch.tril(torch.ones(L, L, dtype=torch.bool))
        allowed = causal[None] & valid[:, None, :]
        allowed = allowed | torch.eye(L, dtype=torch.bool)[None]
        return allowed[:, None]

    def run(self, x, allowed, caches=None):
        new = []
        for i, blk in enumerate(self.blocks):
            x, c = blk(x, allowed, None if caches is None else caches[i])
            new.append(c)
        return self.head(self.ln_f(x)), new

    def forward_batch(self, pieces_list, prompt_ids, target_ids):
        """Teacher-forced logits and mean cross-entropy over target tokens.

        Returns (logits [B, L, V], loss).
        """
        inputs = [p + t[:-1] for p, t in zip(prompt_ids, target_ids)]
        x, valid, _, _ = self._embed_sequences(pieces_list, inputs)
        logits, _ = self.run(x, self._allowed(valid))
        L = x.shape[1]
        n_total = 0
        total = logits.sum() * 0.0  # keeps a graph when no target tokens exist
        for i, tgt in enumerate(target_ids):
            n = len(tgt)
            if n == 0:
                continue
            lg = logits[i, L - n :]
            total = total + F.cross_entropy(lg, torch.as_tensor(tgt, dtype=torch.long), reduction="sum")
            n_total += n
        loss = total / max(n_total, 1)
        return logits, loss

    def prompt_ids(self, bundle: ModalityBundle, memory_text: Optional[str] = None) -> list[int]:
        return self.tokenizer.encode(build_prompt(bundle, memory_text))

    def target_ids(self, graph: SceneGraph) -> list[int]:
        return self.tokenizer.encode_target(serialize_triplets(graph, self.tokenizer.vocab))

    @torch.no_grad()
    def generate_ids(self, pieces_list, prompt_ids, max_len: int) -> list[list[int]]:
        """Greedy decoding with a key/value cache; stops at the end token."""
        b = len(prompt_ids)
        if max_len <= 0:
            return [[] for _ in range(b)]
        x, valid, pos, lengths = self._embed_sequences(pieces_list, prompt_ids)
        L = x.shape[1]
        max_len = min(max_len, self.config.max_seq_len - L)
        if max_len <= 0:
            return [[] for _ in range(b)]
        logits, caches = self.run(x, self._allowed(valid))
        out = [[] for _ in range(b)]
        done = torch.zeros(b, dtype=torch.bool)
        next_pos = torch.as_tensor(lengths, dtype=torch.long)
        text_type = self.type_emb.weight[TYPE_IDS["text"]]
        nxt = logits[:, -1].argmax(dim=-1)
        for step in range(max_len):
            for i in range(b):
                if not done[i]:
                    out[i].append(int(nxt[i]))
            done |= nxt == self.tokenizer.end_id
            if bool(done.all()) or step == max_len - 1:
                break
            emb = self.tok(nxt)[:, None, :] + text_type + self.pos(next_pos)[:, None, :]
            valid = torch.cat([valid, torch.ones(b, 1, dtype=torch.bool)], dim=1)
            allowed = valid[:, None, None, :]
            logits, caches = self.run(emb, allowed, caches)
            next_pos = next_pos + 1
            nxt = logits[:, -1].argmax(dim=-1)
        return out

    def decode_graph(self, ids: list[int], timepoint_id: int = 0) -> tuple[SceneGraph, list[str]]:
        text = self.tokenizer.decode(ids)
        return parse_triplets(text, self.tokenizer.vocab, timepoint_id)

    def forward(self, pieces, prompt_ids, target_ids):
        return self.forward_batch([pieces], [prompt_ids], [target_ids])


def default_max_len(model: SceneGraphModel) -> int:
    # 6 tokens per triplet (s , o , p ;) at the 20-edge ceiling, plus end.
    return 6 * 24 + 1
