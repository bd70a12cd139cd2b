"""Training, greedy generation, gradient checks and checkpoints."""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import torch

from .augment import AugmentConfig, CorpusIndex, augment
from .graph import SceneGraph
from .memory import DEFAULT_WINDOW, build_memory, extend_memory, MemoryContext, render_memory
from .model import PROMPT_VERSION, ModelConfig, SceneGraphModel, default_max_len
from .rawarray import read_container, write_container
from .sample import DROPPABLE, MODALITIES, TimepointSample

log = logging.getLogger(__name__)

CKPT_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainSchedule:
    steps: int = 1000  # stage 1 (no memory)
    memory_steps: int = 0  # stage 2 (memory prepended); 0 disables the stage
    batch_size: int = 16
    lr: float = 3e-4
    min_lr: float = 0.0
    warmup: int = 0
    clip: float = 1.0
    checkpoint_every: int = 0
    memory_k: int = DEFAULT_WINDOW
    seed: int = 0

    @property
    def total_steps(self) -> int:
        return self.steps + self.memory_steps


@dataclass
class TrainState:
    model: SceneGraphModel
    optimizer: torch.optim.Optimizer
    step: int = 0
    best_metric: float = float("nan")
    losses: list = field(default_factory=list)

    @property
    def config(self) -> ModelConfig:
        return self.model.config


def make_optimizer(model: SceneGraphModel, lr: float = 3e-4) -> torch.optim.Optimizer:
    return torch.optim.Adam(model.parameters(), lr=lr, betas=(0.9, 0.999), eps=1e-8)


def init_model(config: ModelConfig, lr: float = 3e-4) -> TrainState:
    torch.use_deterministic_algorithms(True)
    model = SceneGraphModel(config)
    return TrainState(model, make_optimizer(model, lr))


def restrict(sample: TimepointSample, enabled: Optional[Iterable[str]]) -> TimepointSample:
    """Remove modalities a run has switched off; room images always stay."""
    if enabled is None:
        return sample
    enabled = set(enabled) | {"room_images"}
    off = [m for m in MODALITIES if m not in enabled and getattr(sample.modalities, m) is not None]
    if not off:
        return sample
    return replace(sample, modalities=sample.modalities.without(*off))


class HistoryIndex:
    """Ground-truth graphs per scenario, for building training-time memory."""

    def __init__(self, samples: Sequence[TimepointSample]):
        by_scen = defaultdict(list)
        for s in samples:
            by_scen[s.scenario_id].append(s)
        self.by_scen = {k: sorted(v, key=lambda s: s.t) for k, v in by_scen.items()}

    def history(self, sample: TimepointSample) -> list[SceneGraph]:
        return [s.gt_graph for s in self.by_scen.get(sample.scenario_id, ()) if s.t < sample.t]


def lr_at(schedule: TrainSchedule, step: int) -> float:
    total = max(schedule.total_steps, 1)
    if schedule.warmup and step < schedule.warmup:
        return schedule.lr * (step + 1) / schedule.warmup
    frac = min(step / total, 1.0)
    return schedule.min_lr + 0.5 * (schedule.lr - schedule.min_lr) * (1 + math.cos(math.pi * frac))


def batch_inputs(model: SceneGraphModel, samples: Sequence[TimepointSample], memory_texts=None):
    pieces = model.encode_bundles([s.modalities for s in samples])
    if memory_texts is None:
        memory_texts = [None] * len(samples)
    prompts = [model.prompt_ids(s.modalities, m) for s, m in zip(samples, memory_texts)]
    return pieces, prompts


def train(
    state: TrainState,
    dataset: Sequence[TimepointSample],
    augment_config: AugmentConfig,
    schedule: TrainSchedule,
    enabled: Optional[Iterable[str]] = None,
    checkpoint_path: Optional[str | Path] = None,
    on_step: Optional[Callable[[int, float], None]] = None,
    audit: Optional[list] = None,
) -> TrainState:
    """Two-stage curriculum: plain prompts first, then memory-augmented prompts.

    Every stochastic choice derives from ``schedule.seed`` and the global
    step, so resuming from a checkpoint replays the same stream.
    """
    if not dataset:
        raise ValueError("training set is empty")
    torch.use_deterministic_algorithms(True)
    augment_config.validate()
    model, opt = state.model, state.optimizer
    index = CorpusIndex(dataset) if augment_config.mix_prob > 0 else None
    history = HistoryIndex(dataset) if schedule.memory_steps > 0 else None
    n = len(dataset)
    model.train()
    while state.step < schedule.total_steps:
        step = state.step
        rng = np.random.default_rng([schedule.seed, step, 0xB47C])
        idx = rng.choice(n, size=min(schedule.batch_size, n), replace=False)
        batch = []
        for j, i in enumerate(idx):
            srng = np.random.default_rng([schedule.seed, step, j, 0xA06])
            s, rec = augment(dataset[int(i)], index, augment_config, srng)
            if audit is not None:
                audit.append(rec)
            batch.append(restrict(s, enabled))
        memory = None
        if step >= schedule.steps and history is not None:
            memory = [render_memory(build_memory(history.history(s), schedule.memory_k)) for s in batch]
        pieces, prompts = batch_inputs(model, batch, memory)
        targets = [model.target_ids(s.gt_graph) for s in batch]
        for g in opt.param_groups:
            g["lr"] = lr_at(schedule, step)
        _, loss = model.forward_batch(pieces, prompts, targets)
        if not torch.isfinite(loss):
            if checkpoint_path is not None:
                save_checkpoint(state, Path(str(checkpoint_path) + ".diverged"))
            raise TrainingDiverged(f"non-finite loss at step {step}")
        opt.zero_grad(set_to_none=True)
        loss.backward()
        if schedule.clip:
            torch.nn.utils.clip_grad_norm_(model.parameters(), schedule.clip)
        opt.step()
        state.step += 1
        state.losses.append(loss.item())
        if on_step is not None:
            on_step(step, loss.item())
        if checkpoint_path and schedule.checkpoint_every and state.step % schedule.checkpoint_every == 0:
            save_checkpoint(state, checkpoint_path)
    model.eval()
    return state


# ------------------------------------------------------------------ inference


@torch.no_grad()
def generate(
    model: SceneGraphModel,
    samples: Sequence[TimepointSample],
    enabled: Optional[Iterable[str]] = None,
    use_memory: bool = False,
    memory_k: int = DEFAULT_WINDOW,
    max_len: Optional[int] = None,
    batch_size: int = 64,
) -> list[SceneGraph]:
    """Greedy scene graphs for every sample, in input order.

    With memory on, samples are decoded scenario-synchronously in time order
    and each scenario's memory is built from the model's own predictions.
    """
    model.eval()
    max_len = default_max_len(model) if max_len is None else max_len
    samples = [restrict(s, enabled) for s in samples]
    out: list[Optional[SceneGraph]] = [None] * len(samples)
    if not use_memory:
        for start in range(0, len(samples), batch_size):
            chunk = samples[start : start + batch_size]
            pieces, prompts = batch_inputs(model, chunk)
            ids = model.generate_ids(pieces, prompts, max_len)
            for j, s in enumerate(chunk):
                out[start + j] = model.decode_graph(ids[j], s.timepoint_id)[0]
        return out

    order = sorted(range(len(samples)), key=lambda i: (samples[i].t, samples[i].scenario_id, i))
    memories: dict[int, MemoryContext] = defaultdict(MemoryContext)
    by_t = defaultdict(list)
    for i in order:
        by_t[samples[i].t].append(i)
    for t in sorted(by_t):
        group = by_t[t]
        for start in range(0, len(group), batch_size):
            chunk = group[start : start + batch_size]
            texts = [render_memory(memories[samples[i].scenario_id]) for i in chunk]
            pieces, prompts = batch_inputs(model, [samples[i] for i in chunk], texts)
            ids = model.generate_ids(pieces, prompts, max_len)
            for j, i in enumerate(chunk):
                g = model.decode_graph(ids[j], samples[i].timepoint_id)[0]
                out[i] = g
                sid = samples[i].scenario_id
                memories[sid] = extend_memory(memories[sid], g, memory_k)
    return out


# ------------------------------------------------------------------ gradient check


def grad_check(
    model: SceneGraphModel,
    samples: Sequence[TimepointSample],
    eps: float = 1e-5,
    entries_per_tensor: int = 6,
    seed: int = 0,
    floor: float = 1e-6,
) -> tuple[float, dict]:
    """Max relative error between autograd and central differences.

    Checks up to ``entries_per_tensor`` entries of every parameter tensor that
    receives gradient; ``floor`` bounds the denominator so entries with
    vanishing gradients compare absolutely.
    """
    if model.dtype != torch.float64:
        raise ValueError("gradient checks need a float64 model")
    targets = [model.target_ids(s.gt_graph) for s in samples]
    pieces_fn = lambda: batch_inputs(model, samples)

    def loss_fn():
        pieces, prompts = pieces_fn()
        return model.forward_batch(pieces, prompts, targets)[1]

    model.zero_grad(set_to_none=True)
    loss = loss_fn()
    if loss.requires_grad:
        loss.backward()
    rng = np.random.default_rng(seed)
    worst = 0.0
    per_group: dict[str, float] = {}
    with torch.no_grad():
        for name, p in model.named_parameters():
            if p.grad is None:
                continue
            flat = p.view(-1)
            g = p.grad.view(-1)
            picks = rng.choice(flat.numel(), size=min(entries_per_tensor, flat.numel()), replace=False)
            err = 0.0
            for i in picks:
                i = int(i)
                orig = flat[i].item()
                flat[i] = orig + eps
                lp = loss_fn().item()
                flat[i] = orig - eps
                lm = loss_fn().item()
                flat[i] = orig
                num = (lp - lm) / (2 * eps)
                ana = g[i].item()
                err = max(err, abs(num - ana) / max(abs(num), abs(ana), floor))
            per_group[name] = err
            worst = max(worst, err)
    return worst, per_group


# ------------------------------------------------------------------ checkpoints


def _arrays(state: TrainState) -> list[tuple[str, np.ndarray]]:
    names = {id(p): n for n, p in state.model.named_parameters()}
    out = [(f"param.{n}", p.detach().cpu().numpy()) for n, p in state.model.named_parameters()]
    for p, st in state.optimizer.state.items():
        n = names[id(p)]
        for key in ("exp_avg", "exp_avg_sq"):
            if key in st:
                out.append((f"opt.{key}.{n}", st[key].detach().cpu().numpy()))
    return out


def save_checkpoint(state: TrainState, path: str | Path, extra: Optional[dict] = None) -> Path:
    """Parameters and Adam moments in the shared container (stored as float32)."""
    names = {id(p): n for n, p in state.model.named_parameters()}
    opt_steps = {names[id(p)]: int(st["step"]) for p, st in state.optimizer.state.items() if "step" in st}
    header = {
        "kind": "scene_graph_model",
        "version": CKPT_VERSION,
        "prompt_version": PROMPT_VERSION,
        "model_config": state.model.config.to_json(),
        "tokens": list(state.model.tokenizer.tokens),
        "step": state.step,
        "best_metric": None if math.isnan(state.best_metric) else state.best_metric,
        "opt_steps": opt_steps,
        "extra": extra or {},
    }
    return write_container(path, header, _arrays(state))


def load_checkpoint(path: str | Path) -> tuple[TrainState, dict]:
    header, arrays = read_container(path)
    if header.get("kind") != "scene_graph_model" or header.get("version") != CKPT_VERSION:
        raise ValueError(f"{path}: not a scene-graph model checkpoint of version {CKPT_VERSION}")
    state = init_model(ModelConfig.from_json(header["model_config"]))
    if list(state.model.tokenizer.tokens) != header["tokens"]:
        raise ValueError(f"{path}: tokenizer vocabulary differs from this build")
    params = dict(state.model.named_parameters())
    with torch.no_grad():
        for name, p in params.items():
            p.copy_(torch.from_numpy(arrays[f"param.{name}"].copy()).to(p.dtype))
    for name, p in params.items():
        if f"opt.exp_avg.{name}" in arrays:
            state.optimizer.state[p] = {
                "step": torch.tensor(float(header["opt_steps"][name])),
                "exp_avg": torch.from_numpy(arrays[f"opt.exp_avg.{name}"].copy()).to(p.dtype),
                "exp_avg_sq": torch.from_numpy(arrays[f"opt.exp_avg_sq.{name}"].copy()).to(p.dtype),
            }
    state.step = int(header["step"])
    if header.get("best_metric") is not None:
        state.best_metric = float(header["best_metric"])
    return state, header
