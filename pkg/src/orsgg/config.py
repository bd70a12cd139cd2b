"""Run configuration: one YAML file per run, hashed into every manifest."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import yaml

from . import __version__
from .augment import AugmentConfig
from .downstream import ClassifierConfig
from .encoders import EncoderConfig
from .model import ModelConfig
from .sample import MODALITIES
from .synth.dataset import DatasetConfig
from .synth.scenario import SynthConfig
from .training import TrainSchedule

RUN_MODALITIES = MODALITIES + ("memory",)
CODE_VERSION = __version__


@dataclass(frozen=True)
class EvalConfig:
    split: str = "test"
    protocol: str = "full"  # or "missing": one random modality removed per sample
    views: str = "joint"  # or "per_view": one pass per room camera, fused by union
    batch_size: int = 64


@dataclass(frozen=True)
class AblationConfig:
    grids: tuple = ("modality", "augmentation", "drop_sweep")
    drop_probs: tuple = (0.0, 0.25, 0.5, 0.75)
    modality_protocol: str = "full"
    augmentation_protocol: str = "missing"


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainSchedule = field(default_factory=TrainSchedule)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    evaluate: EvalConfig = field(default_factory=EvalConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    downstream: ClassifierConfig = field(default_factory=ClassifierConfig)
    modalities: tuple = RUN_MODALITIES
    seeds: tuple = (0, 1, 2)
    sterility_policy: Optional[str] = None

    def validate(self) -> None:
        unknown = set(self.modalities) - set(RUN_MODALITIES)
        if unknown:
            raise ValueError(f"unknown modalities {sorted(unknown)}")
        if "room_images" not in self.modalities:
            raise ValueError("room_images must stay enabled")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.evaluate.protocol not in ("full", "missing"):
            raise ValueError(f"unknown evaluation protocol {self.evaluate.protocol!r}")
        if self.evaluate.views not in ("joint", "per_view"):
            raise ValueError(f"unknown view mode {self.evaluate.views!r}")
        self.model.validate()
        self.augment.validate()
        self.dataset.synth.validate()

    @property
    def sensor_modalities(self) -> tuple:
        return tuple(m for m in self.modalities if m != "memory")

    @property
    def memory(self) -> bool:
        return "memory" in self.modalities

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(
            self,
            dataset=replace(self.dataset, seed=seed),
            model=replace(self.model, seed=seed),
            train=replace(self.train, seed=seed),
            augment=replace(self.augment, seed=seed),
            downstream=replace(self.downstream, seed=seed),
            seeds=(seed,),
        )

    def to_json(self) -> dict:
        out = {
            "dataset": self.dataset.to_json(),
            "model": self.model.to_json(),
            "train": asdict(self.train),
            "augment": asdict(self.augment),
            "evaluate": asdict(self.evaluate),
            "ablation": asdict(self.ablation),
            "downstream": asdict(self.downstream),
            "modalities": list(self.modalities),
            "seeds": list(self.seeds),
            "sterility_policy": self.sterility_policy,
        }
        return json.loads(json.dumps(out))  # tuples -> lists

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()[:16]


def _build(cls, data: Optional[dict], where: str):
    data = dict(data or {})
    names = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    kw: dict[str, Any] = {}
    for k, v in data.items():
        kw[k] = tuple(v) if isinstance(v, list) else v
    return cls(**kw)


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data or {})
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"config: unknown sections {sorted(unknown)}")
    ds = dict(data.get("dataset") or {})
    synth = _build(SynthConfig, ds.pop("synth", None), "dataset.synth")
    dataset = replace(_build(DatasetConfig, ds, "dataset"), synth=synth)
    md = dict(data.get("model") or {})
    enc = _build(EncoderConfig, md.pop("encoder", None), "model.encoder")
    model = replace(_build(ModelConfig, md, "model"), encoder=enc)
    cfg = RunConfig(
        dataset=dataset,
        model=model,
        train=_build(TrainSchedule, data.get("train"), "train"),
        augment=_build(AugmentConfig, data.get("augment"), "augment"),
        evaluate=_build(EvalConfig, data.get("evaluate"), "evaluate"),
        ablation=_build(AblationConfig, data.get("ablation"), "ablation"),
        downstream=_build(ClassifierConfig, data.get("downstream"), "downstream"),
        modalities=tuple(data.get("modalities", RUN_MODALITIES)),
        seeds=tuple(data.get("seeds", (0, 1, 2))),
        sterility_policy=data.get("sterility_policy"),
    )
    cfg.validate()
    return cfg


def load_config(path: Optional[str | Path]) -> RunConfig:
    if path is None:
        return config_from_dict({})
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is not None and not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")
    return config_from_dict(data or {})


def dump_config(cfg: RunConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_json(), fh, sort_keys=True)
