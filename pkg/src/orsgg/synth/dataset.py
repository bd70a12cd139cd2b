"""Synthetic corpora and their on-disk layout.

Directory layout::

    manifest.json            schema version, generator config, splits, sample index
    NNNNNN/graph.json        ground-truth scene graph
    NNNNNN/labels.json       phase, next action, breach, scenario, t, present modalities
    NNNNNN/audio.f32         raw little-endian float32 mono
    NNNNNN/pc.f32            P x 6 row-major float32
    NNNNNN/img_<view>.npyish raw array container (see orsgg.rawarray)
    NNNNNN/masks/<entity>.bits
    NNNNNN/robot_log.json, tracker.json, transcript.json
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..graph import SceneGraph
from ..rawarray import FormatError, decode_mask, encode_mask, read_array, read_f32, write_array, write_f32
from ..sample import ModalityBundle, TimepointSample
from .render import render_timepoint
from .scenario import ScenarioScript, SynthConfig, generate_scenario

SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test")


class DatasetSchemaError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    n_scenarios: int = 20
    seed: int = 0
    split_fractions: tuple = (0.7, 0.15, 0.15)
    synth: SynthConfig = SynthConfig()

    def to_json(self) -> dict:
        return {
            "n_scenarios": self.n_scenarios,
            "seed": self.seed,
            "split_fractions": list(self.split_fractions),
            "synth": self.synth.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "DatasetConfig":
        return cls(
            n_scenarios=int(data["n_scenarios"]),
            seed=int(data["seed"]),
            split_fractions=tuple(data.get("split_fractions", (0.7, 0.15, 0.15))),
            synth=SynthConfig.from_json(data.get("synth", {})),
        )


def scenario_seeds(seed: int, n: int) -> list[int]:
    ss = np.random.SeedSequence([int(seed), 0xDA7A])
    return [int(c.generate_state(1)[0]) for c in ss.spawn(n)]


def split_scenarios(n: int, seed: int, fractions=(0.7, 0.15, 0.15)) -> dict[str, list[int]]:
    """Assign whole scenarios to splits; no scenario spans two splits."""
    order = np.random.default_rng([int(seed), 0x5B1]).permutation(n).tolist()
    n_val = int(round(n * fractions[1]))
    n_test = int(round(n * fractions[2]))
    if n >= 3:
        n_val, n_test = max(n_val, 1), max(n_test, 1)
    n_train = max(n - n_val - n_test, 0)
    return {
        "train": sorted(order[:n_train]),
        "val": sorted(order[n_train : n_train + n_val]),
        "test": sorted(order[n_train + n_val :]),
    }


def generate_corpus(cfg: DatasetConfig) -> tuple[list[ScenarioScript], list[TimepointSample]]:
    scripts = [generate_scenario(cfg.synth, s) for s in scenario_seeds(cfg.seed, cfg.n_scenarios)]
    samples = []
    tid = 0
    for sid, script in enumerate(scripts):
        for t in range(script.length):
            samples.append(render_timepoint(script, t, cfg.synth, timepoint_id=tid, scenario_id=sid))
            tid += 1
    return scripts, samples


# ---------------------------------------------------------------- writing


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")


def _write_sample(root: Path, s: TimepointSample) -> str:
    name = f"{s.timepoint_id:06d}"
    d = root / name
    d.mkdir(parents=True, exist_ok=True)
    m = s.modalities
    _dump_json(d / "graph.json", s.gt_graph.to_json())
    _dump_json(
        d / "labels.json",
        {
            "phase": s.phase,
            "next_action": s.next_action,
            "breach": s.breach,
            "scenario_id": s.scenario_id,
            "t": s.t,
            "present": list(m.present()),
            "n_room": len(m.room_images) if m.room_images is not None else 0,
            "n_detail": len(m.detail_images) if m.detail_images is not None else 0,
            "mask_order": [e for e, _ in m.masks] if m.masks is not None else [],
        },
    )
    for i, img in enumerate(m.room_images or ()):
        write_array(d / f"img_room{i}.npyish", img)
    for i, img in enumerate(m.detail_images or ()):
        write_array(d / f"img_detail{i}.npyish", img)
    if m.audio is not None:
        write_f32(d / "audio.f32", m.audio)
    if m.pointcloud is not None:
        write_f32(d / "pc.f32", m.pointcloud)
    if m.robot_log is not None:
        _dump_json(d / "robot_log.json", m.robot_log)
    if m.tracker is not None:
        _dump_json(d / "tracker.json", list(m.tracker))
    if m.transcript is not None:
        _dump_json(d / "transcript.json", [[ts, text] for ts, text in m.transcript])
    if m.masks is not None:
        (d / "masks").mkdir(exist_ok=True)
        for e, mask in m.masks:
            (d / "masks" / f"{e}.bits").write_bytes(encode_mask(mask))
    return name


def write_dataset(
    samples: Sequence[TimepointSample],
    path: str | Path,
    config: DatasetConfig | None = None,
    splits: dict | None = None,
) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    index = []
    for s in samples:
        name = _write_sample(root, s)
        index.append({"id": s.timepoint_id, "scenario": s.scenario_id, "t": s.t, "dir": name})
    if splits is None:
        n = len({s.scenario_id for s in samples})
        seed = config.seed if config else 0
        fr = config.split_fractions if config else (0.7, 0.15, 0.15)
        scen = sorted({s.scenario_id for s in samples})
        by_pos = split_scenarios(n, seed, fr)
        splits = {k: [scen[i] for i in v] for k, v in by_pos.items()}
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_json() if config else None,
        "splits": splits,
        "samples": index,
    }
    _dump_json(root / "manifest.json", manifest)
    return root


# ---------------------------------------------------------------- reading


def read_manifest(path: str | Path) -> dict:
    mpath = Path(path) / "manifest.json"
    try:
        manifest = json.loads(mpath.read_text())
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DatasetSchemaError(f"{mpath}: unreadable manifest ({exc})") from exc
    if not isinstance(manifest, dict) or manifest.get("schema_version") != SCHEMA_VERSION:
        raise DatasetSchemaError(f"{mpath}: schema version mismatch (expected {SCHEMA_VERSION})")
    for key in ("splits", "samples"):
        if key not in manifest:
            raise DatasetSchemaError(f"{mpath}: missing key {key!r}")
    return manifest


def _load_json(path: Path):
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetSchemaError(f"{path}: invalid JSON ({exc})") from exc


def _read_sample(d: Path, tid: int, synth: SynthConfig | None) -> TimepointSample:
    labels = _load_json(d / "labels.json")
    present = set(labels["present"])
    graph = SceneGraph.from_json(_load_json(d / "graph.json"))

    def arr(name):
        try:
            return read_array(d / name)
        except FormatError as exc:
            raise DatasetSchemaError(str(exc)) from exc

    room = tuple(arr(f"img_room{i}.npyish") for i in range(labels["n_room"])) if "room_images" in present else None
    detail = (
        tuple(arr(f"img_detail{i}.npyish") for i in range(labels["n_detail"]))
        if "detail_images" in present
        else None
    )
    audio = read_f32(d / "audio.f32") if "audio" in present else None
    pc = read_f32(d / "pc.f32").reshape(-1, 6) if "pointcloud" in present else None
    robot = _load_json(d / "robot_log.json") if "robot_log" in present else None
    tracker = tuple(_load_json(d / "tracker.json")) if "tracker" in present else None
    transcript = (
        tuple((ts, text) for ts, text in _load_json(d / "transcript.json")) if "transcript" in present else None
    )
    masks = None
    if "masks" in present:
        masks = tuple(
            (e, decode_mask((d / "masks" / f"{e}.bits").read_bytes(), f"{d}/masks/{e}.bits"))
            for e in labels["mask_order"]
        )
    bundle = ModalityBundle(room, detail, pc, audio, transcript, robot, tracker, masks)
    return TimepointSample(
        timepoint_id=tid,
        modalities=bundle,
        gt_graph=graph,
        phase=labels["phase"],
        next_action=labels["next_action"],
        breach=bool(labels["breach"]),
        scenario_id=int(labels["scenario_id"]),
        t=int(labels["t"]),
    )


def read_dataset(path: str | Path, split: str | None = None) -> list[TimepointSample]:
    root = Path(path)
    manifest = read_manifest(root)
    keep = None
    if split is not None:
        if split not in manifest["splits"]:
            raise KeyError(f"unknown split {split!r}")
        keep = set(manifest["splits"][split])
    synth = None
    if manifest.get("config"):
        synth = DatasetConfig.from_json(manifest["config"]).synth
    out = []
    for entry in manifest["samples"]:
        if keep is not None and entry["scenario"] not in keep:
            continue
        out.append(_read_sample(root / entry["dir"], int(entry["id"]), synth))
    return out


def dataset_files(path: str | Path) -> Iterable[Path]:
    root = Path(path)
    for dirpath, _, files in sorted(os.walk(root)):
        for f in sorted(files):
            yield Path(dirpath) / f
