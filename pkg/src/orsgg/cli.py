"""Command-line entry point: data generation, training, evaluation and ablations."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from collections import defaultdict
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import plots
from .config import CODE_VERSION, RunConfig, dump_config, load_config
from .downstream import (
    ClassifierConfig,
    load_classifier,
    predict_samples,
    sample_label,
    save_classifier,
    train_task_classifier,
    TASKS,
)
from .experiments import (
    Cell,
    GridRunner,
    augmentation_cells,
    drop_sweep_cells,
    evaluate_graphs,
    missing_modality,
    modality_cells,
    predict,
    summarize,
    summary_csv,
)
from .graph import SceneGraph, read_graphs_jsonl, write_graphs_jsonl
from .metrics import ConfusionTallies, group_by_frequency, report, write_report
from .rawarray import decode_mask
from .sterility import DEFAULT_POLICY, SterilityPolicy, detect_breach
from .synth.dataset import generate_corpus, read_dataset, read_manifest, write_dataset
from .training import TrainState, init_model, load_checkpoint, restrict, save_checkpoint, train
from .vocab import ENTITIES
from .vpq import masks_to_video, vpq

log = logging.getLogger("orsgg")


class CliError(Exception):
    pass


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def append_manifest(out: Path, entry: dict) -> None:
    """Run manifests are append-only lists of command records."""
    path = out / "run_manifest.json"
    entries = json.loads(path.read_text()) if path.exists() else []
    entries.append(entry)
    _write_json(path, entries)


def _entry(command: str, cfg: RunConfig, **kw) -> dict:
    return {
        "command": command,
        "code_version": CODE_VERSION,
        "config_hash": cfg.hash(),
        "config": cfg.to_json(),
        "seed": cfg.seeds[0],
        **kw,
    }


def _load_split(data: str, split: str):
    samples = read_dataset(data, split)
    if not samples:
        raise CliError(f"split {split!r} of {data} is empty")
    return samples


def _graphs_by_id(path: Optional[str], samples) -> list[SceneGraph]:
    if path is None:
        return [s.gt_graph for s in samples]
    by_id = {g.timepoint_id: g for g in read_graphs_jsonl(path)}
    missing = [s.timepoint_id for s in samples if s.timepoint_id not in by_id]
    if missing:
        raise CliError(f"{path}: no graph for timepoints {missing[:5]}")
    return [by_id[s.timepoint_id] for s in samples]


# ------------------------------------------------------------------ verbs


def cmd_gen_data(cfg: RunConfig, args) -> dict:
    out = Path(args.out)
    _, samples = generate_corpus(cfg.dataset)
    write_dataset(samples, out, cfg.dataset)
    manifest = read_manifest(out)
    return {"dataset": str(out), "n_samples": len(samples), "splits": {k: len(v) for k, v in manifest["splits"].items()}}


def cmd_train(cfg: RunConfig, args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = _load_split(args.data, "train")
    schedule = cfg.train if cfg.memory else replace(cfg.train, memory_steps=0)
    if args.resume:
        state, _ = load_checkpoint(args.resume)
        if state.config != cfg.model:
            raise CliError("checkpoint model config differs from run config")
    else:
        state = init_model(cfg.model, schedule.lr)
    ckpt = out / "checkpoint.bin"
    t0 = time.perf_counter()
    train(state, samples, cfg.augment, schedule, enabled=cfg.sensor_modalities, checkpoint_path=ckpt)
    data_hash = sha256_file(Path(args.data) / "manifest.json")
    save_checkpoint(state, ckpt, extra={"dataset_sha256": data_hash, "config_hash": cfg.hash()})
    steps_per_epoch = max(1, len(samples) // schedule.batch_size)
    losses = np.asarray(state.losses)
    epochs = [
        {"epoch": i, "mean_loss": float(losses[a : a + steps_per_epoch].mean())}
        for i, a in enumerate(range(0, len(losses), steps_per_epoch))
    ]
    (out / "losses.csv").write_text("step,loss\n" + "".join(f"{i},{v:.6f}\n" for i, v in enumerate(state.losses)))
    plots.plot_loss(state.losses, out / "loss.png", stage_break=schedule.steps if schedule.memory_steps else None)
    append_manifest(
        out,
        _entry(
            "train",
            cfg,
            dataset=str(args.data),
            dataset_sha256=data_hash,
            checkpoint="checkpoint.bin",
            checkpoint_sha256=sha256_file(ckpt),
            step=state.step,
            per_epoch=epochs,
            wall_clock_s=round(time.perf_counter() - t0, 3),
        ),
    )
    return {"checkpoint": str(ckpt), "step": state.step, "final_loss": state.losses[-1] if state.losses else None}


def cmd_evaluate(cfg: RunConfig, args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    split = args.split or cfg.evaluate.split
    samples = _load_split(args.data, split)
    state, _ = load_checkpoint(args.checkpoint)
    samples = [restrict(s, cfg.sensor_modalities) for s in samples]
    if cfg.evaluate.protocol == "missing":
        samples = missing_modality(samples, cfg.seeds[0])
    preds = predict(state.model, samples, use_memory=cfg.memory, views=cfg.evaluate.views, batch_size=cfg.evaluate.batch_size)
    r = evaluate_graphs(preds, samples)
    write_graphs_jsonl(preds, out / "predictions.jsonl")
    groups = {g: gr.to_json()["macro"] for g, gr in group_by_frequency(r).items()}
    extra = {
        "checkpoint_sha256": sha256_file(args.checkpoint),
        "dataset_sha256": sha256_file(Path(args.data) / "manifest.json"),
        "config_hash": cfg.hash(),
        "split": split,
        "protocol": cfg.evaluate.protocol,
        "views": cfg.evaluate.views,
        "frequency_groups": groups,
    }
    write_report(r, str(out / "report"), extra)
    plots.plot_class_f1(r, out / "report_f1.png", title=f"{split} macro-F1 {r.macro_f1:.3f}")
    append_manifest(out, _entry("evaluate", cfg, checkpoint=str(args.checkpoint), report="report.json", macro_f1=r.macro_f1))
    return {"macro_f1": r.macro_f1, "report": str(out / "report.json")}


def cmd_ablate(cfg: RunConfig, args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_set = _load_split(args.data, "train")
    test_set = _load_split(args.data, cfg.evaluate.split)
    runner = GridRunner(train_set, test_set, cfg.model, cfg.train)
    ab = cfg.ablation
    enabled = cfg.sensor_modalities
    grids = {}
    for name in ab.grids:
        if name == "modality":
            cells = modality_cells()
            if cfg.memory:
                cells.append(Cell("+memory", cells[-1].enabled, memory=True))
            protocol = ab.modality_protocol
        elif name == "augmentation":
            cells = [replace(c, enabled=enabled) for c in augmentation_cells(cfg.augment.drop_prob, cfg.augment)]
            protocol = ab.augmentation_protocol
        elif name == "drop_sweep":
            cells = [replace(c, enabled=enabled) for c in drop_sweep_cells(ab.drop_probs, cfg.augment)]
            protocol = ab.augmentation_protocol
        else:
            raise CliError(f"unknown ablation grid {name!r}")
        rows = summarize(runner.grid(cells, cfg.seeds, protocol))
        (out / f"ablation_{name}.csv").write_text(summary_csv(rows))
        _write_json(out / f"ablation_{name}.json", {"protocol": protocol, "seeds": list(cfg.seeds), "rows": rows})
        plots.plot_ablation(rows, out / f"ablation_{name}.png", title=f"{name} ({protocol})")
        grids[name] = rows
    append_manifest(out, _entry("ablate", cfg, dataset=str(args.data), grids=list(grids)))
    return {name: {r["cell"]: r["macro_f1_mean"] for r in rows} for name, rows in grids.items()}


def cmd_breach_scan(cfg: RunConfig, args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    policy = SterilityPolicy.load(cfg.sterility_policy) if cfg.sterility_policy else DEFAULT_POLICY
    samples = read_dataset(args.data, args.split) if args.split != "all" else read_dataset(args.data)
    if not samples:
        raise CliError("no samples to scan")
    graphs = _graphs_by_id(args.graphs, samples)
    t = ConfusionTallies()
    lines = ["timepoint_id,scenario_id,t,breach,flag,offending\n"]
    for s, g in zip(samples, graphs):
        hit, offending = detect_breach(g, policy)
        t.add("breach", tp=int(hit and s.breach), fp=int(hit and not s.breach), fn=int(s.breach and not hit))
        off = " ".join(f"{a},{b},{p};" for a, b, p in offending)
        lines.append(f"{s.timepoint_id},{s.scenario_id},{s.t},{int(hit)},{int(s.breach)},\"{off}\"\n")
    (out / "breaches.csv").write_text("".join(lines))
    tp, fp, fn = t.counts.get("breach", [0, 0, 0])
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else (1.0 if tp + fp + fn == 0 else 0.0)
    summary = {"precision": prec, "recall": rec, "f1": f1, "tp": tp, "fp": fp, "fn": fn, "n": len(samples),
               "policy": policy.to_json(), "graphs": args.graphs or "ground_truth"}
    _write_json(out / "breach_summary.json", summary)
    return {"f1": f1, "n": len(samples)}


def cmd_downstream_train(cfg: RunConfig, args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = _load_split(args.data, "train")
    clf = train_task_classifier(samples, args.task, cfg.downstream)
    path = save_classifier(clf, out / f"classifier_{args.task}.bin")
    preds = predict_samples(clf, samples, [s.gt_graph for s in samples])
    r = _label_report(preds, [sample_label(s, args.task) for s in samples], clf.labels)
    append_manifest(out, _entry("downstream-train", cfg, task=args.task, classifier=path.name, train_macro_f1=r.macro_f1))
    return {"classifier": str(path), "train_macro_f1": r.macro_f1}


def _label_report(preds, gold, labels):
    t = ConfusionTallies()
    for p, g in zip(preds, gold):
        if p == g:
            t.add(p, tp=1)
        else:
            t.add(p, fp=1)
            t.add(g, fn=1)
    return report(t, labels)


def cmd_downstream_eval(cfg: RunConfig, args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    clf = load_classifier(args.classifier)
    samples = _load_split(args.data, args.split or cfg.evaluate.split)
    graphs = _graphs_by_id(args.graphs, samples)
    preds = predict_samples(clf, samples, graphs)
    gold = [sample_label(s, clf.task) for s in samples]
    lines = ["timepoint_id,scenario_id,t,predicted,label\n"]
    lines += [f"{s.timepoint_id},{s.scenario_id},{s.t},{p},{g}\n" for s, p, g in zip(samples, preds, gold)]
    (out / f"downstream_{clf.task}.csv").write_text("".join(lines))
    r = _label_report(preds, gold, clf.labels)
    write_report(r, str(out / f"downstream_{clf.task}_report"), {"task": clf.task, "graphs": args.graphs or "ground_truth"})
    plots.plot_class_f1(r, out / f"downstream_{clf.task}_f1.png", title=f"{clf.task} macro-F1 {r.macro_f1:.3f}")
    return {"task": clf.task, "macro_f1": r.macro_f1}


def _mask_frames(root: Path, manifest: dict, samples) -> dict:
    """Per scenario, time-ordered lists of (entity, mask) read from ``root``."""
    dirs = {e["id"]: e["dir"] for e in manifest["samples"]}
    by_scen = defaultdict(list)
    for s in sorted(samples, key=lambda s: (s.scenario_id, s.t)):
        d = root / dirs[s.timepoint_id] / "masks"
        frame = []
        if d.is_dir():
            for f in sorted(d.glob("*.bits"), key=lambda p: ENTITIES.index(p.stem) if p.stem in ENTITIES else -1):
                if f.stem not in ENTITIES:
                    raise CliError(f"{f}: unknown entity")
                frame.append((f.stem, decode_mask(f.read_bytes(), str(f))))
        by_scen[s.scenario_id].append(frame)
    return by_scen


def cmd_vpq(cfg: RunConfig, args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    split = args.split or cfg.evaluate.split
    samples = _load_split(args.data, split)
    manifest = read_manifest(args.data)
    shape = (cfg.dataset.synth.height, cfg.dataset.synth.width)
    gt = _mask_frames(Path(args.data), manifest, samples)
    pred = _mask_frames(Path(args.pred), manifest, samples)
    ks = [int(k) for k in args.k.split(",")]
    rows = []
    for k in ks:
        per = [vpq(masks_to_video(gt[sid], ENTITIES, shape), masks_to_video(pred[sid], ENTITIES, shape), k) for sid in sorted(gt)]
        rows.append({"k": k, "vpq": float(np.mean(per)), "per_scenario": per})
    (out / "vpq.csv").write_text("k,vpq\n" + "".join(f"{r['k']},{r['vpq']:.6f}\n" for r in rows))
    _write_json(out / "vpq.json", {"split": split, "rows": rows})
    plots.plot_vpq(ks, [r["vpq"] for r in rows], out / "vpq.png")
    return {str(r["k"]): r["vpq"] for r in rows}


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orsgg", description="Operating-room scene graph generation toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def verb(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--seed", type=int, help="override every seed in the config")
        sp.add_argument("--out", required=True, help="output directory")
        sp.set_defaults(func=func)
        return sp

    verb("gen-data", cmd_gen_data, "generate a synthetic dataset")
    sp = verb("train", cmd_train, "train the scene graph model")
    sp.add_argument("--data", required=True)
    sp.add_argument("--resume", help="checkpoint to continue from")
    sp = verb("evaluate", cmd_evaluate, "score a checkpoint on a split")
    sp.add_argument("--data", required=True)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--split")
    sp = verb("ablate", cmd_ablate, "run the configured ablation grids")
    sp.add_argument("--data", required=True)
    sp = verb("breach-scan", cmd_breach_scan, "rule-based sterility breach detection")
    sp.add_argument("--data", required=True)
    sp.add_argument("--split", default="all")
    sp.add_argument("--graphs", help="predicted graphs (JSON lines); default: ground truth")
    sp = verb("downstream-train", cmd_downstream_train, "train a phase or next-action classifier")
    sp.add_argument("--data", required=True)
    sp.add_argument("--task", choices=TASKS, required=True)
    sp = verb("downstream-eval", cmd_downstream_eval, "evaluate a downstream classifier")
    sp.add_argument("--data", required=True)
    sp.add_argument("--classifier", required=True)
    sp.add_argument("--split")
    sp.add_argument("--graphs", help="predicted graphs (JSON lines); default: ground truth")
    sp = verb("vpq", cmd_vpq, "video panoptic quality of predicted masks")
    sp.add_argument("--data", required=True)
    sp.add_argument("--pred", required=True, help="directory with <sample>/masks/<entity>.bits")
    sp.add_argument("--split")
    sp.add_argument("--k", default="0,1,2,3")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    torch.set_num_threads(1)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        result = args.func(cfg, args)
    except Exception as exc:  # reported as machine-readable JSON
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "command": args.command}), file=sys.stderr)
        return 1
    print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
