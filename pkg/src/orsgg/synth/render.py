"""Render scripted timepoints into synchronized modality bundles."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..graph import SceneGraph
from ..sample import ModalityBundle, TimepointSample
from ..vocab import ENTITIES
from . import world
from .scenario import ScenarioScript, SynthConfig

TRANSCRIPT_WINDOW = 5


def _rng(script: ScenarioScript, t: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([script.seed, t, stream])


def on_stage(script: ScenarioScript, t: int, graph: SceneGraph) -> list[str]:
    stage = set(world.PHASE_TABLE[script.phase_at(t)]["entities"]) | graph.nodes()
    return [e for e in ENTITIES if e in stage]


def entity_positions(script: ScenarioScript, t: int, graph: SceneGraph, config: SynthConfig) -> dict:
    """3-D positions (metres) of every on-stage entity at timepoint t."""
    rng = _rng(script, t, 1)
    pos = {}
    for e in ENTITIES:  # draw for every entity so the stream is stage-independent
        ax, ay, az = world.ANCHORS[e]
        ox, oy = script.layout[e]
        jx, jy = rng.normal(0.0, config.position_jitter, size=2)
        pos[e] = np.array([ax + ox + jx, ay + oy + jy, az])
    # Actors step next to whatever they act on.
    for a in script.active_actions(t):
        s, o, _ = a.triplets[0]
        d = pos[s][:2] - pos[o][:2]
        n = float(np.hypot(*d)) or 1.0
        pos[s] = np.array([*(pos[o][:2] + 0.35 * d / n), pos[s][2]])
    stage = on_stage(script, t, graph)
    return {e: pos[e] for e in stage}


def _project(p: np.ndarray, theta: float, zoom: float, center, h: int, w: int) -> tuple[float, float]:
    x, y, z = p[0] - center[0], p[1] - center[1], p[2]
    c, s = math.cos(theta), math.sin(theta)
    xr, yr = c * x - s * y, s * x + c * y
    half = 2.2 / zoom
    u = (xr + half) / (2 * half) * w
    v = (yr + half) / (2 * half) * h - z * 0.03 * h * zoom
    return u, v


def _views(config: SynthConfig):
    for v in range(config.n_room_views):
        yield "room", 2 * math.pi * v / config.n_room_views + 0.3, 1.0, (2.0, 2.0)
    for d in range(config.n_detail_views):
        yield "detail", 0.5 + 0.9 * d, 2.5, (2.0, 2.2)


def _draw(positions: dict, graph: SceneGraph, script: ScenarioScript, t: int, theta: float, zoom: float,
          center, config: SynthConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    h, w = config.height, config.width
    img = np.full((h, w, 3), 0.15, dtype=np.float32)
    labels = np.full((h, w), -1, dtype=np.int16)
    scale = min(h, w) / 64.0 * zoom
    px = {e: _project(p, theta, zoom, center, h, w) for e, p in positions.items()}
    for e in world.DRAW_ORDER:
        if e not in px:
            continue
        u, v = px[e]
        r = max(1, int(round(world.GLYPH_SIZE.get(e, world.DEFAULT_GLYPH) * scale)))
        u0, u1 = int(round(u)) - r, int(round(u)) + r + 1
        v0, v1 = int(round(v)) - r, int(round(v)) + r + 1
        u0, v0, u1, v1 = max(u0, 0), max(v0, 0), min(u1, w), min(v1, h)
        if u0 >= u1 or v0 >= v1:
            continue
        img[v0:v1, u0:u1] = world.ENTITY_COLOR[e]
        labels[v0:v1, u0:u1] = ENTITIES.index(e)
    # Interaction stripes for scripted actions (static relations are implicit).
    for a in script.active_actions(t):
        for s, o, p in a.triplets:
            if p not in world.VISUAL_CLASS or s not in px or o not in px:
                continue
            color = world.STRIPE_COLOR[world.VISUAL_CLASS[p]]
            (u0, v0), (u1, v1) = px[s], px[o]
            n = int(max(abs(u1 - u0), abs(v1 - v0)) * 2) + 2
            us = np.clip(np.round(np.linspace(u0, u1, n)).astype(int), 0, w - 1)
            vs = np.clip(np.round(np.linspace(v0, v1, n)).astype(int), 0, h - 1)
            img[vs, us] = color
    img += rng.normal(0.0, config.image_noise, size=img.shape).astype(np.float32)
    np.clip(img, 0.0, 1.0, out=img)
    return img, labels


def _pointcloud(positions: dict, config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    names = list(positions)
    idx = np.arange(config.n_points) % len(names)
    pc = np.empty((config.n_points, 6), dtype=np.float32)
    offsets = rng.uniform(-1.0, 1.0, size=(config.n_points, 3))
    for i, e in enumerate(names):
        sel = idx == i
        half = 0.05 * world.GLYPH_SIZE.get(e, world.DEFAULT_GLYPH)
        pc[sel, :3] = positions[e] + offsets[sel] * np.array([half, half, 0.1])
        pc[sel, 3:] = world.ENTITY_COLOR[e]
    return pc


def _audio(script: ScenarioScript, t: int, config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    sr = config.sample_rate
    ts = np.arange(sr) / sr
    wave = rng.normal(0.0, config.audio_noise, size=sr)
    for a in script.active_actions(t):
        for _, _, p in a.triplets:
            sig = world.AUDIO_SIGNATURE.get(p)
            if sig is None:
                continue
            kind, param = sig
            phase = float(rng.random())
            if kind == "impulse":
                period = 1.0 / param
                local = np.mod(ts + phase * period, period)
                wave += 0.8 * np.exp(-local / 0.004) * np.sin(2 * np.pi * 1500.0 * local)
            else:
                wave += 0.4 * np.sin(2 * np.pi * (param * ts + phase))
                wave += 0.15 * np.sin(2 * np.pi * (2 * param * ts + phase))
    return wave.astype(np.float32)


def _transcript(script: ScenarioScript, t: int) -> tuple:
    spoken = [(round(ts, 3), s) for ts, s in script.speech if ts < t + 1]
    return tuple(spoken[-TRANSCRIPT_WINDOW:])


def _robot_log(script: ScenarioScript, t: int, phase: str) -> dict:
    action = "standby"
    for a in script.active_actions(t):
        for tr in a.triplets:
            if tuple(tr) in world.ROBOT_ACTION:
                action = world.ROBOT_ACTION[tuple(tr)]
    return {"phase": phase, "action": action}


def _tracker(positions: dict, phase: str, rng: np.random.Generator) -> tuple:
    out = []
    for tool in world.TRACKED_TOOLS[phase]:
        p = positions.get(tool)
        if p is None:
            continue
        q = rng.normal(size=4)
        q = q / np.linalg.norm(q)
        if q[0] < 0:
            q = -q
        trans = [round(float(x) * 1000.0 + float(rng.normal(0.0, 2.0)), 3) for x in p]
        out.append({"tool": tool, "translation": trans, "rotation": [float(x) for x in q]})
    return tuple(out)


def render_timepoint(
    script: ScenarioScript,
    t: int,
    config: SynthConfig,
    timepoint_id: Optional[int] = None,
    scenario_id: int = 0,
) -> TimepointSample:
    script._check(t)
    phase = script.phase_at(t)
    tid = t if timepoint_id is None else timepoint_id
    graph = script.graph_at(t, tid)
    positions = entity_positions(script, t, graph, config)

    img_rng = _rng(script, t, 2)
    room, detail, label_maps = [], [], []
    for kind, theta, zoom, center in _views(config):
        img, labels = _draw(positions, graph, script, t, theta, zoom, center, config, img_rng)
        if kind == "room":
            room.append(img)
            label_maps.append(labels)
        else:
            detail.append(img)

    masks = []
    for e in ENTITIES:
        m = label_maps[0] == ENTITIES.index(e)
        if m.any():
            masks.append((e, m))
    masks = masks[: config.max_masks]

    bundle = ModalityBundle(
        room_images=tuple(room),
        detail_images=tuple(detail),
        pointcloud=_pointcloud(positions, config, _rng(script, t, 3)),
        audio=_audio(script, t, config, _rng(script, t, 4)),
        transcript=_transcript(script, t),
        robot_log=_robot_log(script, t, phase),
        tracker=_tracker(positions, phase, _rng(script, t, 5)),
        masks=tuple(masks),
    )
    # The flag comes from the script's injected events, not from the rule.
    breach = any(bt == t for bt, _ in script.breach_events)
    return TimepointSample(
        timepoint_id=tid,
        modalities=bundle,
        gt_graph=graph,
        phase=phase,
        next_action=script.next_action(t),
        breach=breach,
        scenario_id=scenario_id,
        t=t,
    )
