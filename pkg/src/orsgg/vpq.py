"""Video Panoptic Quality over sliding temporal windows.

Segment id 0 marks void pixels and never forms a segment. A tube is the set
of pixels carrying the same (segment id, class) across the frames of a
window; tubes of equal class match when their spatio-temporal IoU exceeds
0.5, which makes the matching unique.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MATCH_IOU = 0.5


@dataclass(frozen=True)
class PanopticVideo:
    frames: tuple  # of (segment-id map [H, W] int, {segment id: class})

    @classmethod
    def from_frames(cls, frames: Sequence) -> "PanopticVideo":
        out = []
        for seg, classes in frames:
            seg = np.asarray(seg)
            ids = set(int(i) for i in np.unique(seg)) - {0}
            missing = ids - set(int(k) for k in classes)
            if missing:
                raise ValueError(f"segment ids without a class: {sorted(missing)}")
            out.append((seg, {int(k): v for k, v in classes.items()}))
        return cls(tuple(out))

    def __len__(self) -> int:
        return len(self.frames)


def _tube_areas(video: PanopticVideo, frames: range):
    """Per-frame labels remapped to tube indices plus tube metadata."""
    keys: dict[tuple, int] = {}
    maps = []
    for f in frames:
        seg, classes = video.frames[f]
        lab = np.zeros(seg.shape, dtype=np.int64)
        for sid in np.unique(seg):
            sid = int(sid)
            if sid == 0:
                continue
            key = (sid, classes[sid])
            idx = keys.setdefault(key, len(keys) + 1)
            lab[seg == sid] = idx
        maps.append(lab)
    classes = [None] * (len(keys) + 1)
    for (sid, c), idx in keys.items():
        classes[idx] = c
    area = np.zeros(len(keys) + 1, dtype=np.int64)
    for lab in maps:
        area += np.bincount(lab.ravel(), minlength=len(keys) + 1)
    return maps, classes, area


def window_pq(gt: PanopticVideo, pred: PanopticVideo, frames: range) -> tuple[float | None, dict]:
    """Class-averaged PQ of one window; None when the window has no segments."""
    g_maps, g_cls, g_area = _tube_areas(gt, frames)
    p_maps, p_cls, p_area = _tube_areas(pred, frames)
    ng, npr = len(g_cls), len(p_cls)
    inter = np.zeros((ng, npr), dtype=np.int64)
    for gl, pl in zip(g_maps, p_maps):
        np.add.at(inter, (gl.ravel(), pl.ravel()), 1)

    per_class: dict = {}
    matched_p = set()
    matched_g = set()
    for gi in range(1, ng):
        for pi in range(1, npr):
            if g_cls[gi] != p_cls[pi] or inter[gi, pi] == 0:
                continue
            union = g_area[gi] + p_area[pi] - inter[gi, pi]
            iou = inter[gi, pi] / union
            if iou > MATCH_IOU:
                matched_g.add(gi)
                matched_p.add(pi)
                row = per_class.setdefault(g_cls[gi], [0.0, 0, 0, 0])
                row[0] += iou
                row[1] += 1
    for gi in range(1, ng):
        if gi not in matched_g:
            per_class.setdefault(g_cls[gi], [0.0, 0, 0, 0])[3] += 1
    for pi in range(1, npr):
        if pi not in matched_p:
            per_class.setdefault(p_cls[pi], [0.0, 0, 0, 0])[2] += 1
    if not per_class:
        return None, {}
    scores = {c: iou / (tp + 0.5 * fp + 0.5 * fn) for c, (iou, tp, fp, fn) in per_class.items()}
    return float(np.mean(list(scores.values()))), scores


def vpq(gt: PanopticVideo, pred: PanopticVideo, k: int = 0) -> float:
    if len(gt) != len(pred):
        raise ValueError(f"frame count mismatch: {len(gt)} vs {len(pred)}")
    if len(gt) == 0:
        raise ValueError("empty video")
    if k < 0:
        raise ValueError("window size must be >= 0")
    for (gs, _), (ps, _) in zip(gt.frames, pred.frames):
        if np.shape(gs) != np.shape(ps):
            raise ValueError(f"frame shape mismatch: {np.shape(gs)} vs {np.shape(ps)}")
    n = len(gt)
    span = min(k + 1, n)
    scores = []
    for start in range(n - span + 1):
        s, _ = window_pq(gt, pred, range(start, start + span))
        if s is not None:
            scores.append(s)
    return float(np.mean(scores)) if scores else 1.0


def masks_to_video(
    mask_frames: Sequence[Sequence[tuple[str, np.ndarray]]],
    classes: Sequence[str],
    shape: tuple[int, int] | None = None,
) -> PanopticVideo:
    """Build a video from per-frame (entity, mask) lists; one segment per entity.

    Segment ids are the entity's index in ``classes`` plus one, so identity
    is stable across frames. ``shape`` sizes frames that carry no masks.
    """
    frames = []
    for masks in mask_frames:
        if masks:
            shape = masks[0][1].shape
        elif shape is None:
            raise ValueError("frame without masks needs an explicit shape")
        seg = np.zeros(shape, dtype=np.int64)
        cmap = {}
        for name, m in masks:
            sid = classes.index(name) + 1
            seg[np.asarray(m, dtype=bool)] = sid
            cmap[sid] = name
        present = set(int(i) for i in np.unique(seg)) - {0}
        frames.append((seg, {s: c for s, c in cmap.items() if s in present}))
    return PanopticVideo.from_frames(frames)
