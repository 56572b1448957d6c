"""Partial-action extraction from flow sequences.

A partial action is a spatio-temporally coherent group of flow vectors.
Extraction runs in three stages over a :class:`~flowseq.flow.FlowSequence`:

1. spatial labeling: 8-connected growth within a frame, joining neighbors
   whose vectors differ by at most ``angle_threshold`` degrees;
2. temporal propagation: each labeled vector seeds the cell it points to in
   the next frame, provided that cell holds a direction-compatible vector;
3. combination: per label, the per-frame vector groups are superimposed into
   a single image, after dropping labels seen in fewer than ``min_frames``
   frames.

Vectors with zero magnitude impose no direction constraint: the angle test
against them always passes.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .flow import FlowField, FlowSequence, _frozen

_NEIGHBORS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
# Inclusive angle comparison needs slack for values landing exactly on the
# threshold after rounding.
_ANGLE_EPS = 1e-12


@dataclass(frozen=True)
class SegmentationParams:
    """Labeling thresholds.

    ``angle_threshold`` bounds the angle (degrees) between a labeled vector
    and a neighbor, both within a frame and across frames. ``min_frames``
    drops labels present in fewer frames (noise canceling). ``superposition``
    picks which frame's vector survives at cells occupied in several frames:
    ``"earliest"`` keeps the first write, ``"latest"`` the last.
    """

    angle_threshold: float = 45.0
    min_frames: int = 3
    superposition: str = "earliest"

    def __post_init__(self):
        if not 0 < self.angle_threshold <= 180:
            raise InvalidInputError("angle_threshold must be in (0, 180]")
        if self.min_frames < 1:
            raise InvalidInputError("min_frames must be >= 1")
        if self.superposition not in ("earliest", "latest"):
            raise InvalidInputError("superposition must be 'earliest' or 'latest'")


@dataclass(frozen=True, eq=False)
class LabeledFlowField:
    """A flow field plus per-cell integer labels (0 = unlabeled)."""

    flow: FlowField
    labels: np.ndarray

    def __post_init__(self):
        lab = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int32))
        if lab.shape != self.flow.presence.shape:
            raise InvalidInputError("labels shape does not match the flow field")
        if np.any((lab > 0) & ~self.flow.presence):
            raise InvalidInputError("labels > 0 allowed only where presence=True")
        object.__setattr__(self, "labels", _frozen(lab))


@dataclass(frozen=True, eq=False)
class PartialActionImage:
    """One label's flow vectors combined into a single image."""

    label: int
    width: int
    height: int
    vectors: np.ndarray
    presence: np.ndarray
    frame_span: tuple[int, int]

    def __post_init__(self):
        vec = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float64))
        pres = np.ascontiguousarray(np.asarray(self.presence, dtype=bool))
        if vec.shape != (self.height, self.width, 2) or pres.shape != (self.height, self.width):
            raise InvalidInputError("partial action image grids do not match its dimensions")
        if not pres.any():
            raise InvalidInputError("partial action image must occupy at least one cell")
        if np.any(vec[~pres] != 0.0):
            raise InvalidInputError("cells with presence=False must carry (0, 0)")
        first, last = self.frame_span
        if last < first:
            raise InvalidInputError(f"invalid frame span {self.frame_span}")
        object.__setattr__(self, "vectors", _frozen(vec))
        object.__setattr__(self, "presence", _frozen(pres))
        object.__setattr__(self, "frame_span", (int(first), int(last)))


@dataclass(frozen=True, eq=False)
class PartialActionSequence:
    """Partial action images in label order, i.e. order of first appearance."""

    actions: tuple[PartialActionImage, ...]
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        labels = [a.label for a in self.actions]
        if labels != sorted(labels):
            raise InvalidInputError("actions must be ordered by ascending label id")
        if self.dt <= 0:
            raise InvalidInputError("dt must be positive")

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)


def _compatible(v1x, v1y, v2x, v2y, cos_threshold) -> bool:
    m1 = math.hypot(v1x, v1y)
    m2 = math.hypot(v2x, v2y)
    if m1 == 0.0 or m2 == 0.0:
        return True
    return v1x * v2x + v1y * v2y >= (cos_threshold - _ANGLE_EPS) * m1 * m2


def spatial_label(
    flow: FlowField,
    seeds: np.ndarray | None = None,
    params: SegmentationParams = SegmentationParams(),
    first_new_label: int | None = None,
) -> LabeledFlowField:
    """Label present vectors by angle-constrained 8-connected growth.

    Seeded labels grow first, in raster order of their seed cells; remaining
    present vectors then receive fresh ids (``first_new_label`` upward, or
    one past the largest seed) and grow the same way. A neighbor joins a
    region when its angle to the adjacent labeled vector stays within
    ``angle_threshold``. Every present vector ends up labeled.
    """
    h, w = flow.height, flow.width
    pres = flow.presence
    vec = flow.vectors
    labels = np.zeros((h, w), dtype=np.int32)
    if seeds is not None:
        seeds = np.asarray(seeds, dtype=np.int32)
        if seeds.shape != (h, w):
            raise InvalidInputError("seed grid shape does not match the flow field")
        np.copyto(labels, seeds, where=pres & (seeds > 0))

    cos_t = math.cos(math.radians(params.angle_threshold))

    def grow(sy: int, sx: int) -> None:
        queue = deque()
        queue.append((sy, sx))
        while queue:
            y, x = queue.popleft()
            lab = labels[y, x]
            vx, vy = vec[y, x]
            for oy, ox in _NEIGHBORS:
                ny, nx = y + oy, x + ox
                if not (0 <= ny < h and 0 <= nx < w):
                    continue
                if labels[ny, nx] != 0 or not pres[ny, nx]:
                    continue
                if _compatible(vx, vy, vec[ny, nx, 0], vec[ny, nx, 1], cos_t):
                    labels[ny, nx] = lab
                    queue.append((ny, nx))

    for y in range(h):
        for x in range(w):
            if labels[y, x] > 0:
                grow(y, x)

    next_label = int(labels.max()) + 1 if first_new_label is None else int(first_new_label)
    for y in range(h):
        for x in range(w):
            if pres[y, x] and labels[y, x] == 0:
                labels[y, x] = next_label
                grow(y, x)
                next_label += 1

    return LabeledFlowField(flow, labels)


def propagate_labels(
    labeled: LabeledFlowField,
    flow_next: FlowField,
    dt: float,
    params: SegmentationParams = SegmentationParams(),
) -> np.ndarray:
    """Seed labels for the next frame by following each labeled vector.

    A vector ``v`` at ``(x, y)`` targets ``(x + vx*dt, y + vy*dt)`` rounded to
    the nearest pixel. The target is seeded with ``v``'s label when it lies in
    bounds, holds a present vector, and that vector's angle to ``v`` is within
    ``angle_threshold``. When several sources hit one cell the lowest label
    wins.
    """
    if labeled.flow.presence.shape != flow_next.presence.shape:
        raise InvalidInputError("frame dimensions differ between consecutive frames")
    h, w = flow_next.height, flow_next.width
    seeds = np.zeros((h, w), dtype=np.int32)
    cos_t = math.cos(math.radians(params.angle_threshold))
    vec = labeled.flow.vectors
    nvec = flow_next.vectors
    npres = flow_next.presence
    ys, xs = np.nonzero(labeled.labels > 0)
    for y, x in zip(ys.tolist(), xs.tolist()):
        vx, vy = vec[y, x]
        tx = int(math.floor(x + vx * dt + 0.5))
        ty = int(math.floor(y + vy * dt + 0.5))
        if not (0 <= tx < w and 0 <= ty < h):
            continue
        if not npres[ty, tx]:
            continue
        if not _compatible(vx, vy, nvec[ty, tx, 0], nvec[ty, tx, 1], cos_t):
            continue
        lab = int(labeled.labels[y, x])
        if seeds[ty, tx] == 0 or lab < seeds[ty, tx]:
            seeds[ty, tx] = lab
    return seeds


def segment(
    seq: FlowSequence,
    params: SegmentationParams = SegmentationParams(),
) -> PartialActionSequence:
    """Extract the partial action sequence from a flow sequence.

    Runs spatial labeling and temporal propagation over all frames, prunes
    labels spanning fewer than ``min_frames`` frames, superimposes each
    surviving label's per-frame vectors into one image, and returns the
    images ordered by label id (order of first appearance).
    """
    if not seq.frames:
        raise InvalidInputError("cannot segment an empty sequence")

    labeled_frames: list[LabeledFlowField] = []
    next_label = 1
    prev: LabeledFlowField | None = None
    for frame in seq.frames:
        seeds = None if prev is None else propagate_labels(prev, frame, seq.dt, params)
        lf = spatial_label(frame, seeds, params, first_new_label=next_label)
        next_label = max(next_label, int(lf.labels.max()) + 1)
        labeled_frames.append(lf)
        prev = lf

    occurrences: dict[int, list[int]] = {}
    for idx, lf in enumerate(labeled_frames):
        for lab in np.unique(lf.labels):
            if lab > 0:
                occurrences.setdefault(int(lab), []).append(idx)

    h, w = seq.height, seq.width
    actions = []
    for lab in sorted(occurrences):
        frame_ids = occurrences[lab]
        if len(frame_ids) < params.min_frames:
            continue
        vec = np.zeros((h, w, 2))
        pres = np.zeros((h, w), bool)
        for idx in frame_ids:
            lf = labeled_frames[idx]
            mask = lf.labels == lab
            write = mask if params.superposition == "latest" else (mask & ~pres)
            vec[write] = lf.flow.vectors[write]
            pres |= mask
        actions.append(
            PartialActionImage(lab, w, h, vec, pres, (frame_ids[0], frame_ids[-1]))
        )
    return PartialActionSequence(tuple(actions), seq.dt)


def save_pas(pas: PartialActionSequence, path) -> None:
    """Write a ``.pas`` JSON file: dt plus per-action label, span, and cells."""
    obj = {"dt": pas.dt, "actions": []}
    for a in pas.actions:
        ys, xs = np.nonzero(a.presence)
        cells = [
            [int(x), int(y), float(a.vectors[y, x, 0]), float(a.vectors[y, x, 1])]
            for y, x in zip(ys.tolist(), xs.tolist())
        ]
        obj["actions"].append(
            {"label": a.label, "frame_span": list(a.frame_span), "cells": cells}
        )
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_pas(path, width: int, height: int) -> PartialActionSequence:
    """Read a ``.pas`` file. The format carries no grid size, so pass it in."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"cannot parse partial action sequence {path}: {e}") from e
    try:
        actions = []
        for rec in obj["actions"]:
            vec = np.zeros((height, width, 2))
            pres = np.zeros((height, width), bool)
            for x, y, vx, vy in rec["cells"]:
                xi, yi = int(x), int(y)
                pres[yi, xi] = True
                vec[yi, xi] = (vx, vy)
            actions.append(
                PartialActionImage(
                    int(rec["label"]), width, height, vec, pres,
                    tuple(rec["frame_span"]),
                )
            )
        return PartialActionSequence(tuple(actions), float(obj["dt"]))
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise InvalidInputError(f"malformed partial action sequence {path}: {e}") from e
