"""Flow-field data types, block-matching optical flow, and synthetic motion sequences.

Coordinate convention: ``x`` indexes columns, ``y`` indexes rows, and grids are
stored row-major as numpy arrays of shape ``(height, width, ...)``. A flow
vector ``(vx, vy)`` is measured in pixels per second along ``x`` and ``y``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import InvalidInputError


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FlowField:
    """Dense grid of 2D motion vectors with a per-pixel presence mask.

    ``vectors`` has shape ``(height, width, 2)`` holding ``(vx, vy)``;
    ``presence`` marks cells where a flow vector exists. Cells with
    ``presence=False`` always carry ``(0, 0)``.
    """

    width: int
    height: int
    vectors: np.ndarray
    presence: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidInputError("flow field dimensions must be positive")
        vec = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float64))
        pres = np.ascontiguousarray(np.asarray(self.presence, dtype=bool))
        if vec.shape != (self.height, self.width, 2):
            raise InvalidInputError(
                f"vectors shape {vec.shape} does not match "
                f"(height, width, 2)=({self.height}, {self.width}, 2)"
            )
        if pres.shape != (self.height, self.width):
            raise InvalidInputError(
                f"presence shape {pres.shape} does not match "
                f"(height, width)=({self.height}, {self.width})"
            )
        if np.any(vec[~pres] != 0.0):
            raise InvalidInputError("cells with presence=False must carry (0, 0)")
        object.__setattr__(self, "vectors", _frozen(vec))
        object.__setattr__(self, "presence", _frozen(pres))

    @classmethod
    def empty(cls, width: int, height: int) -> "FlowField":
        return cls(width, height,
                   np.zeros((height, width, 2)), np.zeros((height, width), bool))

    @classmethod
    def from_cells(cls, width: int, height: int,
                   cells: Sequence[Sequence[float]]) -> "FlowField":
        """Build a field from ``[x, y, vx, vy]`` rows (presence=True cells only)."""
        vec = np.zeros((height, width, 2))
        pres = np.zeros((height, width), bool)
        for cell in cells:
            x, y, vx, vy = cell
            xi, yi = int(x), int(y)
            if not (0 <= xi < width and 0 <= yi < height):
                raise InvalidInputError(f"cell ({xi}, {yi}) outside {width}x{height} grid")
            if pres[yi, xi]:
                raise InvalidInputError(f"duplicate cell ({xi}, {yi})")
            pres[yi, xi] = True
            vec[yi, xi] = (vx, vy)
        return cls(width, height, vec, pres)


@dataclass(frozen=True, eq=False)
class FlowSequence:
    """Ordered flow fields sampled ``dt`` seconds apart."""

    frames: tuple[FlowField, ...]
    dt: float
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.dt <= 0:
            raise InvalidInputError("dt must be positive")
        dims = {(f.width, f.height) for f in self.frames}
        if len(dims) > 1:
            raise InvalidInputError(f"frames disagree on dimensions: {sorted(dims)}")

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height


@dataclass(frozen=True, eq=False)
class GrayFrame:
    """Grayscale image with intensities in [0, 1]."""

    width: int
    height: int
    intensity: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.intensity, dtype=np.float64))
        if arr.shape != (self.height, self.width):
            raise InvalidInputError(
                f"intensity shape {arr.shape} does not match "
                f"(height, width)=({self.height}, {self.width})"
            )
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise InvalidInputError("intensity values must lie in [0, 1]")
        object.__setattr__(self, "intensity", _frozen(arr))


@dataclass(frozen=True)
class FlowParams:
    """Parameters for the block-matching flow computation.

    ``min_texture`` is the block-variance threshold below which no flow is
    declared; ``magnitude_floor`` drops vectors slower than the given speed.
    """

    block_radius: int = 2
    search_radius: int = 3
    min_texture: float = 1e-4
    magnitude_floor: float = 0.5

    def __post_init__(self):
        if self.block_radius < 1:
            raise InvalidInputError("block_radius must be >= 1")
        if self.search_radius < 1:
            raise InvalidInputError("search_radius must be >= 1")
        if self.min_texture < 0:
            raise InvalidInputError("min_texture must be >= 0")
        if self.magnitude_floor < 0:
            raise InvalidInputError("magnitude_floor must be >= 0")


@dataclass(frozen=True)
class BlobTrack:
    """One moving disc: start center, velocity schedule, radius, active interval.

    ``velocity`` is either a single ``(vx, vy)`` pair applied on every active
    frame or one pair per active frame. ``active`` is an inclusive frame span.
    """

    start: tuple[float, float]
    velocity: tuple
    radius: float
    active: tuple[int, int]

    def __post_init__(self):
        if self.radius < 1:
            raise InvalidInputError("blob radius must be >= 1")
        first, last = self.active
        if first < 0 or last < first:
            raise InvalidInputError(f"invalid active interval {self.active}")
        vel = self.velocity
        if len(vel) == 2 and np.isscalar(vel[0]):
            vel = (tuple(float(c) for c in vel),)
        else:
            vel = tuple(tuple(float(c) for c in v) for v in vel)
            if len(vel) != last - first + 1:
                raise InvalidInputError(
                    "velocity schedule length must equal the active frame count"
                )
        object.__setattr__(self, "velocity", vel)
        object.__setattr__(self, "start", (float(self.start[0]), float(self.start[1])))
        object.__setattr__(self, "active", (int(first), int(last)))

    def velocity_at(self, offset: int) -> tuple[float, float]:
        if len(self.velocity) == 1:
            return self.velocity[0]
        return self.velocity[offset]


@dataclass(frozen=True)
class SyntheticGestureSpec:
    """Synthetic flow-sequence recipe used in place of recorded video."""

    width: int
    height: int
    frame_count: int
    blobs: tuple[BlobTrack, ...]
    dt: float = 1.0
    noise: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "blobs", tuple(self.blobs))
        if self.width < 1 or self.height < 1 or self.frame_count < 1:
            raise InvalidInputError("canvas and frame count must be positive")
        if self.dt <= 0:
            raise InvalidInputError("dt must be positive")
        if self.noise < 0:
            raise InvalidInputError("noise amplitude must be >= 0")
        for b in self.blobs:
            if b.active[1] >= self.frame_count:
                raise InvalidInputError(
                    f"blob active interval {b.active} exceeds frame count {self.frame_count}"
                )


def angle_between(u: Sequence[float], v: Sequence[float]) -> float:
    """Angle between two 2D vectors in degrees, in [0, 180]."""
    ux, uy = float(u[0]), float(u[1])
    vx, vy = float(v[0]), float(v[1])
    mu = math.hypot(ux, uy)
    mv = math.hypot(vx, vy)
    if mu == 0.0 or mv == 0.0:
        raise InvalidInputError("angle_between requires nonzero vectors")
    c = (ux * vx + uy * vy) / (mu * mv)
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def compute_flow(a: GrayFrame, b: GrayFrame, params: FlowParams = FlowParams()) -> FlowField:
    """Block-matching flow from frame ``a`` to frame ``b``.

    For every interior pixel whose surrounding block in ``a`` has variance at
    least ``min_texture``, searches integer displacements within
    ``search_radius`` for the block in ``b`` minimizing the sum of squared
    differences. Ties prefer the smaller displacement. The result assumes a
    unit time step; rescale by the real ``dt`` if needed.
    """
    if (a.width, a.height) != (b.width, b.height):
        raise InvalidInputError(
            f"frame dimensions differ: {(a.width, a.height)} vs {(b.width, b.height)}"
        )
    br, sr = params.block_radius, params.search_radius
    margin = br + sr
    if a.width < 2 * margin + 1 or a.height < 2 * margin + 1:
        raise InvalidInputError(
            f"frame {a.width}x{a.height} too small for block_radius={br}, "
            f"search_radius={sr} (needs at least {2 * margin + 1} per side)"
        )
    h, w = a.height, a.width
    size = 2 * br + 1
    ia = a.intensity
    ib = b.intensity

    var = uniform_filter(ia * ia, size) - uniform_filter(ia, size) ** 2
    np.clip(var, 0.0, None, out=var)
    textured = var >= params.min_texture

    # Candidates ordered by displacement magnitude so exact-SSD ties resolve
    # toward the smaller shift (and (0, 0) wins for identical frames).
    offsets = sorted(
        ((dx * dx + dy * dy, dy, dx) for dy in range(-sr, sr + 1) for dx in range(-sr, sr + 1))
    )
    best = np.full((h, w), np.inf)
    best_dx = np.zeros((h, w))
    best_dy = np.zeros((h, w))
    for _, dy, dx in offsets:
        # Wrap-around from roll only corrupts cells within `margin` of the
        # border, which the interior mask excludes.
        shifted = np.roll(ib, (-dy, -dx), axis=(0, 1))
        diff = ia - shifted
        ssd = uniform_filter(diff * diff, size)
        better = ssd < best
        best[better] = ssd[better]
        best_dx[better] = dx
        best_dy[better] = dy

    interior = np.zeros((h, w), bool)
    interior[margin:h - margin, margin:w - margin] = True

    vectors = np.stack([best_dx, best_dy], axis=-1)  # dt = 1
    magnitude = np.hypot(best_dx, best_dy)
    presence = interior & textured & (magnitude >= params.magnitude_floor)
    vectors[~presence] = 0.0
    return FlowField(w, h, vectors, presence)


def synthesize(spec: SyntheticGestureSpec, seed: int = 0) -> FlowSequence:
    """Render a flow sequence of noisy moving discs.

    Each active blob paints a disc of presence=True cells carrying its
    scheduled velocity plus per-cell uniform noise in ``[-noise, +noise]``.
    Blobs later in the list overwrite earlier ones at overlapping cells.
    Deterministic for a fixed spec and seed.
    """
    rng = np.random.default_rng(seed)
    h, w = spec.height, spec.width
    yy, xx = np.mgrid[0:h, 0:w]

    centers: list[dict[int, tuple[float, float]]] = []
    for blob in spec.blobs:
        first, last = blob.active
        cx, cy = blob.start
        per_frame = {}
        for t in range(first, last + 1):
            per_frame[t] = (cx, cy)
            vx, vy = blob.velocity_at(t - first)
            cx += vx * spec.dt
            cy += vy * spec.dt
        centers.append(per_frame)

    frames = []
    for t in range(spec.frame_count):
        vec = np.zeros((h, w, 2))
        pres = np.zeros((h, w), bool)
        for blob, per_frame in zip(spec.blobs, centers):
            if t not in per_frame:
                continue
            cx, cy = per_frame[t]
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= blob.radius ** 2
            count = int(mask.sum())
            if count == 0:
                continue
            v = np.array(blob.velocity_at(t - blob.active[0]))
            cell_vecs = np.tile(v, (count, 1))
            if spec.noise > 0:
                cell_vecs = cell_vecs + rng.uniform(-spec.noise, spec.noise, (count, 2))
            vec[mask] = cell_vecs
            pres[mask] = True
        frames.append(FlowField(w, h, vec, pres))
    return FlowSequence(tuple(frames), spec.dt)


def save_flows(seq: FlowSequence, path) -> None:
    """Write a ``.flows`` JSON file listing presence=True cells per frame.

    Floats are serialized with Python's shortest round-trip repr, so a
    subsequent load reproduces every value exactly.
    """
    obj = {
        "width": seq.width if seq.frames else 0,
        "height": seq.height if seq.frames else 0,
        "dt": seq.dt,
        "frames": [],
    }
    for f in seq.frames:
        ys, xs = np.nonzero(f.presence)
        cells = [
            [int(x), int(y), float(f.vectors[y, x, 0]), float(f.vectors[y, x, 1])]
            for y, x in zip(ys.tolist(), xs.tolist())
        ]
        obj["frames"].append({"cells": cells})
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_flows(path) -> FlowSequence:
    """Read a ``.flows`` JSON file written by :func:`save_flows`."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"cannot parse flow sequence {path}: {e}") from e
    try:
        width = int(obj["width"])
        height = int(obj["height"])
        dt = float(obj["dt"])
        frames = tuple(
            FlowField.from_cells(width, height, frame["cells"]) for frame in obj["frames"]
        )
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInputError(f"malformed flow sequence {path}: {e}") from e
    return FlowSequence(frames, dt)


def read_pgm(path) -> GrayFrame:
    """Read a PGM image (ASCII P2 or binary P5) as a GrayFrame.

    Intensities are divided by the file's maxval to land in [0, 1].
    """
    data = Path(path).read_bytes()
    if data[:2] not in (b"P2", b"P5"):
        raise InvalidInputError(f"{path}: not a PGM file (P2/P5)")
    binary = data[:2] == b"P5"

    # Header tokens: magic, width, height, maxval. '#' starts a comment.
    tokens = []
    pos = 2
    while len(tokens) < 3 and pos < len(data):
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace():
                pos += 1
            tokens.append(data[start:pos])
    if len(tokens) < 3:
        raise InvalidInputError(f"{path}: truncated PGM header")
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise InvalidInputError(f"{path}: bad PGM header: {e}") from e
    if width < 1 or height < 1 or not (0 < maxval < 65536):
        raise InvalidInputError(f"{path}: bad PGM dimensions or maxval")

    count = width * height
    if binary:
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        if len(data) - pos < count * dtype.itemsize:
            raise InvalidInputError(f"{path}: PGM pixel data truncated")
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
        values = raw.astype(np.float64)
    else:
        body = data[pos:].split()
        if len(body) < count:
            raise InvalidInputError(f"{path}: PGM pixel data truncated")
        values = np.array([int(t) for t in body[:count]], dtype=np.float64)
    if values.size < count:
        raise InvalidInputError(f"{path}: PGM pixel data truncated")
    if values.max(initial=0) > maxval:
        raise InvalidInputError(f"{path}: PGM sample exceeds maxval")
    intensity = (values / maxval).reshape(height, width)
    return GrayFrame(width, height, intensity)
