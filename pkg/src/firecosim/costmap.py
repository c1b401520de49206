"""Ground-plane thermal costmap.

Radiation particles hitting the ground deposit energy into a 2-D accumulator.
Each fire step the accumulated irradiance is normalized to integer cost values
in [0, 100] (100 = `irradiance_scale` kW/m^2, saturating) and pushed into a
ring of the last N frames; the published map is the per-cell temporal mean.

Wire format (all little-endian):
    magic  4s   b"OGRD"
    stamp  f64  source-clock seconds
    frame  u16 length + utf-8 frame id
    resolution f64 meters/cell
    width  u32  cells (x)
    height u32  cells (y)
    origin 2*f64 meters (world position of cell (0,0) corner)
    data   width*height i8, row-major by rows of y
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field

import numpy as np

DEFAULT_RESOLUTION = 0.4  # m per cell
DEFAULT_SCALE = 83.0  # kW/m^2 mapped to cost 100
DEFAULT_WINDOW = 60  # frames averaged

MAGIC = b"OGRD"


class CodecError(ValueError):
    pass


class GroundAccumulator:
    """Per-step energy collector on the z=0 plane."""

    def __init__(self, width, height, resolution, origin=(0.0, 0.0)):
        self.width = int(width)
        self.height = int(height)
        self.resolution = float(resolution)
        self.origin = (float(origin[0]), float(origin[1]))
        self.energy = np.zeros((self.width, self.height))

    @classmethod
    def for_domain(cls, domain_size, resolution=DEFAULT_RESOLUTION):
        w = max(1, int(round(domain_size[0] / resolution)))
        h = max(1, int(round(domain_size[1] / resolution)))
        return cls(w, h, resolution)

    def deposit(self, xs, ys, energies):
        ix = np.floor((np.asarray(xs) - self.origin[0]) / self.resolution).astype(np.int64)
        iy = np.floor((np.asarray(ys) - self.origin[1]) / self.resolution).astype(np.int64)
        ok = (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)
        np.add.at(self.energy, (ix[ok], iy[ok]), np.asarray(energies)[ok])

    def raw_irradiance(self, dt: float) -> np.ndarray:
        """kW/m^2 per cell for a step of length dt; resets the accumulator."""
        cell_area = self.resolution**2
        raw = self.energy / (cell_area * dt) / 1e3
        self.energy = np.zeros_like(self.energy)
        return raw


def normalize_frame(raw: np.ndarray, scale: float = DEFAULT_SCALE) -> np.ndarray:
    """Map nonnegative irradiance (kW/m^2) to integer cost [0, 100],
    saturating at `scale`."""
    if np.any(raw < 0):
        raise ValueError("raw irradiance must be nonnegative")
    v = 100.0 * np.minimum(raw, scale) / scale
    return np.rint(v).astype(np.int16)


def temporal_average(frames) -> np.ndarray:
    """Per-cell integer mean of the available frames."""
    frames = list(frames)
    if not frames:
        raise ValueError("temporal_average needs at least one frame")
    acc = np.zeros(frames[0].shape, dtype=float)
    for f in frames:
        acc += f
    return np.rint(acc / len(frames)).astype(np.int16)


@dataclass
class ThermalCostmap:
    width: int
    height: int
    resolution: float = DEFAULT_RESOLUTION
    origin: tuple = (0.0, 0.0)
    irradiance_scale: float = DEFAULT_SCALE
    window: int = DEFAULT_WINDOW
    values: np.ndarray = None
    lethal: np.ndarray = None  # solid walls: not traversable at all
    frame_ring: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros((self.width, self.height), dtype=np.int16)
        if self.lethal is None:
            self.lethal = np.zeros((self.width, self.height), dtype=bool)
        self.frame_ring = deque(self.frame_ring, maxlen=self.window)

    @classmethod
    def for_domain(cls, domain_size, resolution=DEFAULT_RESOLUTION,
                   scale=DEFAULT_SCALE, window=DEFAULT_WINDOW):
        w = max(1, int(round(domain_size[0] / resolution)))
        h = max(1, int(round(domain_size[1] / resolution)))
        return cls(width=w, height=h, resolution=resolution,
                   irradiance_scale=scale, window=window)

    def mark_lethal_boxes(self, boxes, z_low=0.0, z_high=1.0):
        """Mark cells covered by solid boxes overlapping the robot height band."""
        xs = (np.arange(self.width) + 0.5) * self.resolution + self.origin[0]
        ys = (np.arange(self.height) + 0.5) * self.resolution + self.origin[1]
        cx, cy = np.meshgrid(xs, ys, indexing="ij")
        for b in boxes:
            if b.max[2] <= z_low or b.min[2] >= z_high:
                continue
            self.lethal |= ((cx >= b.min[0]) & (cx <= b.max[0])
                            & (cy >= b.min[1]) & (cy <= b.max[1]))

    def push_frame(self, frame: np.ndarray):
        if frame.shape != (self.width, self.height):
            raise ValueError("frame shape mismatch")
        self.frame_ring.append(frame.astype(np.int16))
        self.values = temporal_average(self.frame_ring)

    def cell_of(self, x, y):
        ix = int(np.floor((x - self.origin[0]) / self.resolution))
        iy = int(np.floor((y - self.origin[1]) / self.resolution))
        return ix, iy

    def center_of(self, ix, iy):
        return ((ix + 0.5) * self.resolution + self.origin[0],
                (iy + 0.5) * self.resolution + self.origin[1])

    def irradiance_at_value(self, value) -> float:
        """Invert the [0,100] normalization back to kW/m^2."""
        return float(value) * self.irradiance_scale / 100.0

    def copy_values(self) -> np.ndarray:
        return self.values.copy()


def to_occupancy_message(cm: ThermalCostmap, stamp: float, frame_id: str = "map") -> bytes:
    fid = frame_id.encode("utf-8")
    head = struct.pack("<4sdH", MAGIC, float(stamp), len(fid)) + fid
    head += struct.pack("<dII2d", cm.resolution, cm.width, cm.height,
                        cm.origin[0], cm.origin[1])
    data = np.ascontiguousarray(cm.values.T).astype(np.int8).tobytes()
    return head + data


def decode_occupancy_message(buf: bytes):
    """Inverse of to_occupancy_message; returns (costmap, stamp, frame_id)."""
    try:
        magic, stamp, fl = struct.unpack_from("<4sdH", buf, 0)
        off = struct.calcsize("<4sdH")
        if magic != MAGIC:
            raise CodecError("bad magic")
        frame_id = buf[off:off + fl].decode("utf-8")
        off += fl
        res, w, h, ox, oy = struct.unpack_from("<dII2d", buf, off)
        off += struct.calcsize("<dII2d")
    except struct.error as e:
        raise CodecError(f"truncated occupancy message: {e}") from None
    data = buf[off:]
    if len(data) != w * h:
        raise CodecError(f"data length {len(data)} != width*height {w * h}")
    values = np.frombuffer(data, dtype=np.int8).reshape(h, w).T.astype(np.int16)
    cm = ThermalCostmap(width=w, height=h, resolution=res, origin=(ox, oy))
    cm.values = values
    return cm, stamp, frame_id


def to_csv(cm: ThermalCostmap) -> str:
    lines = [",".join(str(int(cm.values[ix, iy])) for ix in range(cm.width))
             for iy in range(cm.height)]
    return "\n".join(lines) + "\n"


def to_pgm(cm: ThermalCostmap) -> bytes:
    """Grayscale PGM (P5), cost 0..100 stretched to 0..255, row y=0 at bottom."""
    img = (cm.values.T[::-1, :].astype(np.float64) * 255.0 / 100.0)
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    header = f"P5\n{cm.width} {cm.height}\n255\n".encode()
    return header + img.tobytes()
