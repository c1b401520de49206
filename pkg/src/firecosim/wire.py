"""Message payload types, their binary codecs, and TCP envelope framing.

Envelope frame (little-endian):
    u32  body length
    body:
      u16  topic name length, then topic utf-8
      u64  sequence number
      f64  stamp, source-clock seconds
      payload bytes (per-topic codec below)

Payload layouts:
    pose       7*f64: x y z, unit quaternion w x y z
    depth      u32 w, u32 h, then w*h f32 row-major meters (+inf = background)
    rgb        u32 w, u32 h, then w*h*3 u8 row-major
    composite  u64 source_seq, then an rgb payload
    thermal    u16 count, per sensor: u16 id length + id, f64 raw, f64
               filtered, f64 dose (kW/m^2, kW/m^2, kJ/m^2)
    odom       4*f64: x y heading speed
    cmd_vel    2*f64: vx vy (world frame, m/s)
    steering   1*f64 degrees in [-90, 90]
    costmap    occupancy-grid message (see costmap module)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import costmap as costmap_mod


class SchemaError(TypeError):
    pass


class FrameError(ValueError):
    pass


@dataclass
class PoseMsg:
    position: tuple  # (x, y, z)
    quaternion: tuple  # (w, x, y, z)


@dataclass
class ImageMsg:
    width: int
    height: int
    pixels: np.ndarray  # (h, w, 3) u8


@dataclass
class DepthMsg:
    width: int
    height: int
    depth: np.ndarray  # (h, w) f32 meters


@dataclass
class CompositeMsg:
    source_seq: int
    image: ImageMsg


@dataclass
class ThermalReading:
    id: str
    raw: float
    filtered: float
    dose: float


@dataclass
class ThermalMsg:
    readings: list


@dataclass
class OdomMsg:
    x: float
    y: float
    heading: float
    speed: float


@dataclass
class CmdVelMsg:
    vx: float
    vy: float


@dataclass
class SteeringMsg:
    degrees: float


class Codec:
    """Encode/decode one payload type; `kind` names the wire layout."""

    kind = "raw"
    payload_type = bytes

    def validate(self, obj):
        if not isinstance(obj, self.payload_type):
            raise SchemaError(f"expected {self.payload_type.__name__}, got {type(obj).__name__}")

    def encode(self, obj) -> bytes:
        raise NotImplementedError

    def decode(self, buf: bytes):
        raise NotImplementedError


class PoseCodec(Codec):
    kind = "pose"
    payload_type = PoseMsg

    def encode(self, obj):
        return struct.pack("<7d", *obj.position, *obj.quaternion)

    def decode(self, buf):
        v = struct.unpack("<7d", buf)
        return PoseMsg(position=v[:3], quaternion=v[3:])


class ImageCodec(Codec):
    kind = "rgb"
    payload_type = ImageMsg

    def validate(self, obj):
        super().validate(obj)
        if obj.pixels.shape != (obj.height, obj.width, 3) or obj.pixels.dtype != np.uint8:
            raise SchemaError("rgb pixels must be (h, w, 3) uint8")

    def encode(self, obj):
        return struct.pack("<II", obj.width, obj.height) + obj.pixels.tobytes()

    def decode(self, buf):
        w, h = struct.unpack_from("<II", buf, 0)
        data = np.frombuffer(buf, dtype=np.uint8, offset=8)
        if len(data) != w * h * 3:
            raise FrameError("rgb payload length mismatch")
        return ImageMsg(width=w, height=h, pixels=data.reshape(h, w, 3).copy())


class DepthCodec(Codec):
    kind = "depth"
    payload_type = DepthMsg

    def validate(self, obj):
        super().validate(obj)
        if obj.depth.shape != (obj.height, obj.width):
            raise SchemaError("depth must be (h, w)")

    def encode(self, obj):
        return struct.pack("<II", obj.width, obj.height) + obj.depth.astype("<f4").tobytes()

    def decode(self, buf):
        w, h = struct.unpack_from("<II", buf, 0)
        data = np.frombuffer(buf, dtype="<f4", offset=8)
        if len(data) != w * h:
            raise FrameError("depth payload length mismatch")
        return DepthMsg(width=w, height=h, depth=data.reshape(h, w).astype(np.float64))


class CompositeCodec(Codec):
    kind = "composite"
    payload_type = CompositeMsg

    def __init__(self):
        self._img = ImageCodec()

    def validate(self, obj):
        if not isinstance(obj, CompositeMsg):
            raise SchemaError("expected CompositeMsg")
        self._img.validate(obj.image)

    def encode(self, obj):
        return struct.pack("<Q", obj.source_seq) + self._img.encode(obj.image)

    def decode(self, buf):
        (seq,) = struct.unpack_from("<Q", buf, 0)
        return CompositeMsg(source_seq=seq, image=self._img.decode(buf[8:]))


class ThermalCodec(Codec):
    kind = "thermal"
    payload_type = ThermalMsg

    def encode(self, obj):
        out = [struct.pack("<H", len(obj.readings))]
        for r in obj.readings:
            rid = r.id.encode("utf-8")
            out.append(struct.pack("<H", len(rid)) + rid)
            out.append(struct.pack("<3d", r.raw, r.filtered, r.dose))
        return b"".join(out)

    def decode(self, buf):
        (n,) = struct.unpack_from("<H", buf, 0)
        off = 2
        readings = []
        for _ in range(n):
            (ln,) = struct.unpack_from("<H", buf, off)
            off += 2
            rid = buf[off:off + ln].decode("utf-8")
            off += ln
            raw, filt, dose = struct.unpack_from("<3d", buf, off)
            off += 24
            readings.append(ThermalReading(id=rid, raw=raw, filtered=filt, dose=dose))
        return ThermalMsg(readings=readings)


class OdomCodec(Codec):
    kind = "odom"
    payload_type = OdomMsg

    def encode(self, obj):
        return struct.pack("<4d", obj.x, obj.y, obj.heading, obj.speed)

    def decode(self, buf):
        return OdomMsg(*struct.unpack("<4d", buf))


class CmdVelCodec(Codec):
    kind = "cmd_vel"
    payload_type = CmdVelMsg

    def encode(self, obj):
        return struct.pack("<2d", obj.vx, obj.vy)

    def decode(self, buf):
        return CmdVelMsg(*struct.unpack("<2d", buf))


class SteeringCodec(Codec):
    kind = "steering"
    payload_type = SteeringMsg

    def validate(self, obj):
        super().validate(obj)
        if not -90.0 <= obj.degrees <= 90.0:
            raise SchemaError("steering must lie in [-90, 90] degrees")

    def encode(self, obj):
        return struct.pack("<d", obj.degrees)

    def decode(self, buf):
        return SteeringMsg(*struct.unpack("<d", buf))


class CostmapCodec(Codec):
    kind = "costmap"
    payload_type = bytes

    def validate(self, obj):
        if not isinstance(obj, (bytes, bytearray)):
            raise SchemaError("costmap payload must be encoded occupancy bytes")

    def encode(self, obj):
        return bytes(obj)

    def decode(self, buf):
        return costmap_mod.decode_occupancy_message(buf)


# ---------------------------------------------------------------------------
# Envelope framing
# ---------------------------------------------------------------------------

_HEAD = struct.Struct("<I")


def encode_envelope(topic: str, seq: int, stamp: float, payload: bytes) -> bytes:
    t = topic.encode("utf-8")
    body = struct.pack("<H", len(t)) + t + struct.pack("<Qd", seq, stamp) + payload
    return _HEAD.pack(len(body)) + body


def decode_envelope(body: bytes):
    """Decode a frame body (without the length prefix)."""
    try:
        (tl,) = struct.unpack_from("<H", body, 0)
        topic = body[2:2 + tl].decode("utf-8")
        seq, stamp = struct.unpack_from("<Qd", body, 2 + tl)
    except (struct.error, UnicodeDecodeError) as e:
        raise FrameError(f"malformed envelope: {e}") from None
    payload = body[2 + tl + 16:]
    return topic, seq, stamp, payload


def read_frame(sock) -> bytes | None:
    """Read one length-prefixed frame from a socket; None on clean EOF."""
    head = _read_exact(sock, 4)
    if head is None:
        return None
    (length,) = _HEAD.unpack(head)
    body = _read_exact(sock, length)
    if body is None:
        raise FrameError("connection closed mid-frame")
    return body


def _read_exact(sock, n):
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            if buf:
                raise FrameError("connection closed mid-frame")
            return None
        buf += chunk
    return buf
