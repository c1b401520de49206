"""Non-blocking, best-effort message bus with latest-value conflation.

Each topic is a single-value register: a publish atomically replaces the cell
content and a read returns the newest envelope without consuming it. Neither
side ever waits on the other; locks guard only the pointer swap. A per-topic
delay shim withholds envelopes for a configured time while preserving order
(used for the latency-robustness experiments). A TCP link can mirror selected
topics between two buses for a two-process deployment.
"""

from __future__ import annotations

import socket
import statistics
import struct
import threading
from collections import deque
from dataclasses import dataclass

from . import wire

# Topic names used across the system.
TOPIC_RGB = "camera/rgb"
TOPIC_DEPTH = "camera/depth"
TOPIC_POSE = "camera/pose"
TOPIC_COMPOSITE = "camera/composite"
TOPIC_THERMAL = "sensors/thermal"
TOPIC_COSTMAP = "costmap/thermal"
TOPIC_ODOM = "robot/odom"
TOPIC_CMD = "robot/cmd"
TOPIC_STEERING = "teleop/steering"
TOPIC_TRUTH_POSE = "metrics/pose"  # measurement probe, never delayed

ROBOT_TO_FIRE = (TOPIC_RGB, TOPIC_DEPTH, TOPIC_POSE, TOPIC_ODOM)
FIRE_TO_ROBOT = (TOPIC_COMPOSITE, TOPIC_THERMAL, TOPIC_COSTMAP)


class UnknownTopicError(KeyError):
    pass


@dataclass
class Envelope:
    topic: str
    seq: int
    stamp: float
    payload: object


@dataclass
class Latest:
    payload: object
    seq: int
    stamp: float
    age: float
    is_stale: bool


class _Cell:
    """Latest-value register plus the pending delay queue for one topic."""

    __slots__ = ("codec", "staleness_budget", "lock", "env", "next_seq",
                 "delay", "pending", "publish_count", "last_stamp")

    def __init__(self, codec, staleness_budget):
        self.codec = codec
        self.staleness_budget = staleness_budget
        self.lock = threading.Lock()
        self.env = None
        self.next_seq = 1
        self.delay = 0.0
        self.pending = deque()
        self.publish_count = 0
        self.last_stamp = -float("inf")


class Bus:
    """In-process conflating bus; one writer per topic, any number of readers."""

    def __init__(self):
        self._cells: dict[str, _Cell] = {}
        self._forwarders = []

    def register(self, topic: str, codec: wire.Codec, nominal_period: float = 0.1,
                 staleness_budget: float | None = None):
        if staleness_budget is None:
            staleness_budget = 3.0 * nominal_period
        self._cells[topic] = _Cell(codec, staleness_budget)

    def topics(self):
        return list(self._cells)

    def _cell(self, topic) -> _Cell:
        try:
            return self._cells[topic]
        except KeyError:
            raise UnknownTopicError(topic) from None

    def publish(self, topic: str, payload, clock) -> int:
        """Replace the topic cell; never blocks on readers or other loops."""
        cell = self._cell(topic)
        cell.codec.validate(payload)
        now = clock.now()
        with cell.lock:
            seq = cell.next_seq
            cell.next_seq += 1
            stamp = max(now, cell.last_stamp)  # per-topic stamps never regress
            cell.last_stamp = stamp
            env = Envelope(topic, seq, stamp, payload)
            if cell.delay > 0.0:
                cell.pending.append((now + cell.delay, env))
            else:
                cell.env = env
            cell.publish_count += 1
        for fwd in self._forwarders:
            fwd(env)
        return seq

    def latest(self, topic: str, now: float) -> Latest | None:
        """Newest envelope without removing it; never blocks."""
        cell = self._cell(topic)
        with cell.lock:
            while cell.pending and cell.pending[0][0] <= now:
                cell.env = cell.pending.popleft()[1]
            env = cell.env
        if env is None:
            return None
        age = now - env.stamp
        return Latest(payload=env.payload, seq=env.seq, stamp=env.stamp,
                      age=age, is_stale=age > cell.staleness_budget)

    def inject(self, topic: str, payload, seq: int, stamp: float):
        """Install an envelope received from a remote peer, keeping per-topic
        sequence numbers monotonic (stale arrivals are dropped)."""
        cell = self._cell(topic)
        with cell.lock:
            if cell.env is not None and seq <= cell.env.seq:
                return
            cell.env = Envelope(topic, seq, stamp, payload)
            cell.next_seq = max(cell.next_seq, seq + 1)
            cell.publish_count += 1

    def set_delay(self, topic: str, seconds: float):
        cell = self._cell(topic)
        with cell.lock:
            cell.delay = max(0.0, float(seconds))

    def pending_count(self, topic: str) -> int:
        cell = self._cell(topic)
        with cell.lock:
            return len(cell.pending)

    def publish_counts(self) -> dict:
        return {t: c.publish_count for t, c in sorted(self._cells.items())}

    def add_forwarder(self, fn):
        self._forwarders.append(fn)


def inject_delay(bus: Bus, direction: str, ms: float):
    """Withhold envelopes crossing between the simulators for `ms`.

    direction: "robot->fire", "fire->robot", or "both". Ordering within each
    topic is preserved; the metrics probe topic is never delayed.
    """
    if ms < 0:
        raise ValueError("delay must be >= 0")
    topics = []
    if direction in ("robot->fire", "both"):
        topics += [t for t in ROBOT_TO_FIRE if t in bus.topics()]
    if direction in ("fire->robot", "both"):
        topics += [t for t in FIRE_TO_ROBOT if t in bus.topics()]
    if not topics and direction not in ("robot->fire", "fire->robot", "both"):
        raise ValueError(f"unknown direction {direction!r}")
    for t in topics:
        bus.set_delay(t, ms / 1e3)


def register_standard_topics(bus: Bus, fire_period=0.05, robot_period=0.01,
                             camera_period=1.0 / 15.0, control_period=0.05):
    bus.register(TOPIC_RGB, wire.ImageCodec(), camera_period)
    bus.register(TOPIC_DEPTH, wire.DepthCodec(), camera_period)
    bus.register(TOPIC_POSE, wire.PoseCodec(), camera_period)
    bus.register(TOPIC_COMPOSITE, wire.CompositeCodec(), fire_period)
    bus.register(TOPIC_THERMAL, wire.ThermalCodec(), fire_period)
    bus.register(TOPIC_COSTMAP, wire.CostmapCodec(), fire_period)
    bus.register(TOPIC_ODOM, wire.OdomCodec(), robot_period)
    bus.register(TOPIC_CMD, wire.CmdVelCodec(), control_period)
    bus.register(TOPIC_STEERING, wire.SteeringCodec(), control_period)
    bus.register(TOPIC_TRUTH_POSE, wire.OdomCodec(), robot_period)


def measure_roundtrip(app, n_samples: int):
    """Publish camera triplets and time the matching composite's return.

    `app` is a co-simulation handle exposing publish_triplet() -> seq,
    wait_for_composite(seq, timeout) -> arrival time, and a clock (see
    loops.CoSim). Returns (mean_s, stddev_s). The absolute numbers are
    hardware- and configuration-specific.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    samples = []
    for _ in range(n_samples):
        t0 = app.clock.now()
        seq = app.publish_triplet()
        arrival = app.wait_for_composite(seq, timeout=10.0)
        if arrival is None:
            raise TimeoutError("no composite returned within 10 s")
        samples.append(arrival - t0)
    mean = statistics.fmean(samples)
    std = statistics.pstdev(samples) if len(samples) > 1 else 0.0
    return mean, std


# ---------------------------------------------------------------------------
# TCP link: mirrors selected topics of a local bus to a peer bus.
# ---------------------------------------------------------------------------

_HELLO = struct.Struct("<2d")


class TcpLink:
    """One endpoint of a bus-to-bus TCP connection.

    Envelopes published locally on `topics_out` are framed and sent; received
    envelopes are injected into the local bus with stamps shifted into the
    local clock using a single-round offset handshake.
    """

    def __init__(self, bus: Bus, sock: socket.socket, topics_out, clock):
        self.bus = bus
        self.sock = sock
        self.topics_out = set(topics_out)
        self.clock = clock
        self.offset = 0.0  # peer_clock - local_clock
        self._lock = threading.Lock()
        self._closed = False
        bus.add_forwarder(self._forward)
        self._reader = threading.Thread(target=self._read_loop, daemon=True)

    @classmethod
    def serve(cls, bus, host, port, topics_out, clock):
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host, port))
        srv.listen(1)
        conn, _ = srv.accept()
        srv.close()
        link = cls(bus, conn, topics_out, clock)
        # respond to the client's hello: echo t_client, send t_server
        body = wire.read_frame(conn)
        topic, _, _, payload = wire.decode_envelope(body)
        if topic != "__hello":
            raise wire.FrameError("expected clock handshake")
        (t_client, _) = _HELLO.unpack(payload)
        t_now = clock.now()
        link.offset = t_client - t_now  # one-way estimate, peer - local
        reply = _HELLO.pack(t_client, t_now)
        conn.sendall(wire.encode_envelope("__hello", 0, 0.0, reply))
        link._reader.start()
        return link

    @classmethod
    def connect(cls, bus, host, port, topics_out, clock, timeout=5.0):
        conn = socket.create_connection((host, port), timeout=timeout)
        conn.settimeout(None)
        link = cls(bus, conn, topics_out, clock)
        t0 = clock.now()
        conn.sendall(wire.encode_envelope("__hello", 0, 0.0, _HELLO.pack(t0, 0.0)))
        body = wire.read_frame(conn)
        _, _, _, payload = wire.decode_envelope(body)
        t_echo, t_server = _HELLO.unpack(payload)
        t1 = clock.now()
        link.offset = t_server - (t_echo + t1) / 2.0
        link._reader.start()
        return link

    def _forward(self, env: Envelope):
        if env.topic not in self.topics_out or self._closed:
            return
        cell = self.bus._cell(env.topic)
        data = cell.codec.encode(env.payload)
        frame = wire.encode_envelope(env.topic, env.seq, env.stamp, data)
        try:
            with self._lock:
                self.sock.sendall(frame)
        except OSError:
            self._closed = True

    def _read_loop(self):
        try:
            while not self._closed:
                body = wire.read_frame(self.sock)
                if body is None:
                    break
                topic, seq, stamp, payload = wire.decode_envelope(body)
                if topic.startswith("__"):
                    continue
                try:
                    cell = self.bus._cell(topic)
                except UnknownTopicError:
                    continue
                obj = cell.codec.decode(payload)
                self.bus.inject(topic, obj, seq, stamp - self.offset)
        except (OSError, wire.FrameError):
            pass
        finally:
            self._closed = True

    def close(self):
        self._closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()
