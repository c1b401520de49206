"""Real-time teleoperation server.

Runs the fire and robot loops on wall-clock threads and exposes a websocket
at /teleop for the browser client. Text frames carry JSON state (odometry,
sensor readings with staleness, recording status); binary frames carry the
composited camera image and the thermal costmap, each tagged with a one-byte
type prefix (0x01 composite, 0x02 costmap). Incoming JSON messages:
    {"type": "steer", "degrees": d}     published on teleop/steering
    {"type": "record", "action": "start"|"stop"}
A demo started with "record" is written as a CSV on stop; it is valid only if
the robot reached the goal. Starting a recording teleports the robot back to
the scenario start.
"""

from __future__ import annotations

import json
import math
import struct
import threading
from pathlib import Path

import numpy as np

from . import bridge, costmap as costmap_mod, loops
from .bc.dataset import Demo, DemoSample, write_demo_csv
from .bridge import (TOPIC_COMPOSITE, TOPIC_COSTMAP, TOPIC_ODOM, TOPIC_STEERING,
                     TOPIC_THERMAL, Bus, register_standard_topics)
from .runtime import ThreadedLoop, WallClock
from .scenario import load_scenario
from .wire import SteeringMsg

FRAME_COMPOSITE = 0x01
FRAME_COSTMAP = 0x02

CONTROL_RATE = 20.0
GOAL_TOLERANCE = 0.5


class TeleopSession:
    """Owns the real-time loops, steering input, and demo recording."""

    def __init__(self, scenario_name="bc_corridor", seed=0, out_dir="out",
                 fire_dt=0.05, camera_shape=(160, 120)):
        self.scenario = load_scenario(scenario_name)
        self.out_dir = Path(out_dir)
        self.clock = WallClock()
        self.bus = Bus()
        register_standard_topics(self.bus, fire_period=fire_dt)
        self.fire = loops.FireLoop(self.scenario, self.bus, seed=seed, fire_dt=fire_dt,
                                   compositor=True, camera_shape=camera_shape)
        self.robot = loops.RobotLoop(self.scenario, self.bus, control="steering",
                                     speed=1.0, camera_shape=camera_shape)
        self._reset_flag = threading.Event()
        self._lock = threading.Lock()
        self.recording = False
        self.samples: list[DemoSample] = []
        self.demo_count = 0
        self.last_demo: dict | None = None
        self._loops = [
            ThreadedLoop(fire_dt, self.fire.tick, name="fire"),
            ThreadedLoop(self.robot.robot_dt, self._robot_tick, name="robot"),
            ThreadedLoop(1.0 / 15.0, self.robot.camera_tick, name="camera"),
            ThreadedLoop(1.0 / CONTROL_RATE, self._recorder_tick, name="recorder"),
        ]

    # -- lifecycle ---------------------------------------------------------

    def start(self):
        for lp in self._loops:
            lp.start()
        return self

    def stop(self):
        for lp in self._loops:
            lp.stop()

    # -- loop bodies -------------------------------------------------------

    def _robot_tick(self, now):
        if self._reset_flag.is_set():
            self._reset_flag.clear()
            start = self.scenario.robot_start
            self.robot.state.x, self.robot.state.y = start
            self.robot.state.heading = self.robot.axis_heading
        self.robot.tick(now)

    def _corner_readings(self, now):
        vals = {"FL": 0.0, "FR": 0.0, "RR": 0.0, "RL": 0.0}
        lat = self.bus.latest(TOPIC_THERMAL, now)
        stale = True
        if lat is not None:
            stale = lat.is_stale
            for r in lat.payload.readings:
                if r.id in vals:
                    vals[r.id] = r.filtered
        return vals, stale

    def _recorder_tick(self, now):
        with self._lock:
            if not self.recording:
                return
            st = self.robot.state
            vals, _ = self._corner_readings(now)
            lat = self.bus.latest(TOPIC_STEERING, now)
            deg = lat.payload.degrees if lat is not None else 0.0
            goal = self.scenario.robot_goal
            side = "left" if self.scenario.fires[0].center[1] > self.scenario.robot_start[1] \
                else "right"
            self.samples.append(DemoSample(
                stamp=now, q=(vals["FL"], vals["FR"], vals["RR"], vals["RL"]),
                dx=goal[0] - st.x, dy=goal[1] - st.y, steering=deg, side=side))

    # -- client commands ---------------------------------------------------

    def handle_steer(self, degrees: float):
        deg = float(np.clip(degrees, -90.0, 90.0))
        self.bus.publish(TOPIC_STEERING, SteeringMsg(degrees=deg), self.clock)

    def record_start(self):
        with self._lock:
            self.samples = []
            self.recording = True
        self._reset_flag.set()

    def record_stop(self):
        with self._lock:
            if not self.recording:
                return None
            self.recording = False
            samples = self.samples
            self.samples = []
        st = self.robot.state
        goal = self.scenario.robot_goal
        reached = math.hypot(st.x - goal[0], st.y - goal[1]) <= GOAL_TOLERANCE
        side = samples[0].side if samples else "left"
        demo = Demo(samples=samples, side=side, valid=reached and len(samples) > 0)
        path = write_demo_csv(self.out_dir / "demos" / f"demo_{self.demo_count:04d}.csv",
                              demo)
        self.demo_count += 1
        self.last_demo = {"file": str(path), "valid": demo.valid, "samples": len(samples)}
        return self.last_demo

    # -- outgoing state ----------------------------------------------------

    def state_json(self) -> str:
        now = self.clock.now()
        st = self.robot.state
        vals, stale = self._corner_readings(now)
        lat = self.bus.latest(TOPIC_ODOM, now)
        scn = self.scenario
        return json.dumps({
            "type": "state",
            "odom": {"x": st.x, "y": st.y, "heading": st.heading},
            "odom_stale": lat is None or lat.is_stale,
            "sensors": vals,
            "sensors_stale": stale,
            "recording": self.recording,
            "demo_count": self.demo_count,
            "last_demo": self.last_demo,
            "goal": list(scn.robot_goal),
            "start": list(scn.robot_start),
            "domain": list(scn.domain_size[:2]),
            "fires": [{"x": f.center[0], "y": f.center[1], "r": f.radius}
                      for f in scn.fires],
        })

    def composite_frame(self) -> bytes | None:
        lat = self.bus.latest(TOPIC_COMPOSITE, self.clock.now())
        if lat is None:
            return None
        img = lat.payload.image
        head = struct.pack("<BII", FRAME_COMPOSITE, img.width, img.height)
        return head + img.pixels.tobytes()

    def costmap_frame(self) -> bytes | None:
        lat = self.bus.latest(TOPIC_COSTMAP, self.clock.now())
        if lat is None:
            return None
        return struct.pack("<B", FRAME_COSTMAP) + bytes(lat.payload)


def build_app(session: TeleopSession):
    import asyncio

    from starlette.applications import Starlette
    from starlette.responses import JSONResponse
    from starlette.routing import Route, WebSocketRoute
    from starlette.websockets import WebSocketDisconnect

    async def health(request):
        return JSONResponse({"ok": True})

    async def teleop(ws):
        await ws.accept()
        await ws.send_text(session.state_json())

        async def sender():
            while True:
                await ws.send_text(session.state_json())
                frame = session.composite_frame()
                if frame is not None:
                    await ws.send_bytes(frame)
                cm = session.costmap_frame()
                if cm is not None:
                    await ws.send_bytes(cm)
                await asyncio.sleep(1.0 / 15.0)

        send_task = asyncio.ensure_future(sender())
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = json.loads(text)
                except json.JSONDecodeError:
                    continue  # malformed frame: drop
                if msg.get("type") == "steer":
                    try:
                        session.handle_steer(float(msg.get("degrees", 0.0)))
                    except (TypeError, ValueError):
                        continue
                elif msg.get("type") == "record":
                    if msg.get("action") == "start":
                        session.record_start()
                    else:
                        session.record_stop()
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()

    return Starlette(routes=[Route("/health", health),
                             WebSocketRoute("/teleop", teleop)])


def serve(scenario_name="bc_corridor", host="127.0.0.1", port=8765, seed=0,
          out_dir="out"):
    import uvicorn

    session = TeleopSession(scenario_name=scenario_name, seed=seed, out_dir=out_dir)
    session.start()
    app = build_app(session)
    print(f"teleop server on ws://{host}:{port}/teleop (scenario {scenario_name})")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        session.stop()
