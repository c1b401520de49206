import json
import struct
import time

import pytest

from firecosim.teleop import FRAME_COMPOSITE, FRAME_COSTMAP, TeleopSession, build_app


@pytest.fixture
def session(tmp_path):
    s = TeleopSession(scenario_name="bc_corridor", seed=0, out_dir=tmp_path,
                      camera_shape=(32, 24))
    s.start()
    yield s
    s.stop()


def test_session_state_and_steering(session):
    time.sleep(0.6)
    state = json.loads(session.state_json())
    assert state["type"] == "state"
    assert not state["recording"]
    assert len(state["fires"]) == 1
    x0 = state["odom"]["x"]
    session.handle_steer(0.0)
    time.sleep(0.5)
    x1 = json.loads(session.state_json())["odom"]["x"]
    assert x1 > x0 + 0.2  # drove forward at ~1 m/s


def test_session_steer_clamped(session):
    session.handle_steer(500.0)  # clamped, not rejected
    time.sleep(0.2)
    assert json.loads(session.state_json())["odom"] is not None


def test_record_produces_csv(session, tmp_path):
    session.record_start()
    session.handle_steer(0.0)
    time.sleep(1.2)
    info = session.record_stop()
    assert info is not None
    assert info["samples"] >= 15  # ~20 Hz sampling
    # did not reach the goal: marked invalid
    assert not info["valid"]
    assert info["file"].endswith(".invalid.csv")
    assert (tmp_path / "demos").exists()


def test_record_stop_without_start_is_noop(session):
    assert session.record_stop() is None


def test_binary_frames(session):
    time.sleep(1.0)
    frame = session.composite_frame()
    assert frame is not None
    kind, w, h = struct.unpack_from("<BII", frame, 0)
    assert kind == FRAME_COMPOSITE and (w, h) == (32, 24)
    assert len(frame) == 9 + w * h * 3
    cm = session.costmap_frame()
    assert cm is not None and cm[0] == FRAME_COSTMAP


def test_websocket_round_trip(tmp_path):
    # starlette's TestClient drives the websocket handler without a network
    from starlette.testclient import TestClient

    session = TeleopSession(scenario_name="bc_corridor", seed=0, out_dir=tmp_path,
                            camera_shape=(16, 12))
    session.start()
    try:
        app = build_app(session)
        with TestClient(app) as client:
            with client.websocket_connect("/teleop") as ws:
                first = json.loads(ws.receive_text())
                assert first["type"] == "state"
                ws.send_text(json.dumps({"type": "steer", "degrees": 10.0}))
                ws.send_text("this is not json")  # dropped, no crash
                ws.send_text(json.dumps({"type": "record", "action": "start"}))
                time.sleep(0.6)
                ws.send_text(json.dumps({"type": "record", "action": "stop"}))
                deadline = time.time() + 5.0
                saw_composite = False
                demo_count = 0
                while time.time() < deadline:
                    msg = ws.receive()
                    if "text" in msg:
                        state = json.loads(msg["text"])
                        demo_count = state["demo_count"]
                        if demo_count >= 1 and saw_composite:
                            break
                    elif "bytes" in msg:
                        if msg["bytes"][0] == FRAME_COMPOSITE:
                            saw_composite = True
                assert demo_count >= 1
                assert saw_composite
    finally:
        session.stop()
