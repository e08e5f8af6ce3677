"""Drive-server sessions: display predicate, scripted trials, record/replay."""

import json
import pathlib

import numpy as np
import pytest
from starlette.testclient import TestClient

from ringadvisory import config, server
from ringadvisory.sim import RingConfig


@pytest.fixture
def run_config():
    rc = config.RunConfig()
    rc.ring = RingConfig(circumference=126.0, n_vehicles=8, warmup_steps=200, horizon=400)
    return rc


def _client(rc, trial_seconds=10.0):
    app = server.make_app(rc, realtime=False, trial_seconds=trial_seconds)
    return app, TestClient(app)


def _drive(ws, accel_fn, max_steps=10_000):
    """Lock-step drive loop; returns (state messages, end message)."""
    states = [json.loads(ws.receive_text())]
    for k in range(max_steps):
        ws.send_text(json.dumps({"type": "control", "accel": accel_fn(k)}))
        msg = json.loads(ws.receive_text())
        if msg["type"] == "end":
            return states, msg
        states.append(msg)
    raise AssertionError("session never ended")


# -- display predicate -------------------------------------------------


def test_within_band_examples():
    assert server.within_band(9.3, 8.7)
    assert not server.within_band(10.0, 8.7)


def test_within_band_shared_vector_matches_console():
    """The 50-case vector shipped to the browser console mirrors this
    predicate; both sides must agree on every case."""
    path = (pathlib.Path(__file__).resolve().parents[1]
            / "frontend" / "test-vectors" / "band_cases.json")
    cases = json.loads(path.read_text())
    assert len(cases) == 50
    for case in cases:
        assert server.within_band(case["v"], case["advice"]) == case["within"]


def test_advice_for_display_band_clamped_at_zero():
    disp = server.advice_for_display(0.0)
    assert disp["red_line"] == 0.0
    assert disp["band"] == [0.0, 1.0]


def test_advice_for_display_centered():
    disp = server.advice_for_display(8.7)
    assert disp["band"] == pytest.approx([7.7, 9.7])


# -- scripted sessions -------------------------------------------------


def test_trial_message_count(run_config):
    # 10 s trial at 10 Hz: 100 driving steps -> 100 state messages
    # (initial handover state + 99 tick states) and one end message
    app, client = _client(run_config, trial_seconds=10.0)
    with client.websocket_connect("/session") as ws:
        ws.send_text(json.dumps({"type": "start", "policy": "osl", "delta": 50, "seed": 0}))
        states, end = _drive(ws, lambda k: 0.0)
    assert len(states) == 100
    assert end["type"] == "end" and not end["collided"]
    assert {"mu", "sigma", "cf"} <= set(end["metrics"])


def test_state_time_strictly_increasing_and_schema(run_config):
    app, client = _client(run_config, trial_seconds=5.0)
    with client.websocket_connect("/session") as ws:
        ws.send_text(json.dumps({"type": "start", "policy": "osl", "delta": 50, "seed": 1}))
        states, _ = _drive(ws, lambda k: 1.0 if k % 2 else -1.0)
    ts = [s["t"] for s in states]
    assert all(b > a for a, b in zip(ts, ts[1:]))
    first = states[0]
    assert set(first) == {"type", "t", "ego", "advice", "vehicles", "phase"}
    assert first["phase"] == "driving"
    assert len(first["vehicles"]) == run_config.ring.n_vehicles
    assert first["advice"]["band"] == 1.0


def test_no_control_keeps_ego_speed_constant(run_config):
    session = server.DriveSession(rc=run_config, trial_seconds=5.0)
    session.start("osl", 50, 0)
    v0 = float(session.fleet.speeds[0])
    session.tick(0.0)
    assert session.fleet.speeds[0] == pytest.approx(v0, abs=1e-9)


def test_control_clamped_to_accel_bound(run_config):
    session = server.DriveSession(rc=run_config, trial_seconds=5.0)
    session.start("osl", 50, 0)
    session.tick(99.0)
    assert session.control_trace == [3.0]


def test_abort_yields_partial_metrics(run_config):
    app, client = _client(run_config, trial_seconds=60.0)
    with client.websocket_connect("/session") as ws:
        ws.send_text(json.dumps({"type": "start", "policy": "osl", "delta": 50, "seed": 2}))
        json.loads(ws.receive_text())
        for _ in range(5):
            ws.send_text(json.dumps({"type": "control", "accel": 0.5}))
            json.loads(ws.receive_text())
        ws.send_text(json.dumps({"type": "abort"}))
        end = json.loads(ws.receive_text())
    assert end["type"] == "end" and end["partial"]


def test_start_required_first(run_config):
    app, client = _client(run_config)
    with client.websocket_connect("/session") as ws:
        ws.send_text(json.dumps({"type": "control", "accel": 1.0}))
        msg = json.loads(ws.receive_text())
    assert msg["type"] == "error"


def test_residual_policy_rejected_for_driving(run_config):
    app, client = _client(run_config)
    with client.websocket_connect("/session") as ws:
        ws.send_text(json.dumps({"type": "start", "policy": "rp", "delta": 50, "seed": 0}))
        msg = json.loads(ws.receive_text())
    assert msg["type"] == "error"


def test_phase_transitions_monotone(run_config):
    session = server.DriveSession(rc=run_config, trial_seconds=0.5)
    assert session.phase == server.PHASE_LOBBY
    session.start("osl", 50, 0)
    assert session.phase == server.PHASE_DRIVING
    for _ in range(5):
        session.tick(0.0)
    assert session.phase == server.PHASE_ENDED
    with pytest.raises(RuntimeError):
        session.tick(0.0)
    with pytest.raises(RuntimeError):
        session.start("osl", 50, 0)


def test_collision_ends_trial(run_config):
    rc = run_config
    rc.ring = rc.ring.with_(warmup_steps=100)
    session = server.DriveSession(rc=rc, trial_seconds=600.0)
    session.start("osl", 50, 0)
    end = None
    for _ in range(6000):
        msg = session.tick(3.0)  # floor the throttle into the leader
        if msg["type"] == "end":
            end = msg
            break
    assert end is not None and end["collided"]
    assert session.record.collided


# -- record/replay -----------------------------------------------------


def test_scripted_session_replay_bit_identical(run_config):
    app, client = _client(run_config, trial_seconds=8.0)
    rng = np.random.default_rng(42)
    with client.websocket_connect("/session") as ws:
        ws.send_text(json.dumps({"type": "start", "policy": "osl", "delta": 50, "seed": 7}))
        _drive(ws, lambda k: float(rng.uniform(-3, 3)))
    live = app.state.last_session
    replayed = server.replay_session(run_config, None, "osl", 50, 7, live.control_trace)
    assert server.records_equal(live.record, replayed.record)
    assert live.metrics() == replayed.metrics()


def test_replay_of_replay_stable(run_config):
    trace = list(np.linspace(-3, 3, 40))
    a = server.replay_session(run_config, None, "osl", 50, 9, trace)
    b = server.replay_session(run_config, None, "osl", 50, 9, trace)
    assert server.records_equal(a.record, b.record)
