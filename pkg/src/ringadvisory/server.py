"""Realtime human-in-the-loop drive server.

A single WebSocket session runs the ring simulation at 10 Hz with the ego
vehicle under human acceleration control while the advisory policy's held
advice is displayed. The session logic lives in DriveSession, a plain
object ticked one step at a time, so a recorded control trace can be
replayed offline and must reproduce the session's episode record exactly.
"""

from __future__ import annotations

import asyncio
import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import advisory, metrics, sim
from .config import RunConfig

PHASE_LOBBY = "lobby"
PHASE_WARMUP = "warmup-autopilot"
PHASE_DRIVING = "driving"
PHASE_ENDED = "ended"

TRIAL_SECONDS = 300.0
BAND_HALF_WIDTH = 1.0


def advice_for_display(advice: float) -> dict:
    """Red line at the advised speed, green band one m/s either side."""
    return {
        "red_line": float(advice),
        "band": [max(0.0, float(advice) - BAND_HALF_WIDTH), float(advice) + BAND_HALF_WIDTH],
    }


def within_band(v_ego: float, advice: float) -> bool:
    return abs(v_ego - advice) <= BAND_HALF_WIDTH


@dataclass
class DriveSession:
    """One human trial: accelerated warm-up, then 10 Hz human driving.

    The ego is controlled by raw acceleration commands in [-3, 3]; the
    advisory policy only produces the displayed advice. Exactly one
    controller owns the ego per phase: autopilot in warm-up, the human in
    the driving phase.
    """

    rc: RunConfig
    policy: advisory.PolicyModel | None = None
    trial_seconds: float = TRIAL_SECONDS
    session_id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    phase: str = PHASE_LOBBY
    fleet: sim.FleetState | None = None
    record: sim.EpisodeRecord = field(default_factory=sim.EpisodeRecord)
    control_trace: list = field(default_factory=list)
    partial: bool = False
    _scheduler: advisory.HoldScheduler | None = None
    _rng: np.random.Generator | None = None
    _drive_step: int = 0

    def start(self, policy_kind: str, delta: int, seed: int):
        if self.phase != PHASE_LOBBY:
            raise RuntimeError("session already started")
        if self.policy is not None:
            if policy_kind != self.policy.kind or delta != self.policy.delta:
                raise ValueError(
                    f"server holds a {self.policy.kind!r} policy with hold {self.policy.delta}")
        elif policy_kind == advisory.KIND_OSL:
            self.policy = advisory.make_policy(advisory.KIND_OSL, delta)
        else:
            raise ValueError(f"no archive loaded for policy {policy_kind!r}")
        if self.policy.kind in advisory.RESIDUAL_KINDS:
            raise ValueError("drive sessions support osl or pcp advice only")
        self.phase = PHASE_WARMUP
        # warm-up runs accelerated (not in wall-clock time)
        self.fleet, self._rng, _ = sim.make_warm_fleet(self.rc.ring, seed, record=self.record)
        self._scheduler = advisory.HoldScheduler(self.policy.delta)
        self._drive_step = 0
        self.phase = PHASE_DRIVING

    @property
    def max_drive_steps(self) -> int:
        return int(round(self.trial_seconds / self.rc.ring.dt))

    def _current_advice(self) -> float:
        if self._scheduler.needs_new_action(self._drive_step):
            if self.policy.kind == advisory.KIND_OSL:
                advice = advisory.osl_act(self.rc.ring)
            else:
                obs = advisory.build_observation(self.fleet, self.rc.ring)
                advice, _ = advisory.pcp_act(self.policy, obs, greedy=True)
            self._scheduler.set_advice(advice, self._drive_step)
        return self._scheduler.advice

    def tick(self, accel: float) -> dict:
        """Advance one 0.1 s step under the given human acceleration.

        Returns the state message for this step, or the end message when
        the step ends the trial (collision or time limit).
        """
        if self.phase != PHASE_DRIVING:
            raise RuntimeError(f"tick in phase {self.phase!r}")
        accel = float(np.clip(accel, -self.rc.ring.ego_accel_bound, self.rc.ring.ego_accel_bound))
        self.control_trace.append(accel)
        advice = self._current_advice()
        try:
            sim.step(self.fleet, self.rc.ring, self._rng,
                     ego_mode=sim.EGO_ACCEL, ego_value=accel)
        except sim.CollisionError:
            self.record.append(self.fleet, self.rc.ring, advice=advice, driver_action=accel)
            self.record.collided = True
            return self._finish()
        self.record.append(self.fleet, self.rc.ring, advice=advice, driver_action=accel)
        self._drive_step += 1
        if self._drive_step >= self.max_drive_steps:
            return self._finish()
        return self.state_message(advice)

    def state_message(self, advice: float) -> dict:
        e = self.fleet.ego_index
        return {
            "type": "state",
            "t": self.fleet.t,
            "ego": {"v": float(self.fleet.speeds[e]), "pos": float(self.fleet.positions[e])},
            "advice": {"v": float(advice), "band": BAND_HALF_WIDTH},
            "vehicles": [
                {"pos": float(p), "v": float(v)}
                for p, v in zip(self.fleet.positions, self.fleet.speeds)
            ],
            "phase": self.phase,
        }

    def abort(self) -> dict:
        self.partial = True
        return self._finish()

    def disconnect(self) -> dict:
        self.partial = True
        return self._finish()

    def _finish(self) -> dict:
        self.phase = PHASE_ENDED
        m = self.metrics()
        msg = {"type": "end",
               "metrics": {"mu": m.mu, "sigma": m.sigma, "cf": m.cf},
               "collided": m.collided, "partial": self.partial}
        return msg

    def metrics(self) -> metrics.EpisodeMetrics:
        """Metrics over the driving phase (the advised part of the record)."""
        return metrics.compute_metrics(
            self.record, policy_kind=self.policy.kind, delta=self.policy.delta)


def replay_session(rc: RunConfig, policy: advisory.PolicyModel | None, policy_kind: str,
                   delta: int, seed: int, control_trace) -> DriveSession:
    """Re-run a session offline from its logged control trace.

    The returned session's record and metrics are bit-identical to the
    live session that produced the trace.
    """
    session = DriveSession(rc=rc, policy=policy)
    session.start(policy_kind, delta, seed)
    for accel in control_trace:
        session.tick(accel)
        if session.phase == PHASE_ENDED:
            break
    if session.phase == PHASE_DRIVING:
        session.abort()
    return session


def records_equal(a: sim.EpisodeRecord, b: sim.EpisodeRecord) -> bool:
    """Bit-exact comparison of two episode records."""
    if len(a) != len(b) or a.collided != b.collided:
        return False
    return all(
        np.array_equal(getattr(a, name), getattr(b, name), equal_nan=True)
        for name in ("speeds", "headways", "positions", "advice", "driver_action", "ego_speed")
    )


def make_app(rc: RunConfig, policy: advisory.PolicyModel | None = None,
             realtime: bool = True, trial_seconds: float = TRIAL_SECONDS,
             static_dir=None):
    """Build the FastAPI app serving /session and the console bundle.

    With realtime=False (tests), the session runs in lock-step: the server
    waits for exactly one client message per tick, so scripted sessions
    are deterministic. In realtime mode a ticker paces steps at 100 ms and
    reads the latest control from a mailbox once per tick.
    """
    app = FastAPI()
    app.state.last_session = None

    @app.websocket("/session")
    async def session_ws(ws: WebSocket):
        await ws.accept()
        session = DriveSession(rc=rc, policy=policy, trial_seconds=trial_seconds)
        app.state.last_session = session
        try:
            msg = json.loads(await ws.receive_text())
            if msg.get("type") != "start":
                await ws.send_text(json.dumps(
                    {"type": "error", "message": "expected a start message"}))
                await ws.close()
                return
            try:
                session.start(msg.get("policy", "osl"), int(msg.get("delta", rc.delta)),
                              int(msg.get("seed", rc.seed)))
            except (ValueError, RuntimeError) as exc:
                await ws.send_text(json.dumps({"type": "error", "message": str(exc)}))
                await ws.close()
                return
            await ws.send_text(json.dumps(session.state_message(session._current_advice())))
            if realtime:
                await _run_realtime(ws, session)
            else:
                await _run_lockstep(ws, session)
        except WebSocketDisconnect:
            if session.phase == PHASE_DRIVING:
                session.disconnect()

    async def _run_lockstep(ws, session):
        while session.phase == PHASE_DRIVING:
            msg = json.loads(await ws.receive_text())
            if msg.get("type") == "abort":
                await ws.send_text(json.dumps(session.abort()))
                return
            accel = float(msg.get("accel", 0.0)) if msg.get("type") == "control" else 0.0
            await ws.send_text(json.dumps(session.tick(accel)))
        await ws.close()

    async def _run_realtime(ws, session):
        mailbox = {"accel": 0.0, "abort": False}

        async def reader():
            try:
                while True:
                    msg = json.loads(await ws.receive_text())
                    if msg.get("type") == "control":
                        mailbox["accel"] = float(msg.get("accel", 0.0))
                    elif msg.get("type") == "abort":
                        mailbox["abort"] = True
            except WebSocketDisconnect:
                mailbox["abort"] = True

        reader_task = asyncio.create_task(reader())
        period = session.rc.ring.dt
        deadline = time.monotonic()
        try:
            while session.phase == PHASE_DRIVING:
                if mailbox["abort"]:
                    await ws.send_text(json.dumps(session.abort()))
                    return
                out = session.tick(mailbox["accel"])
                await ws.send_text(json.dumps(out))
                deadline += period
                delay = deadline - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    deadline = time.monotonic()  # missed deadline; never skip sim time
        finally:
            reader_task.cancel()

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="console")
    return app


def serve(rc: RunConfig, policy=None, port: int = 8700, static_dir=None):
    import uvicorn

    if static_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend"
        static_dir = bundled if (bundled / "dist").is_dir() else None
    app = make_app(rc, policy=policy, static_dir=static_dir)
    uvicorn.run(app, host="127.0.0.1", port=port)
