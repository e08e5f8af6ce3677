"""Single-lane ring-road microsimulation.

Background vehicles follow the intelligent driver car-following law with
optional acceleration noise; the ego vehicle is either on autopilot (same
law), tracking a commanded speed, or driven by a raw acceleration command
(human drive mode). Integration is semi-implicit Euler: speeds update
first, then positions with the new speeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


class CollisionError(RuntimeError):
    """Raised when any bumper-to-bumper gap drops to zero or below."""

    def __init__(self, step: int):
        super().__init__(f"collision at step {step}")
        self.step = step


@dataclass
class RingConfig:
    circumference: float = 628.0
    n_vehicles: int = 40
    vehicle_length: float = 5.0
    dt: float = 0.1
    v_max: float = 35.0
    # intelligent-driver-model parameters (standard highway values)
    idm_v0: float = 30.0
    idm_T: float = 1.0
    idm_a_max: float = 1.0
    idm_b: float = 1.5
    idm_exponent: float = 4.0
    idm_s0: float = 2.0
    accel_noise_std: float = 0.2
    warmup_steps: int = 900
    horizon: int = 3000
    ego_accel_bound: float = 3.0
    # cap ego acceleration by the car-following law so that speed tracking
    # cannot drive the ego into its leader
    ego_safe_guard: bool = True

    def __post_init__(self):
        if self.circumference <= self.n_vehicles * self.vehicle_length:
            raise ValueError("ring shorter than total vehicle length")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        for name in ("idm_v0", "idm_T", "idm_a_max", "idm_b", "idm_exponent", "idm_s0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def with_(self, **kw) -> "RingConfig":
        return replace(self, **kw)


@dataclass
class FleetState:
    """Positions/speeds of all vehicles, ordered along the ring.

    Vehicle i's leader is vehicle (i+1) mod N; single-lane, no overtaking.
    """

    positions: np.ndarray
    speeds: np.ndarray
    ego_index: int = 0
    t: int = 0

    def copy(self) -> "FleetState":
        return FleetState(self.positions.copy(), self.speeds.copy(), self.ego_index, self.t)


@dataclass
class EpisodeRecord:
    """Per-step log of fleet speeds, headways, advice, and driver action."""

    speeds: list = field(default_factory=list)
    headways: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    advice: list = field(default_factory=list)
    driver_action: list = field(default_factory=list)
    ego_speed: list = field(default_factory=list)
    collided: bool = False

    def append(self, fleet: FleetState, cfg: RingConfig, advice=np.nan, driver_action=np.nan):
        self.speeds.append(fleet.speeds.copy())
        self.headways.append(gaps(fleet, cfg))
        self.positions.append(fleet.positions.copy())
        self.advice.append(float(advice))
        self.driver_action.append(float(driver_action))
        self.ego_speed.append(float(fleet.speeds[fleet.ego_index]))

    def __len__(self):
        return len(self.speeds)

    def speeds_array(self) -> np.ndarray:
        return np.asarray(self.speeds)

    def positions_array(self) -> np.ndarray:
        return np.asarray(self.positions)

    def headways_array(self) -> np.ndarray:
        return np.asarray(self.headways)

    def ego_speed_array(self) -> np.ndarray:
        return np.asarray(self.ego_speed)

    def advice_array(self) -> np.ndarray:
        return np.asarray(self.advice)

    def to_csv(self, path, cfg: RingConfig):
        """One row per step: t, advice, driver_action, v_0..v_{N-1}, h_0..h_{N-1}."""
        n = cfg.n_vehicles
        header = ["t", "advice", "driver_action"]
        header += [f"v_{i}" for i in range(n)] + [f"h_{i}" for i in range(n)]
        rows = np.column_stack(
            [
                np.arange(len(self)),
                self.advice_array(),
                np.asarray(self.driver_action),
                self.speeds_array(),
                self.headways_array(),
            ]
        )
        np.savetxt(path, rows, delimiter=",", header=",".join(header), comments="")


def gaps(fleet: FleetState, cfg: RingConfig) -> np.ndarray:
    """Bumper-to-bumper gap of each vehicle to its leader."""
    lead = np.roll(fleet.positions, -1)
    return (lead - fleet.positions - cfg.vehicle_length) % cfg.circumference


def idm_accel(v, v_leader, gap, cfg: RingConfig):
    """Car-following acceleration. Scalar or vectorized over arrays."""
    v = np.asarray(v, dtype=np.float64)
    v_leader = np.asarray(v_leader, dtype=np.float64)
    gap = np.asarray(gap, dtype=np.float64)
    if np.any(gap <= 0):
        raise ValueError("gap must be positive (collision state)")
    s_star = cfg.idm_s0 + np.maximum(
        0.0, v * cfg.idm_T + v * (v - v_leader) / (2.0 * np.sqrt(cfg.idm_a_max * cfg.idm_b))
    )
    a = cfg.idm_a_max * (1.0 - (v / cfg.idm_v0) ** cfg.idm_exponent - (s_star / gap) ** 2)
    return a if a.ndim else float(a)


def equilibrium_speed(cfg: RingConfig) -> float:
    """Noise-free uniform-flow fixed point: s0 + v*T = L/N - vehicle length."""
    spacing = cfg.circumference / cfg.n_vehicles - cfg.vehicle_length
    if spacing < cfg.idm_s0:
        raise ValueError("density infeasible: spacing below jam gap")
    return min((spacing - cfg.idm_s0) / cfg.idm_T, cfg.idm_v0, cfg.v_max)


def uniform_fleet(cfg: RingConfig, speed: float | None = None, ego_index: int = 0) -> FleetState:
    if speed is None:
        speed = equilibrium_speed(cfg)
    n = cfg.n_vehicles
    positions = np.arange(n) * (cfg.circumference / n)
    return FleetState(positions, np.full(n, float(speed)), ego_index=ego_index)


EGO_AUTOPILOT = "autopilot"
EGO_SPEED = "speed"
EGO_ACCEL = "accel"


def step(
    fleet: FleetState,
    cfg: RingConfig,
    rng: np.random.Generator | None = None,
    ego_mode: str = EGO_AUTOPILOT,
    ego_value: float = 0.0,
) -> FleetState:
    """Advance the fleet one time step in place.

    Raises CollisionError if any gap closes; the fleet is left at the
    colliding state so callers can inspect it.
    """
    g = gaps(fleet, cfg)
    v = fleet.speeds
    v_lead = np.roll(v, -1)
    accel = idm_accel(v, v_lead, g, cfg)
    if cfg.accel_noise_std > 0 and rng is not None:
        noise = rng.normal(0.0, cfg.accel_noise_std, size=cfg.n_vehicles)
        noise[fleet.ego_index] = 0.0  # background vehicles only
        accel = accel + noise

    e = fleet.ego_index
    if ego_mode == EGO_SPEED:
        track = np.clip((ego_value - v[e]) / cfg.dt, -cfg.ego_accel_bound, cfg.ego_accel_bound)
        accel[e] = min(track, accel[e]) if cfg.ego_safe_guard else track
    elif ego_mode == EGO_ACCEL:
        accel[e] = np.clip(ego_value, -cfg.ego_accel_bound, cfg.ego_accel_bound)
    elif ego_mode != EGO_AUTOPILOT:
        raise ValueError(f"unknown ego mode {ego_mode!r}")

    fleet.speeds = np.clip(v + accel * cfg.dt, 0.0, cfg.v_max)
    fleet.positions = (fleet.positions + fleet.speeds * cfg.dt) % cfg.circumference
    fleet.t += 1
    # signed gap update (the modular gap would wrap an overlap back to a
    # large positive value and hide the collision)
    g_new = g + (np.roll(fleet.speeds, -1) - fleet.speeds) * cfg.dt
    if np.any(g_new <= 0):
        raise CollisionError(fleet.t)
    return fleet


def warmup(fleet: FleetState, cfg: RingConfig, rng: np.random.Generator,
           record: EpisodeRecord | None = None) -> FleetState:
    """Run the all-autopilot wave-generating phase for cfg.warmup_steps."""
    for _ in range(cfg.warmup_steps):
        step(fleet, cfg, rng, ego_mode=EGO_AUTOPILOT)
        if record is not None:
            record.append(fleet, cfg)
    return fleet


def make_warm_fleet(cfg: RingConfig, seed: int, speed_jitter: float = 2.0,
                    max_retries: int = 10, record: EpisodeRecord | None = None):
    """Build a uniformly spaced fleet, perturb speeds, and warm it up.

    Seeds that collide during warm-up are rejected and retried with the
    next seed (the retry is logged in the returned seed).

    Returns (fleet, rng, used_seed).
    """
    for attempt in range(max_retries):
        used = seed + attempt * 10_000_019
        rng = np.random.default_rng(used)
        fleet = uniform_fleet(cfg)
        fleet.speeds = np.clip(
            fleet.speeds + rng.normal(0.0, speed_jitter, cfg.n_vehicles), 0.0, cfg.v_max
        )
        try:
            warmup(fleet, cfg, rng, record=record)
            return fleet, rng, used
        except CollisionError:
            if record is not None:
                for lst in (record.speeds, record.headways, record.positions,
                            record.advice, record.driver_action, record.ego_speed):
                    lst.clear()
            continue
    raise RuntimeError(f"warm-up collided for {max_retries} consecutive seeds from {seed}")
