"""Objective episode metrics and figure-data exporters."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .sim import EpisodeRecord, RingConfig

# congestion factor is undefined at zero speed deviation; the floor caps
# it at mean speed + 3
SIGMA_FLOOR = 1e-3


@dataclass
class EpisodeMetrics:
    mu: float
    sigma: float
    cf: float
    collided: bool = False
    delta: int | None = None
    policy_kind: str | None = None
    traits: dict | None = None

    def as_dict(self):
        out = {"mu": self.mu, "sigma": self.sigma, "cf": self.cf, "collided": self.collided}
        if self.delta is not None:
            out["delta"] = self.delta
        if self.policy_kind is not None:
            out["policy_kind"] = self.policy_kind
        if self.traits is not None:
            out["traits"] = self.traits
        return out


def congestion_factor(mu: float, sigma: float) -> float:
    return mu - np.log10(max(sigma, SIGMA_FLOOR))


def compute_metrics(record: EpisodeRecord, window: tuple[int, int] | None = None,
                    **meta) -> EpisodeMetrics:
    """Population mean/std of the ego speed over the evaluation window.

    The window defaults to everything after the first advised step (the
    advice-active region); pass explicit (start, stop) step indices to
    override.
    """
    ego = record.ego_speed_array()
    if window is None:
        advised = np.isfinite(record.advice_array())
        start = int(np.argmax(advised)) if advised.any() else 0
        stop = len(ego)
    else:
        start, stop = window
    v = ego[start:stop]
    if v.size == 0:
        raise ValueError("empty evaluation window")
    mu = float(v.mean())
    sigma = float(v.std())
    return EpisodeMetrics(mu=mu, sigma=sigma, cf=float(congestion_factor(mu, sigma)),
                          collided=record.collided, **meta)


def export_space_time(record: EpisodeRecord, cfg: RingConfig, path):
    """Speed-vs-time CSV: t_seconds, advice, ego speed, then background speeds.

    A warmup_boundary column flags the first advised row.
    """
    speeds = record.speeds_array()
    advice = record.advice_array()
    advised = np.isfinite(advice)
    boundary = np.zeros(len(record), dtype=int)
    if advised.any():
        boundary[int(np.argmax(advised))] = 1
    n = cfg.n_vehicles
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_seconds", "advice", "warmup_boundary", "v_ego"]
                   + [f"v_{i}" for i in range(1, n)])
        for t in range(len(record)):
            background = [speeds[t, i] for i in range(n) if i != 0]
            w.writerow([t * cfg.dt, advice[t], boundary[t], record.ego_speed[t]] + background)


def unwrap_positions(positions: np.ndarray, circumference: float) -> np.ndarray:
    """Cumulatively unwrap ring positions per vehicle for plotting."""
    jumps = np.diff(positions, axis=0)
    jumps = np.where(jumps < -circumference / 2, jumps + circumference, jumps)
    out = np.vstack([positions[:1], positions[:1] + np.cumsum(jumps, axis=0)])
    return out


def export_position_time(record: EpisodeRecord, cfg: RingConfig, path):
    """Long-format CSV (t, vehicle_id, position, speed) with unwrapped positions."""
    speeds = record.speeds_array()
    unwrapped = unwrap_positions(record.positions_array(), cfg.circumference)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "vehicle_id", "position", "speed"])
        for t in range(len(record)):
            for i in range(cfg.n_vehicles):
                w.writerow([t, i, unwrapped[t, i], speeds[t, i]])


def summarize(metric_list: list[EpisodeMetrics]) -> dict:
    """Mean +/- std rows over seeds for one (policy, delta, trait) cell."""
    mus = np.array([m.mu for m in metric_list])
    sigmas = np.array([m.sigma for m in metric_list])
    cfs = np.array([m.cf for m in metric_list])
    return {
        "episodes": len(metric_list),
        "collisions": int(sum(m.collided for m in metric_list)),
        "cf_mean": float(cfs.mean()), "cf_std": float(cfs.std()),
        "mu_mean": float(mus.mean()), "mu_std": float(mus.std()),
        "sigma_mean": float(sigmas.mean()), "sigma_std": float(sigmas.std()),
    }
