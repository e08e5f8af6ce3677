"""Run configuration: INI-style config files and named seed sub-streams."""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields

import numpy as np

from .sim import RingConfig
from .trainer import RewardParams, TrainConfig

CONFIG_VERSION = 1


def substream_seed(master_seed: int, name: str) -> int:
    """Deterministic per-module seed derived from the run seed."""
    digest = hashlib.sha256(f"{master_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little") % (2 ** 63)


def substream(master_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(substream_seed(master_seed, name))


@dataclass
class RunConfig:
    ring: RingConfig = field(default_factory=RingConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    reward: RewardParams = field(default_factory=RewardParams)
    policy_kind: str = "pcp"
    delta: int = 50
    seed: int = 0
    eval_episodes: int = 100
    traits: str = "random"  # random | perfect | offset=<v> | delay=<v>[,offset=<v>]
    out_dir: str = "out"


def _apply_section(obj, section):
    """Set dataclass fields from a configparser section, type-coerced."""
    valid = {f.name: f.type for f in fields(obj)}
    for key, raw in section.items():
        if key not in valid:
            raise ValueError(f"unknown config key {key!r} in section")
        cur = getattr(obj, key)
        if isinstance(cur, bool):
            val = raw.strip().lower() in ("1", "true", "yes", "on")
        elif isinstance(cur, int):
            val = int(raw)
        elif isinstance(cur, float):
            val = float(raw)
        else:
            val = raw
        setattr(obj, key, val)


def load_run_config(path) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(path)
    if parser.has_option("meta", "config_version"):
        version = parser.getint("meta", "config_version")
        if version != CONFIG_VERSION:
            raise ValueError(f"config version {version} unsupported (want {CONFIG_VERSION})")
    rc = RunConfig()
    if parser.has_section("ring"):
        _apply_section(rc.ring, parser["ring"])
        rc.ring.__post_init__()
    if parser.has_section("train"):
        _apply_section(rc.train, parser["train"])
        rc.train.__post_init__()
    if parser.has_section("reward"):
        _apply_section(rc.reward, parser["reward"])
        rc.reward.__post_init__()
    if parser.has_section("run"):
        for key in parser["run"]:
            if key not in ("policy_kind", "delta", "seed", "eval_episodes", "traits", "out_dir"):
                raise ValueError(f"unknown [run] key {key!r}")
        sec = parser["run"]
        rc.policy_kind = sec.get("policy_kind", rc.policy_kind)
        rc.delta = sec.getint("delta", rc.delta)
        rc.seed = sec.getint("seed", rc.seed)
        rc.eval_episodes = sec.getint("eval_episodes", rc.eval_episodes)
        rc.traits = sec.get("traits", rc.traits)
        rc.out_dir = sec.get("out_dir", rc.out_dir)
    return rc
