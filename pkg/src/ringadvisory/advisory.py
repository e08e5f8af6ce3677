"""Observation construction, action grids, and the advisory policy roster.

Policy kinds:
  osl  — constant equilibrium-speed advice (no network)
  pcp  — piecewise-constant base policy over the speed grid
  rp   — residual offset policy over a frozen pcp base
  perp — residual conditioned on inferred driver-trait latents
  tarp — residual conditioned on ground-truth trait encoding (oracle)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .driver import DriverTraits
from .nn import PerceptronNet, sample_categorical
from .sim import FleetState, RingConfig, equilibrium_speed, gaps

HIDDEN_SIZES = (64, 64)
LATENT_DIM = 4  # two 2-dim trait latents, concatenated [delay, offset]
TRAIT_DIM = 2

KIND_OSL = "osl"
KIND_PCP = "pcp"
KIND_RP = "rp"
KIND_PERP = "perp"
KIND_TARP = "tarp"
RESIDUAL_KINDS = (KIND_RP, KIND_PERP, KIND_TARP)

# bump when the network input assembly changes; stored in archives and
# checked on load so stale weights cannot be silently misapplied
INPUT_LAYOUT_VERSION = "v1:obs3+base1[+latent4|+traits2]"


def build_observation(fleet: FleetState, cfg: RingConfig) -> np.ndarray:
    """Normalized (ego speed, leader speed, leader headway) triple."""
    e = fleet.ego_index
    leader = (e + 1) % cfg.n_vehicles
    h_max = cfg.circumference
    return np.array(
        [
            fleet.speeds[e] / cfg.v_max,
            fleet.speeds[leader] / cfg.v_max,
            gaps(fleet, cfg)[e] / h_max,
        ]
    )


@dataclass(frozen=True)
class ActionGrid:
    """Base speed grid and symmetric residual offset grid."""

    a_max: float = 35.0
    spacing: float = 1.0
    n_actions: int = 10
    epsilon: float = 1.0

    @property
    def base(self) -> np.ndarray:
        return np.arange(0.0, self.a_max + self.spacing / 2, self.spacing)

    @property
    def residual(self) -> np.ndarray:
        return np.arange(-self.n_actions, self.n_actions + 1) * self.epsilon

    def as_dict(self):
        return {
            "a_max": self.a_max,
            "spacing": self.spacing,
            "n_actions": self.n_actions,
            "epsilon": self.epsilon,
        }


def input_width(kind: str) -> int:
    if kind == KIND_PCP:
        return 3
    if kind == KIND_RP:
        return 4
    if kind == KIND_PERP:
        return 4 + LATENT_DIM
    if kind == KIND_TARP:
        return 4 + TRAIT_DIM
    raise ValueError(f"kind {kind!r} has no network input")


@dataclass
class PolicyModel:
    kind: str
    delta: int
    grid: ActionGrid = field(default_factory=ActionGrid)
    net: PerceptronNet | None = None
    layout_version: str = INPUT_LAYOUT_VERSION

    def output_width(self) -> int:
        return len(self.base_actions()) if self.kind == KIND_PCP else len(self.grid.residual)

    def base_actions(self) -> np.ndarray:
        return self.grid.base

    def validate(self):
        if self.kind == KIND_OSL:
            if self.net is not None:
                raise ValueError("osl policy carries no network")
            return
        expect = [input_width(self.kind)] + list(HIDDEN_SIZES) + [self.output_width()]
        if self.net is None or self.net.sizes != expect:
            raise ValueError(f"{self.kind} network sizes {getattr(self.net, 'sizes', None)} != {expect}")


def make_policy(kind: str, delta: int, rng: np.random.Generator | None = None,
                grid: ActionGrid | None = None) -> PolicyModel:
    grid = grid or ActionGrid()
    if kind == KIND_OSL:
        return PolicyModel(kind=kind, delta=delta, grid=grid)
    out = len(grid.base) if kind == KIND_PCP else len(grid.residual)
    sizes = [input_width(kind)] + list(HIDDEN_SIZES) + [out]
    net = PerceptronNet(sizes, rng if rng is not None else np.random.default_rng(0))
    return PolicyModel(kind=kind, delta=delta, grid=grid, net=net)


def encode_traits(traits: DriverTraits) -> np.ndarray:
    """Ground-truth trait encoding fed to the oracle residual policy."""
    return np.array([traits.reaction_delay / 6.0, traits.offset / 7.5])


def _select(logits: np.ndarray, rng: np.random.Generator | None, greedy: bool) -> int:
    logits = logits.ravel()
    if greedy:
        return int(np.argmax(logits))
    if rng is None:
        raise ValueError("stochastic selection needs an rng")
    return sample_categorical(logits, rng)


def pcp_act(policy: PolicyModel, obs: np.ndarray, rng=None, greedy=False):
    """Base-grid speed advice. Returns (speed, action index)."""
    if policy.kind != KIND_PCP:
        raise ValueError(f"pcp_act on {policy.kind} policy")
    idx = _select(policy.net.logits(obs), rng, greedy)
    return float(policy.base_actions()[idx]), idx


def residual_input(policy: PolicyModel, obs: np.ndarray, base_action: float,
                   latent: np.ndarray | None) -> np.ndarray:
    if policy.kind not in RESIDUAL_KINDS:
        raise ValueError(f"residual input for {policy.kind} policy")
    if policy.kind == KIND_RP:
        if latent is not None:
            raise ValueError("rp takes no latent input")
        extra = []
    else:
        if latent is None:
            raise ValueError(f"{policy.kind} requires a latent/trait vector")
        latent = np.asarray(latent, dtype=np.float64).ravel()
        want = LATENT_DIM if policy.kind == KIND_PERP else TRAIT_DIM
        if latent.size != want:
            raise ValueError(f"{policy.kind} latent size {latent.size} != {want}")
        extra = [latent]
    return np.concatenate([np.asarray(obs).ravel(), [base_action / policy.grid.a_max], *extra])


def residual_act(policy: PolicyModel, obs: np.ndarray, base_action: float,
                 latent: np.ndarray | None = None, rng=None, greedy=False):
    """Residual-grid offset. Returns (offset, action index)."""
    x = residual_input(policy, obs, base_action, latent)
    idx = _select(policy.net.logits(x), rng, greedy)
    return float(policy.grid.residual[idx]), idx


def compose_advice(base: float, offset: float, grid: ActionGrid) -> float:
    return float(np.clip(base + offset, 0.0, grid.a_max))


def osl_act(cfg: RingConfig) -> float:
    return equilibrium_speed(cfg)


class HoldScheduler:
    """Keeps the advised speed constant for exactly `delta` consecutive steps."""

    def __init__(self, delta: int):
        if delta <= 0:
            raise ValueError("delta must be positive")
        self.delta = delta
        self.advice: float | None = None
        self._start: int | None = None

    def needs_new_action(self, t: int) -> bool:
        if self._start is None:
            return True
        return (t - self._start) % self.delta == 0

    def set_advice(self, advice: float, t: int):
        if self._start is None:
            self._start = t
        self.advice = float(advice)


def hold_tick(sched: HoldScheduler, t: int) -> bool:
    return sched.needs_new_action(t)
