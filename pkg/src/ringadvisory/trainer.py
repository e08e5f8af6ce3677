"""Reward computation, episode rollout, and on-policy policy-gradient training.

Training is vanilla REINFORCE at hold-period granularity: one decision per
hold period, per-step rewards summed within the period, discounted returns
across periods. Advantages subtract a per-decision-index moving-average
baseline and are normalized to unit variance before the update.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import advisory, driver, sim
from .nn import SGD, Tensor

COLLISION_PENALTY = -100.0


@dataclass
class RewardParams:
    alpha_speed: float = 1.0
    alpha_headway: float = 1.0
    alpha_action: float = 0.5
    # the action-deviation term acts as a penalty; sign exposed because the
    # intent of the term is easy to get backwards
    action_sign: float = -1.0

    def __post_init__(self):
        if min(self.alpha_speed, self.alpha_headway, self.alpha_action) < 0:
            raise ValueError("reward weights must be non-negative")


@dataclass
class TrainConfig:
    gamma: float = 0.99
    lr: float = 0.01
    iterations: int = 1000
    rollouts_per_update: int = 2
    seed: int = 0
    convergence_window: int = 50
    convergence_rel_tol: float = 0.01

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if self.iterations <= 0 or self.rollouts_per_update <= 0:
            raise ValueError("counts must be positive")


def reward_pc(fleet: sim.FleetState) -> float:
    return float(fleet.speeds[fleet.ego_index])


def reward_rp(fleet: sim.FleetState, cfg: sim.RingConfig, advice_t: float,
              advice_prev: float, params: RewardParams) -> float:
    """Congestion-mitigation term plus action-deviation term."""
    h = sim.gaps(fleet, cfg)
    cm = float(np.mean(params.alpha_speed * fleet.speeds - params.alpha_headway * h))
    return cm + params.action_sign * params.alpha_action * abs(advice_t - advice_prev)


@dataclass
class RolloutBatch:
    """Per-decision training data from one episode."""

    inputs: list = field(default_factory=list)  # network input vectors
    actions: list = field(default_factory=list)  # action indices
    rewards: list = field(default_factory=list)  # summed per hold period
    collided: bool = False

    def returns(self, gamma: float) -> np.ndarray:
        out = np.zeros(len(self.rewards))
        acc = 0.0
        for k in reversed(range(len(self.rewards))):
            acc = self.rewards[k] + gamma * acc
            out[k] = acc
        return out


def _advice_for_decision(policy, cfg, obs, rng, greedy, base_policy, latent):
    """Returns (advice, net input or None, action index or None, base action)."""
    if policy.kind == advisory.KIND_OSL:
        return advisory.osl_act(cfg), None, None, None
    if policy.kind == advisory.KIND_PCP:
        speed, idx = advisory.pcp_act(policy, obs, rng=rng, greedy=greedy)
        return speed, np.asarray(obs), idx, None
    base, _ = advisory.pcp_act(base_policy, obs, rng=rng, greedy=greedy)
    x = advisory.residual_input(policy, obs, base, latent)
    offset, idx = advisory.residual_act(policy, obs, base, latent=latent, rng=rng, greedy=greedy)
    return advisory.compose_advice(base, offset, policy.grid), x, idx, base


def rollout(
    policy: advisory.PolicyModel,
    cfg: sim.RingConfig,
    seed: int,
    *,
    base_policy: advisory.PolicyModel | None = None,
    traits: driver.DriverTraits | None = None,
    dti_models=None,  # DtiPair for perp rollouts
    reward: str = "rp",
    reward_params: RewardParams | None = None,
    greedy: bool = False,
    latent_mode: str = "sample",
    obs_window: int = 50,
):
    """Run one episode per the residual-policy training loop.

    Returns (RolloutBatch, EpisodeRecord). `traits` defaults to the
    perfect follower (used for base-policy training).
    """
    if policy.kind in advisory.RESIDUAL_KINDS and base_policy is None:
        raise ValueError("residual rollout needs a frozen base policy")
    if policy.kind == advisory.KIND_PERP and dti_models is None:
        raise ValueError("perp rollout needs trait-inference models")
    reward_params = reward_params or RewardParams()
    traits = traits or driver.PERFECT_FOLLOWER
    delta = policy.delta

    record = sim.EpisodeRecord()
    fleet, rng, _ = sim.make_warm_fleet(cfg, seed, record=record)
    policy_rng = np.random.default_rng([seed, 1])
    driver_rng = np.random.default_rng([seed, 2])

    # seed the observation window from the warm-up tail so the first trait
    # inference sees a full observation period
    window = deque(maxlen=obs_window)
    e = fleet.ego_index
    lead = (e + 1) % cfg.n_vehicles
    for s_row, h_row in zip(record.speeds[-obs_window:], record.headways[-obs_window:]):
        window.append(np.array([s_row[e] / cfg.v_max, s_row[lead] / cfg.v_max,
                                h_row[e] / cfg.circumference]))

    batch = RolloutBatch()
    buffer = driver.AdviceBuffer()
    sched = advisory.HoldScheduler(delta)
    advice_prev = None

    t = 0
    while t < cfg.horizon:
        if sched.needs_new_action(t):
            obs = advisory.build_observation(fleet, cfg)
            latent = None
            if policy.kind == advisory.KIND_PERP:
                latent = dti_models.infer(list(window), mode=latent_mode, rng=policy_rng)
            elif policy.kind == advisory.KIND_TARP:
                latent = advisory.encode_traits(traits)
            advice, x, idx, _ = _advice_for_decision(
                policy, cfg, obs, policy_rng, greedy, base_policy, latent
            )
            sched.set_advice(advice, t)
            if x is not None:
                batch.inputs.append(x)
                batch.actions.append(idx)
            batch.rewards.append(0.0)
            if advice_prev is None:
                advice_prev = advice  # no deviation penalty on the first decision
        advice = sched.advice
        buffer.push(advice)
        command = driver.filter_advice(buffer, t, traits, driver_rng, cfg.dt, cfg.v_max)
        try:
            if command is None:
                sim.step(fleet, cfg, rng, ego_mode=sim.EGO_AUTOPILOT)
            else:
                sim.step(fleet, cfg, rng, ego_mode=sim.EGO_SPEED, ego_value=command)
        except sim.CollisionError:
            batch.rewards[-1] += COLLISION_PENALTY
            batch.collided = True
            record.collided = True
            record.append(fleet, cfg, advice=advice,
                          driver_action=np.nan if command is None else command)
            return batch, record
        record.append(fleet, cfg, advice=advice,
                      driver_action=np.nan if command is None else command)
        window.append(advisory.build_observation(fleet, cfg))
        if reward == "pc":
            r = reward_pc(fleet)
        else:
            r = reward_rp(fleet, cfg, advice, advice_prev, reward_params)
        batch.rewards[-1] += r
        t += 1
        if sched.needs_new_action(t):
            advice_prev = advice
    return batch, record


def policy_gradient_update(net, inputs, action_idx, advantages, optimizer) -> float:
    """One advantage-weighted log-likelihood step. Returns the loss value."""
    x = Tensor(np.asarray(inputs, dtype=np.float64))
    logp = net.forward(x).log_softmax(axis=-1)
    rows = np.arange(len(action_idx))
    picked = logp[rows, np.asarray(action_idx)]
    loss = -(picked * np.asarray(advantages, dtype=np.float64)).mean()
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.data)


@dataclass
class LearningCurve:
    iterations: list = field(default_factory=list)
    mean_return: list = field(default_factory=list)

    def to_csv(self, path):
        rows = np.column_stack([self.iterations, self.mean_return])
        np.savetxt(path, rows, delimiter=",", header="iteration,mean_return", comments="")


def train(
    kind: str,
    cfg: sim.RingConfig,
    tcfg: TrainConfig,
    *,
    delta: int,
    base_policy: advisory.PolicyModel | None = None,
    dti_models=None,
    grid: advisory.ActionGrid | None = None,
    reward_params: RewardParams | None = None,
    randomize_traits: bool | None = None,
    progress=None,
):
    """Train a policy of the given kind; returns (policy, LearningCurve).

    pcp trains with the ego-speed reward and a perfect follower; residual
    kinds train with the congestion reward and per-episode random traits.
    """
    if kind not in (advisory.KIND_PCP,) + advisory.RESIDUAL_KINDS:
        raise ValueError(f"cannot train kind {kind!r}")
    master = np.random.default_rng(tcfg.seed)
    policy = advisory.make_policy(kind, delta, rng=master, grid=grid)
    policy.validate()
    if randomize_traits is None:
        randomize_traits = kind != advisory.KIND_PCP
    reward = "pc" if kind == advisory.KIND_PCP else "rp"
    base_hash = None
    if base_policy is not None:
        base_hash = _params_hash(base_policy)

    optimizer = SGD(policy.net.parameters(), tcfg.lr)
    curve = LearningCurve()
    traits_rng = np.random.default_rng(tcfg.seed + 77)
    seed_rng = np.random.default_rng(tcfg.seed + 177)
    bad_streak = 0
    # per-decision-index return baseline, tracked as an exponential moving
    # average across iterations; removes the dominant time-index and
    # trait-draw variance from the advantages
    baseline = np.zeros(0)
    baseline_seen = np.zeros(0, dtype=bool)

    for it in range(tcfg.iterations):
        batches = []
        ep_returns = []
        for _ in range(tcfg.rollouts_per_update):
            traits = driver.sample_traits(traits_rng) if randomize_traits else None
            ep_seed = int(seed_rng.integers(0, 2 ** 31))
            batch, _ = rollout(
                policy, cfg, ep_seed,
                base_policy=base_policy, traits=traits, dti_models=dti_models,
                reward=reward, reward_params=reward_params,
            )
            batches.append(batch)
            ep_returns.append(float(np.sum(batch.rewards)))
        batch_rets = [b.returns(tcfg.gamma) for b in batches]
        maxlen = max(len(r) for r in batch_rets)
        if maxlen > len(baseline):
            baseline = np.concatenate([baseline, np.zeros(maxlen - len(baseline))])
            baseline_seen = np.concatenate(
                [baseline_seen, np.zeros(maxlen - len(baseline_seen), dtype=bool)])
        for k in range(maxlen):
            vals = [r[k] for r in batch_rets if len(r) > k]
            m = float(np.mean(vals))
            baseline[k] = m if not baseline_seen[k] else 0.9 * baseline[k] + 0.1 * m
            baseline_seen[k] = True
        inputs, actions, advs = [], [], []
        for b, rets in zip(batches, batch_rets):
            for k in range(len(b.inputs)):
                inputs.append(b.inputs[k])
                actions.append(b.actions[k])
                advs.append(rets[k] - baseline[k])
        advantages = np.asarray(advs)
        advantages = advantages / (advantages.std() + 1e-8)
        loss = policy_gradient_update(policy.net, inputs, actions, advantages, optimizer)
        if not np.isfinite(loss):
            bad_streak += 1
            if bad_streak >= 3:
                raise RuntimeError("three consecutive non-finite losses, aborting")
            continue
        bad_streak = 0
        curve.iterations.append(it)
        curve.mean_return.append(float(np.mean(ep_returns)))
        if progress is not None:
            progress(it, curve.mean_return[-1])
        if _converged(curve.mean_return, tcfg):
            break

    if base_policy is not None and _params_hash(base_policy) != base_hash:
        raise RuntimeError("frozen base policy was mutated during training")
    return policy, curve


def _converged(mean_returns, tcfg: TrainConfig) -> bool:
    w = tcfg.convergence_window
    if len(mean_returns) < 2 * w:
        return False
    recent = np.mean(mean_returns[-w:])
    prev = np.mean(mean_returns[-2 * w:-w])
    return abs(recent - prev) / (abs(prev) + 1e-12) < tcfg.convergence_rel_tol


def _params_hash(policy: advisory.PolicyModel):
    import hashlib

    h = hashlib.sha256()
    for p in policy.net.parameters():
        h.update(p.data.tobytes())
    return h.hexdigest()
