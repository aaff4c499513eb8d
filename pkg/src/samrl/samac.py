"""Shaping-advice multi-agent actor-critic.

Per-agent decentralized Gaussian actors, per-agent centralized critics over
the concatenated observations, TD-error with advice, the look-ahead
potential correction, projected actor steps and two-timescale decaying
learning rates. Updates are online, one per environment step, with no
replay buffer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import _kernels as K
from .advice import (
    AdviceMode,
    PotentialSpec,
    Variant,
    look_ahead_advice,
    look_back_advice,
    make_anchors,
    potential,
)
from .errors import ConfigError, NumericsError
from .numkit import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    MlpParams,
    PolicyParams,
    ValueParams,
    flat_norm,
    grad_log_pi,
    mlp_grad,
    project_params_inplace,
)
from .particle_world import Environment, observe_all, write_trajectory_row

# Per-update clip on the norm of delta * grad, applied before the learning
# rate multiply. Implementation-level guard, not part of the update rule.
GRAD_CLIP = 10.0

_ONE = np.ones(1)


@dataclass(frozen=True)
class Hyperparams:
    """Learning constants. Decay exponents must lie in (0.5, 1] with the
    actor decaying faster than the critic (two-timescale condition)."""

    gamma: float = 0.95
    actor_lr0: float = 0.05
    critic_lr0: float = 0.3
    actor_decay_exp: float = 0.56
    critic_decay_exp: float = 0.51
    projection_radius: float = 40.0
    episode_limit: int = 10000

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        for name in ("actor_lr0", "critic_lr0", "projection_radius"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("actor_decay_exp", "critic_decay_exp"):
            e = getattr(self, name)
            if not 0.5 < e <= 1.0:
                raise ConfigError(f"{name} must lie in (0.5, 1], got {e}")
        if self.actor_decay_exp <= self.critic_decay_exp:
            raise ConfigError("actor_decay_exp must exceed critic_decay_exp")
        if self.episode_limit < 1:
            raise ConfigError("episode_limit must be positive")


@dataclass
class AgentLearner:
    """One agent's policy, critic and advice configuration."""

    policy: PolicyParams
    critic: ValueParams
    advice_mode: AdviceMode = AdviceMode.NONE
    potential_spec: Optional[PotentialSpec] = None

    def __post_init__(self):
        if self.advice_mode is not AdviceMode.NONE and self.potential_spec is None:
            raise ConfigError("advice mode set but no potential spec given")


@dataclass
class Transition:
    """One time-step record, as buffered by the episode-end baselines."""

    joint_obs: np.ndarray
    obs: list
    actions: np.ndarray  # raw sampled actions (pre-clip)
    rewards: np.ndarray
    potentials: np.ndarray
    advice: np.ndarray
    joint_obs_next: np.ndarray
    terminal: bool


@dataclass
class EpisodeLog:
    """Per-episode bookkeeping: environment returns, shaped returns and
    event counts. shaped - env equals the summed advice per agent."""

    env_returns: np.ndarray
    shaped_returns: np.ndarray
    advice_sums: np.ndarray
    length: int
    collisions: int = 0
    coverage_events: int = 0
    phi_first: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phi_last: np.ndarray = field(default_factory=lambda: np.zeros(0))


def td_error(
    r: float, f: float, v_s: float, v_next: float, gamma: float, terminal: bool
) -> float:
    """One-step TD-error with advice: r + F + gamma * V(s') - V(s).

    The bootstrap value is zero on terminal transitions.
    """
    if terminal:
        v_next = 0.0
    return r + f + gamma * v_next - v_s


def corrected_td(delta: float, phi_t: float, mode: AdviceMode) -> float:
    """Advice correction of the actor's TD-error.

    Look-ahead advice shifts the critic's value estimate by the current
    potential, so the actor adds phi back; look-back needs no correction.
    """
    if mode is AdviceMode.LOOK_AHEAD:
        return delta + phi_t
    return delta


def lr_schedule(h: Hyperparams, t: int):
    """(actor, critic) learning rates at update step t."""
    base = 1.0 + t
    return (
        h.actor_lr0 / base**h.actor_decay_exp,
        h.critic_lr0 / base**h.critic_decay_exp,
    )


def actor_update(
    learner: AgentLearner, delta_tilde: float, obs, action, alpha_theta: float, radius: float
) -> AgentLearner:
    """Projected ascent step along delta_tilde * grad log pi, then log-std clamp."""
    g = grad_log_pi(learner.policy, obs, action)
    g_arrays = g.arrays()
    norm = abs(delta_tilde) * flat_norm(g_arrays)
    if not np.isfinite(norm):
        raise NumericsError(f"non-finite actor gradient (delta={delta_tilde!r})")
    scale = delta_tilde
    if norm > GRAD_CLIP:
        scale *= GRAD_CLIP / norm
    params = learner.policy.arrays()
    K.scaled_add(params, g_arrays, alpha_theta * scale)
    project_params_inplace(params, radius)
    np.clip(learner.policy.log_std, LOG_STD_MIN, LOG_STD_MAX, out=learner.policy.log_std)
    return learner


def critic_update(
    learner: AgentLearner, delta: float, joint_obs, alpha_omega: float
) -> AgentLearner:
    """Semi-gradient TD(0) ascent: omega += alpha * delta * grad V(s)."""
    grads, _ = mlp_grad(learner.critic.value_net, joint_obs, _ONE)
    g_arrays = grads.arrays()
    norm = abs(delta) * flat_norm(g_arrays)
    if not np.isfinite(norm):
        raise NumericsError(f"non-finite critic gradient (delta={delta!r})")
    scale = delta
    if norm > GRAD_CLIP:
        scale *= GRAD_CLIP / norm
    K.scaled_add(learner.critic.arrays(), g_arrays, alpha_omega * scale)
    return learner


def _policy_forward_cached(policy: PolicyParams, obs):
    net = policy.mean_net
    return K.mlp_forward_cached(net.weights, net.biases, obs)


def _critic_value_cached(critic: ValueParams, joint_obs):
    net = critic.value_net
    out, acts = K.mlp_forward_cached(net.weights, net.biases, joint_obs)
    return float(out[0]), acts


def _critic_value(critic: ValueParams, joint_obs) -> float:
    net = critic.value_net
    return float(K.mlp_forward(net.weights, net.biases, joint_obs)[0])


def _actor_update_from_cache(
    learner: AgentLearner, acts, z_over_std, z, delta_tilde: float,
    alpha_theta: float, radius: float,
) -> None:
    # Same arithmetic as actor_update, reusing the cached forward pass.
    net = learner.policy.mean_net
    gws, gbs, _ = K.mlp_backward(net.weights, net.biases, acts, z_over_std)
    g_arrays = []
    for w, b in zip(gws, gbs):
        g_arrays.append(w)
        g_arrays.append(b)
    g_arrays.append(z * z - 1.0)
    norm = abs(delta_tilde) * flat_norm(g_arrays)
    if not np.isfinite(norm):
        raise NumericsError(f"non-finite actor gradient (delta={delta_tilde!r})")
    scale = delta_tilde
    if norm > GRAD_CLIP:
        scale *= GRAD_CLIP / norm
    params = learner.policy.arrays()
    K.scaled_add(params, g_arrays, alpha_theta * scale)
    project_params_inplace(params, radius)
    np.clip(learner.policy.log_std, LOG_STD_MIN, LOG_STD_MAX, out=learner.policy.log_std)


def _critic_update_from_cache(
    learner: AgentLearner, acts, delta: float, alpha_omega: float
) -> None:
    net = learner.critic.value_net
    gws, gbs, _ = K.mlp_backward(net.weights, net.biases, acts, _ONE)
    g_arrays = []
    for w, b in zip(gws, gbs):
        g_arrays.append(w)
        g_arrays.append(b)
    norm = abs(delta) * flat_norm(g_arrays)
    if not np.isfinite(norm):
        raise NumericsError(f"non-finite critic gradient (delta={delta!r})")
    scale = delta
    if norm > GRAD_CLIP:
        scale *= GRAD_CLIP / norm
    K.scaled_add(learner.critic.arrays(), g_arrays, alpha_omega * scale)


def _phi_of(learner: AgentLearner, state, applied, anchors, i) -> float:
    if learner.advice_mode is AdviceMode.NONE:
        return 0.0
    return potential(learner.potential_spec, state, applied, anchors, i)


def _needs_delay(learners) -> bool:
    return any(
        l.advice_mode is AdviceMode.LOOK_AHEAD
        and l.potential_spec is not None
        and l.potential_spec.variant is Variant.NONUNIFORM
        for l in learners
    )


def run_episode(
    env: Environment,
    learners: List[AgentLearner],
    hyper: Hyperparams,
    rng: np.random.Generator,
    global_step: int = 0,
    trajectory_writer=None,
    episode_index: int = 0,
):
    """Run one training episode with online per-step updates.

    Returns (EpisodeLog, next_global_step). Learners are updated in place.
    Non-uniform look-ahead advice needs the next action to finish the
    current advice term, so in that case each update runs one step late.
    """
    task = env.task
    n = task.n_movers
    if len(learners) != n:
        raise ConfigError(f"{len(learners)} learners for {n} movers")
    delayed = _needs_delay(learners)

    state = env.reset(rng)
    anchors = make_anchors(state)
    obs = observe_all(state)
    joint = np.concatenate(obs)
    noise = rng.standard_normal((task.horizon, n, 2))

    gamma = hyper.gamma
    env_ret = np.zeros(n)
    shaped_ret = np.zeros(n)
    advice_sum = np.zeros(n)
    phi_prev = np.zeros(n)
    phi_first = np.zeros(n)
    phi_last = np.zeros(n)
    collisions = 0
    coverage = 0
    pending = None  # delayed pipeline: (joint, obs, z-record, rewards, phi, joint_next)

    for t in range(task.horizon):
        actions = np.empty((n, 2))
        samples = []
        for i, learner in enumerate(learners):
            mean, acts = _policy_forward_cached(learner.policy, obs[i])
            inv_std = np.exp(-learner.policy.log_std)
            z = noise[t, i]
            a = mean + z / inv_std
            actions[i] = a
            samples.append((acts, z * inv_std, z))
        applied = np.clip(actions, -1.0, 1.0)

        state_next, rewards, events, done = env.step(state, applied)
        if trajectory_writer is not None:
            write_trajectory_row(trajectory_writer, episode_index, state_next, rewards)
        obs_next = observe_all(state_next)
        joint_next = np.concatenate(obs_next)

        phi_t = np.array([
            _phi_of(learner, state, applied, anchors, i)
            for i, learner in enumerate(learners)
        ])
        if t == 0:
            phi_first = phi_t.copy()
        phi_last = phi_t.copy()

        if not delayed:
            alpha_theta, alpha_omega = lr_schedule(hyper, global_step)
            for i, learner in enumerate(learners):
                mode = learner.advice_mode
                if mode is AdviceMode.NONE:
                    f = 0.0
                elif mode is AdviceMode.LOOK_AHEAD:
                    # uniform potential: action-independent, evaluable at s'
                    phi_next = 0.0 if done else potential(
                        learner.potential_spec, state_next, applied, anchors, i
                    )
                    f = look_ahead_advice(phi_t[i], phi_next, gamma)
                else:
                    f = look_back_advice(phi_t[i], phi_prev[i], gamma)
                v_s, critic_acts = _critic_value_cached(learner.critic, joint)
                v_next = 0.0 if done else _critic_value(learner.critic, joint_next)
                delta = td_error(float(rewards[i]), f, v_s, v_next, gamma, done)
                delta_tilde = corrected_td(delta, phi_t[i], mode)
                acts, z_over_std, z = samples[i]
                _actor_update_from_cache(
                    learner, acts, z_over_std, z, delta_tilde, alpha_theta,
                    hyper.projection_radius,
                )
                _critic_update_from_cache(learner, critic_acts, delta, alpha_omega)
                advice_sum[i] += f
                shaped_ret[i] += rewards[i] + f
            global_step += 1
        else:
            if pending is not None:
                global_step = _flush_pending(
                    learners, pending, phi_t, False, hyper, global_step,
                    advice_sum, shaped_ret,
                )
            pending = (joint, samples, rewards, phi_t, joint_next, done)

        env_ret += rewards
        collisions += len(events.agent_collisions)
        coverage += (
            len(events.newly_covered)
            + len(events.catches)
            + int(events.target_newly_covered_by_agent)
            + int(events.target_newly_covered_by_adversary)
        )
        state = state_next
        obs = obs_next
        joint = joint_next
        phi_prev = phi_t
        if done:
            break

    if pending is not None:
        # Final transition: terminal potential is zero by convention.
        global_step = _flush_pending(
            learners, pending, np.zeros(n), True, hyper, global_step,
            advice_sum, shaped_ret,
        )

    log = EpisodeLog(
        env_returns=env_ret,
        shaped_returns=shaped_ret,
        advice_sums=advice_sum,
        length=state.step,
        collisions=collisions,
        coverage_events=coverage,
        phi_first=phi_first,
        phi_last=phi_last,
    )
    return log, global_step


def _flush_pending(
    learners, pending, phi_after, terminal, hyper, global_step,
    advice_sum, shaped_ret,
):
    """Apply the delayed update for transition t-1 once phi_t is known."""
    joint, samples, rewards, phi_t, joint_next, done = pending
    gamma = hyper.gamma
    alpha_theta, alpha_omega = lr_schedule(hyper, global_step)
    for i, learner in enumerate(learners):
        mode = learner.advice_mode
        if mode is AdviceMode.NONE:
            f = 0.0
        elif mode is AdviceMode.LOOK_AHEAD:
            phi_next = 0.0 if terminal else float(phi_after[i])
            f = look_ahead_advice(float(phi_t[i]), phi_next, gamma)
        else:
            raise ConfigError("delayed pipeline only applies to look-ahead advice")
        v_s, critic_acts = _critic_value_cached(learner.critic, joint)
        v_next = 0.0 if done else _critic_value(learner.critic, joint_next)
        delta = td_error(float(rewards[i]), f, v_s, v_next, gamma, done)
        delta_tilde = corrected_td(delta, float(phi_t[i]), mode)
        acts, z_over_std, z = samples[i]
        _actor_update_from_cache(
            learner, acts, z_over_std, z, delta_tilde, alpha_theta,
            hyper.projection_radius,
        )
        _critic_update_from_cache(learner, critic_acts, delta, alpha_omega)
        advice_sum[i] += f
        shaped_ret[i] += rewards[i] + f
    return global_step + 1


def rollout(
    env: Environment,
    learners: List[AgentLearner],
    rng: np.random.Generator,
) -> List[Transition]:
    """Collect one episode without updating anybody (used by the
    episode-end baselines). Advice fields are zero: redistribution methods
    run with advice mode none."""
    task = env.task
    n = task.n_movers
    state = env.reset(rng)
    obs = observe_all(state)
    joint = np.concatenate(obs)
    noise = rng.standard_normal((task.horizon, n, 2))
    out = []
    for t in range(task.horizon):
        actions = np.empty((n, 2))
        for i, learner in enumerate(learners):
            mean, _ = _policy_forward_cached(learner.policy, obs[i])
            actions[i] = mean + np.exp(learner.policy.log_std) * noise[t, i]
        applied = np.clip(actions, -1.0, 1.0)
        state_next, rewards, _events, done = env.step(state, applied)
        obs_next = observe_all(state_next)
        joint_next = np.concatenate(obs_next)
        out.append(
            Transition(
                joint_obs=joint,
                obs=obs,
                actions=actions,
                rewards=rewards,
                potentials=np.zeros(n),
                advice=np.zeros(n),
                joint_obs_next=joint_next,
                terminal=done,
            )
        )
        state = state_next
        obs = obs_next
        joint = joint_next
        if done:
            break
    return out


def greedy_episode(
    env: Environment, learners: List[AgentLearner], rng: np.random.Generator
):
    """Evaluation episode using mean actions (no sampling); returns
    (per-agent env returns, collisions, coverage events)."""
    task = env.task
    n = task.n_movers
    state = env.reset(rng)
    obs = observe_all(state)
    env_ret = np.zeros(n)
    collisions = 0
    coverage = 0
    for _t in range(task.horizon):
        actions = np.empty((n, 2))
        for i, learner in enumerate(learners):
            mean, _ = _policy_forward_cached(learner.policy, obs[i])
            actions[i] = mean
        state, rewards, events, done = env.step(state, np.clip(actions, -1.0, 1.0))
        obs = observe_all(state)
        env_ret += rewards
        collisions += len(events.agent_collisions)
        coverage += len(events.newly_covered) + len(events.catches)
        if done:
            break
    return env_ret, collisions, coverage


CHECKPOINT_VERSION = 1


def save_checkpoint(path, learners: List[AgentLearner], meta: Optional[dict] = None) -> None:
    """Versioned binary dump of every learner's parameters; reload
    reproduces forward passes bit-exactly."""
    arrays = {
        "version": np.array(CHECKPOINT_VERSION),
        "n_learners": np.array(len(learners)),
        "meta": np.array(json.dumps(meta or {})),
    }
    for i, learner in enumerate(learners):
        p = learner.policy
        arrays[f"l{i}_policy_sizes"] = np.array(p.mean_net.layer_sizes)
        for k, (w, b) in enumerate(zip(p.mean_net.weights, p.mean_net.biases)):
            arrays[f"l{i}_policy_w{k}"] = w
            arrays[f"l{i}_policy_b{k}"] = b
        arrays[f"l{i}_log_std"] = p.log_std
        c = learner.critic.value_net
        arrays[f"l{i}_critic_sizes"] = np.array(c.layer_sizes)
        for k, (w, b) in enumerate(zip(c.weights, c.biases)):
            arrays[f"l{i}_critic_w{k}"] = w
            arrays[f"l{i}_critic_b{k}"] = b
        arrays[f"l{i}_mode"] = np.array(learner.advice_mode.value)
        spec = learner.potential_spec
        if spec is not None:
            arrays[f"l{i}_spec"] = np.array(
                [spec.alpha, spec.beta, spec.m]
            )
            arrays[f"l{i}_variant"] = np.array(spec.variant.value)
    np.savez(path, **arrays)


def _net_from(data, prefix) -> MlpParams:
    sizes = tuple(int(s) for s in data[f"{prefix}_sizes"])
    weights, biases = [], []
    for k in range(len(sizes) - 1):
        weights.append(np.ascontiguousarray(data[f"{prefix}_w{k}"], dtype=np.float64))
        biases.append(np.ascontiguousarray(data[f"{prefix}_b{k}"], dtype=np.float64))
    return MlpParams(sizes, weights, biases)


def load_checkpoint(path):
    """Returns (learners, meta)."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {version}")
        meta = json.loads(str(data["meta"]))
        learners = []
        for i in range(int(data["n_learners"])):
            policy = PolicyParams(
                _net_from(data, f"l{i}_policy"),
                np.ascontiguousarray(data[f"l{i}_log_std"], dtype=np.float64),
            )
            critic = ValueParams(_net_from(data, f"l{i}_critic"))
            mode = AdviceMode(str(data[f"l{i}_mode"]))
            spec = None
            if f"l{i}_spec" in data:
                alpha, beta, m = (float(x) for x in data[f"l{i}_spec"])
                spec = PotentialSpec(
                    Variant(str(data[f"l{i}_variant"])), alpha, beta, m
                )
            learners.append(AgentLearner(policy, critic, mode, spec))
    return learners, meta
