"""Enumerable two-agent game for verifying the advice correction.

Everything here is small enough to enumerate: exact objective values,
exact policy gradients and exact critics are computed by brute force over
all trajectories, and the sampled TD-error gradient estimator is compared
against them. Policies are Bernoulli over two actions with a linear logit
(a zero-hidden-layer net over the one-hot state), so the gradient has one
coordinate per state plus a bias.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import List

import numpy as np

from .advice import AdviceMode
from .errors import ConfigError
from .numkit import MlpParams

MAX_STATES = 3
MAX_ACTIONS = 2
MAX_HORIZON = 3
N_AGENTS = 2


@dataclass(frozen=True)
class SmallGame:
    """Finite two-agent stochastic game with per-agent potentials.

    transition[s, a1, a2] is a distribution over next states; rewards and
    potentials are indexed [agent, s, a1, a2].
    """

    rho0: np.ndarray  # (S,)
    transition: np.ndarray  # (S, A, A, S)
    rewards: np.ndarray  # (2, S, A, A)
    potentials: np.ndarray  # (2, S, A, A)
    horizon: int
    gamma: float = 1.0

    def __post_init__(self):
        s, a1, a2, s2 = self.transition.shape
        if s != s2 or s > MAX_STATES or a1 > MAX_ACTIONS or a2 > MAX_ACTIONS:
            raise ConfigError("game too large to enumerate")
        if self.horizon > MAX_HORIZON or self.horizon < 1:
            raise ConfigError("horizon must lie in 1..3")
        if self.rewards.shape != (N_AGENTS, s, a1, a2):
            raise ConfigError("reward table shape mismatch")
        if self.potentials.shape != (N_AGENTS, s, a1, a2):
            raise ConfigError("potential table shape mismatch")
        if not np.allclose(self.transition.sum(axis=-1), 1.0):
            raise ConfigError("transition rows must sum to 1")
        if not np.isclose(self.rho0.sum(), 1.0):
            raise ConfigError("rho0 must sum to 1")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]


def linear_policy(logits) -> MlpParams:
    """Zero-hidden-layer policy net over the one-hot state; one logit output."""
    logits = np.asarray(logits, dtype=np.float64)
    return MlpParams(
        (logits.shape[0], 1), [logits[None, :].copy()], [np.zeros(1)]
    )


def _logits(policy: MlpParams) -> np.ndarray:
    if len(policy.layer_sizes) != 2 or policy.out_dim != 1:
        raise ConfigError("oracle policies must be zero-hidden-layer with one output")
    return policy.weights[0][0] + policy.biases[0][0]


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _action_probs(policy: MlpParams) -> np.ndarray:
    """(S, 2) table of action probabilities."""
    p1 = _sigmoid(_logits(policy))
    return np.stack([1.0 - p1, p1], axis=1)


def exact_objective(game: SmallGame, policies: List[MlpParams]) -> np.ndarray:
    """Per-agent expected discounted return, by trajectory enumeration."""
    probs = [_action_probs(p) for p in policies]
    totals = np.zeros(N_AGENTS)
    for prob, states, acts in _trajectories(game, probs):
        g = np.zeros(N_AGENTS)
        for t in range(game.horizon):
            g += game.gamma**t * game.rewards[:, states[t], acts[t][0], acts[t][1]]
        totals += prob * g
    return totals


def _trajectories(game: SmallGame, probs):
    """Yield (probability, states, actions) over every trajectory."""
    s_range = range(game.n_states)
    a_range = range(MAX_ACTIONS)
    act_space = list(itertools.product(a_range, a_range))
    def extend(prefix_prob, states, acts):
        t = len(acts)
        if t == game.horizon:
            yield prefix_prob, states, acts
            return
        s = states[-1]
        for a1, a2 in act_space:
            p_a = probs[0][s, a1] * probs[1][s, a2]
            if p_a == 0.0:
                continue
            for s2 in s_range:
                p_s = game.transition[s, a1, a2, s2]
                if p_s == 0.0:
                    continue
                yield from extend(
                    prefix_prob * p_a * p_s, states + [s2], acts + [(a1, a2)]
                )
    for s0 in s_range:
        if game.rho0[s0] > 0.0:
            yield from extend(float(game.rho0[s0]), [s0], [])


def exact_policy_gradient(game: SmallGame, policies: List[MlpParams]) -> list:
    """Exact gradient of each agent's objective in the unshaped game.

    Uses the likelihood-ratio identity over enumerated trajectories; the
    coordinate layout is (one weight per state, then the bias).
    """
    probs = [_action_probs(p) for p in policies]
    sig = [_sigmoid(_logits(p)) for p in policies]
    s_dim = game.n_states
    grads = [np.zeros(s_dim + 1) for _ in range(N_AGENTS)]
    for prob, states, acts in _trajectories(game, probs):
        g_return = np.zeros(N_AGENTS)
        for t in range(game.horizon):
            g_return += game.gamma**t * game.rewards[:, states[t], acts[t][0], acts[t][1]]
        for i in range(N_AGENTS):
            score = np.zeros(s_dim + 1)
            for t in range(game.horizon):
                s = states[t]
                coeff = acts[t][i] - sig[i][s]
                score[s] += coeff
                score[-1] += coeff
            grads[i] += prob * g_return[i] * score
    return grads


def exact_state_values(game: SmallGame, policies: List[MlpParams], mode: AdviceMode) -> np.ndarray:
    """Time-indexed exact critics V[agent, t, s] for the given advice mode.

    Look-ahead advice changes the value of every state by minus the
    expected potential there (the advice telescopes, with the terminal
    potential pinned to zero), so its critic is base value minus expected
    potential. Look-back advice carries zero conditional mean against the
    actions, so its critic is the base-game value.
    """
    probs = [_action_probs(p) for p in policies]
    n_s = game.n_states
    h = game.horizon
    v = np.zeros((N_AGENTS, h + 1, n_s))
    joint = probs[0][:, :, None] * probs[1][:, None, :]  # (S, A, A)
    r_bar = np.einsum("saб,isaб->is", joint, game.rewards) if False else np.einsum(
        "sab,isab->is", joint, game.rewards
    )
    for t in range(h - 1, -1, -1):
        cont = np.einsum("sabq,iq->isab", game.transition, v[:, t + 1])
        v[:, t] = r_bar + game.gamma * np.einsum("sab,isab->is", joint, cont)
    if mode is AdviceMode.LOOK_AHEAD:
        w = np.einsum("sab,isab->is", joint, game.potentials)
        v = v - w[:, None, :]
        v[:, h] = 0.0
    return v


@dataclass
class OracleResult:
    """Sampled estimator summary next to the exact unshaped gradient."""

    estimates: list  # per-agent mean of the sampled gradient
    standard_errors: list
    exact: list  # per-agent exact gradient in the original game
    n_samples: int

    def max_sigma_distance(self) -> float:
        worst = 0.0
        for est, se, ex in zip(self.estimates, self.standard_errors, self.exact):
            with np.errstate(divide="ignore", invalid="ignore"):
                sig = np.abs(est - ex) / se
            worst = max(worst, float(np.nanmax(sig)))
        return worst


def oracle_policy_gradient(
    game: SmallGame,
    policies: List[MlpParams],
    mode: AdviceMode,
    n_samples: int,
    rng: np.random.Generator,
    apply_correction: bool = True,
) -> OracleResult:
    """Monte-Carlo mean of the corrected TD-error gradient estimator.

    The estimator follows the training rule: delta uses reward plus advice
    plus the bootstrapped exact critic of the advice-shaped game, and the
    actor term adds the current potential back under look-ahead advice
    (drop it with apply_correction=False to demonstrate the bias).
    Step contributions carry the discount of their time index.
    """
    if len(policies) != N_AGENTS:
        raise ConfigError("exactly two policies required")
    probs = [_action_probs(p) for p in policies]
    sig = [_sigmoid(_logits(p)) for p in policies]
    values = exact_state_values(game, policies, mode)
    n_s = game.n_states
    h = game.horizon
    gamma = game.gamma

    # cumulative transition table for vectorized categorical sampling
    cum_t = np.cumsum(game.transition, axis=-1)
    cum_0 = np.cumsum(game.rho0)

    states = np.empty((h + 1, n_samples), dtype=np.intp)
    acts = np.empty((h, N_AGENTS, n_samples), dtype=np.intp)
    states[0] = np.searchsorted(cum_0, rng.random(n_samples), side="right")
    for t in range(h):
        s = states[t]
        for i in range(N_AGENTS):
            acts[t, i] = rng.random(n_samples) < sig[i][s]
        u = rng.random(n_samples)
        rows = cum_t[s, acts[t, 0], acts[t, 1]]
        states[t + 1] = (u[:, None] >= rows).sum(axis=1)

    grads = [np.zeros((n_samples, n_s + 1)) for _ in range(N_AGENTS)]
    phi = np.stack(
        [game.potentials[:, states[t], acts[t, 0], acts[t, 1]] for t in range(h)]
    )  # (h, 2, n)
    rew = np.stack(
        [game.rewards[:, states[t], acts[t, 0], acts[t, 1]] for t in range(h)]
    )
    for i in range(N_AGENTS):
        for t in range(h):
            if mode is AdviceMode.NONE:
                f = 0.0
            elif mode is AdviceMode.LOOK_AHEAD:
                phi_next = phi[t + 1, i] if t + 1 < h else 0.0
                f = gamma * phi_next - phi[t, i]
            else:
                phi_prev = phi[t - 1, i] if t > 0 else 0.0
                f = phi[t, i] - phi_prev / gamma
            v_s = values[i, t, states[t]]
            v_next = values[i, t + 1, states[t + 1]] if t + 1 <= h else 0.0
            delta = rew[t, i] + f + gamma * v_next - v_s
            if mode is AdviceMode.LOOK_AHEAD and apply_correction:
                delta = delta + phi[t, i]
            coeff = gamma**t * delta * (acts[t, i] - sig[i][states[t]])
            np.add.at(grads[i], (np.arange(n_samples), states[t]), coeff)
            grads[i][:, -1] += coeff
    exact = exact_policy_gradient(game, policies)
    estimates = [g.mean(axis=0) for g in grads]
    ses = [g.std(axis=0, ddof=1) / np.sqrt(n_samples) for g in grads]
    return OracleResult(estimates, ses, exact, n_samples)
