"""Shaping advice: task potentials, landmark anchoring, and the two
temporal-difference advice forms.

The potential of a joint configuration is uniform (the same for every
action at a given state) or non-uniform (an extra penalty on actions
pointing away from the agent's anchor). Advice is the difference of
potentials at consecutive steps: look-ahead uses the next step, look-back
the previous one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict

import numpy as np

from .errors import ConfigError
from .particle_world import TaskKind, WorldState

ZERO_ACTION_NORM = 1e-8


class AdviceMode(enum.Enum):
    NONE = "none"
    LOOK_AHEAD = "look_ahead"
    LOOK_BACK = "look_back"


class Variant(enum.Enum):
    UNIFORM = "uniform"
    NONUNIFORM = "nonuniform"


@dataclass(frozen=True)
class PotentialSpec:
    """Coefficients of a task potential.

    alpha scales the proximity term, beta its decay with total distance,
    m weights the action-angle penalty (non-uniform variant only).
    """

    variant: Variant = Variant.UNIFORM
    alpha: float = 1.0
    beta: float = 1.0
    m: float = 0.1

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigError("alpha and beta must be positive")
        if self.m < 0:
            raise ConfigError("m must be nonnegative")


@dataclass(frozen=True)
class AnchorMap:
    """Per-episode assignment of each team agent to its target.

    For CN/PD this maps agent index -> landmark index (a bijection over
    team agents); for PP every predator is anchored to the prey.
    """

    assignments: Dict[int, int]
    prey_anchored: bool = False


def make_anchors(state: WorldState) -> AnchorMap:
    """Greedy nearest matching: repeatedly bind the globally closest
    unmatched (agent, landmark) pair. PP predators all anchor to the prey."""
    task = state.task
    if task.kind == "pp":
        prey = task.prey_index
        return AnchorMap({i: prey for i in range(task.n_agents)}, prey_anchored=True)
    agents = list(range(task.n_agents))
    landmarks = list(range(task.n_landmarks))
    assignments: Dict[int, int] = {}
    while agents:
        best = None
        for i in agents:
            for j in landmarks:
                d = state.positions[i] - state.landmark_positions[j]
                dist = float(np.sqrt(d @ d))
                if best is None or dist < best[0]:
                    best = (dist, i, j)
        _, i, j = best
        assignments[i] = j
        agents.remove(i)
        landmarks.remove(j)
    return AnchorMap(assignments)


def _anchor_distance_sum(state: WorldState, anchors: AnchorMap) -> float:
    task = state.task
    total = 0.0
    if anchors.prey_anchored:
        prey_pos = state.positions[task.prey_index]
        for i in range(task.n_agents):
            d = state.positions[i] - prey_pos
            total += math.sqrt(float(d @ d))
    else:
        for i, j in anchors.assignments.items():
            d = state.positions[i] - state.landmark_positions[j]
            total += math.sqrt(float(d @ d))
    return total


def action_angle(state: WorldState, action_i: np.ndarray, anchors: AnchorMap, agent_index: int) -> float:
    """Angle in [0, pi] between the agent's action and the direction to its
    anchor; defined as 0 for (near-)zero action or when standing on the anchor."""
    a = np.asarray(action_i, dtype=np.float64)
    na = math.sqrt(float(a @ a))
    if na < ZERO_ACTION_NORM:
        return 0.0
    if anchors.prey_anchored:
        target = state.positions[state.task.prey_index]
    else:
        target = state.landmark_positions[anchors.assignments[agent_index]]
    d = target - state.positions[agent_index]
    nd = math.sqrt(float(d @ d))
    if nd < ZERO_ACTION_NORM:
        return 0.0
    c = float(a @ d) / (na * nd)
    return math.acos(min(1.0, max(-1.0, c)))


def potential(
    spec: PotentialSpec,
    state: WorldState,
    action: np.ndarray,
    anchors: AnchorMap,
    agent_index: int,
) -> float:
    """Potential of (state, action) for one agent.

    Uniform: alpha * exp(-beta * sum of anchor distances). Non-uniform adds
    -m * angle(own action, anchor direction); for PP the angle term sums
    over every predator.
    """
    proximity = spec.alpha * math.exp(-spec.beta * _anchor_distance_sum(state, anchors))
    if spec.variant is Variant.UNIFORM:
        return proximity
    action = np.asarray(action, dtype=np.float64)
    if anchors.prey_anchored:
        angle = sum(
            action_angle(state, action[j], anchors, j)
            for j in range(state.task.n_agents)
        )
    else:
        angle = action_angle(state, action[agent_index], anchors, agent_index)
    return -spec.m * angle + proximity


def look_ahead_advice(phi_t: float, phi_next: float, gamma: float) -> float:
    """Advice from the next step's potential: gamma * phi_next - phi_t."""
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
    return gamma * phi_next - phi_t


def look_back_advice(phi_t: float, phi_prev: float, gamma: float) -> float:
    """Advice from the previous step's potential: phi_t - phi_prev / gamma.

    At t = 0 the previous potential is 0 by convention.
    """
    if not 0.0 < gamma <= 1.0:
        raise ConfigError(f"gamma must be in (0, 1] for look-back, got {gamma}")
    return phi_t - phi_prev / gamma
