"""Seeded 2D continuous simulator for three sparse-reward multi-agent tasks.

Tasks: cooperative navigation (cn), physical deception (pd) and
predator-prey (pp). Dynamics are a damped double integrator with soft
contact forces; rewards fire only on discrete events (a landmark newly
covered, a new contact), so almost all steps return zero reward.

Agent index convention: team agents first (CN agents, PD good agents,
PP predators), then the extra mover last (PD adversary, PP prey).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import IO, Sequence

import numpy as np

from .errors import ConfigError, InputError

ARENA = 1.5


@dataclass(frozen=True)
class TaskKind:
    """Task tag plus team size. n_agents counts team agents only."""

    kind: str  # "cn" | "pd" | "pp"
    n_agents: int
    horizon: int = 25

    def __post_init__(self):
        if self.kind not in ("cn", "pd", "pp"):
            raise ConfigError(f"unknown task kind {self.kind!r}")
        if self.kind == "pd" and self.n_agents < 2:
            raise ConfigError("pd needs at least 2 team agents")
        if self.n_agents < 1:
            raise ConfigError("need at least one team agent")
        if self.horizon < 1:
            raise ConfigError("horizon must be positive")

    @property
    def n_landmarks(self) -> int:
        return 2 if self.kind == "pp" else self.n_agents

    @property
    def n_movers(self) -> int:
        # PD adds one adversary, PP one prey
        return self.n_agents if self.kind == "cn" else self.n_agents + 1

    @property
    def adversary_index(self):
        return self.n_agents if self.kind == "pd" else None

    @property
    def prey_index(self):
        return self.n_agents if self.kind == "pp" else None

    @property
    def landmarks_collidable(self) -> bool:
        # PP landmarks are obstacles that impede movement; CN/PD landmarks
        # are targets agents must stand on.
        return self.kind == "pp"


@dataclass(frozen=True)
class EnvParams:
    """Physics and reward constants. The paper pins none of these."""

    dt: float = 0.1
    damping: float = 0.5
    accel_gain: float = 5.0
    agent_radius: float = 0.05
    landmark_radius: float = 0.05
    obstacle_radius: float = 0.2
    max_speed: float = 1.0
    prey_speed_factor: float = 1.3
    contact_k: float = 50.0
    r_reach: float = 1.0
    p_collide: float = 1.0
    r_catch: float = 10.0

    @property
    def cover_radius(self) -> float:
        return self.agent_radius + self.landmark_radius


DEFAULT_PARAMS = EnvParams()


@dataclass
class WorldState:
    """Full simulator state."""

    positions: np.ndarray  # (n_movers, 2)
    velocities: np.ndarray  # (n_movers, 2)
    landmark_positions: np.ndarray  # (n_landmarks, 2)
    radii: np.ndarray  # (n_movers,)
    landmark_radii: np.ndarray  # (n_landmarks,)
    max_speeds: np.ndarray  # (n_movers,)
    task: TaskKind
    target_index: int = 0  # PD only
    step: int = 0

    def copy(self) -> "WorldState":
        return replace(
            self,
            positions=self.positions.copy(),
            velocities=self.velocities.copy(),
            landmark_positions=self.landmark_positions.copy(),
            radii=self.radii.copy(),
            landmark_radii=self.landmark_radii.copy(),
            max_speeds=self.max_speeds.copy(),
        )


@dataclass(frozen=True)
class StepEvents:
    """Discrete events produced by one step; rewards derive from these only."""

    newly_covered: tuple = ()  # CN: landmark indices newly covered
    agent_collisions: tuple = ()  # new (i, j) contacts between movers
    catches: tuple = ()  # PP: (predator, prey) new contacts
    target_newly_covered_by_agent: bool = False  # PD
    target_newly_covered_by_adversary: bool = False  # PD


def reset(task: TaskKind, rng: np.random.Generator, params: EnvParams = DEFAULT_PARAMS) -> WorldState:
    """Fresh episode state: positions i.i.d. uniform in [-1, 1]^2, zero velocity."""
    m = task.n_movers
    positions = rng.uniform(-1.0, 1.0, size=(m, 2))
    landmark_positions = rng.uniform(-1.0, 1.0, size=(task.n_landmarks, 2))
    target_index = 0
    if task.kind == "pd":
        target_index = int(rng.integers(task.n_landmarks))
    radii = np.full(m, params.agent_radius)
    max_speeds = np.full(m, params.max_speed)
    if task.kind == "pp":
        max_speeds[task.prey_index] = params.max_speed * params.prey_speed_factor
    lm_radius = params.obstacle_radius if task.landmarks_collidable else params.landmark_radius
    return WorldState(
        positions=positions,
        velocities=np.zeros((m, 2)),
        landmark_positions=landmark_positions,
        radii=radii,
        landmark_radii=np.full(task.n_landmarks, lm_radius),
        max_speeds=max_speeds,
        task=task,
        target_index=target_index,
        step=0,
    )


def _contact_forces(state: WorldState, params: EnvParams) -> np.ndarray:
    """Soft spring force along the separating axis for overlapping entities."""
    pos = state.positions
    m = pos.shape[0]
    forces = np.zeros((m, 2))
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    rsum = state.radii[:, None] + state.radii[None, :]
    for i in range(m):
        for j in range(i + 1, m):
            overlap = rsum[i, j] - dist[i, j]
            if overlap > 0.0:
                d = dist[i, j]
                axis = diff[i, j] / d if d > 1e-9 else np.array([1.0, 0.0])
                f = params.contact_k * overlap * axis
                forces[i] += f
                forces[j] -= f
    if state.task.landmarks_collidable:
        for i in range(m):
            for j in range(state.landmark_positions.shape[0]):
                delta = pos[i] - state.landmark_positions[j]
                d = float(np.sqrt(delta @ delta))
                overlap = state.radii[i] + state.landmark_radii[j] - d
                if overlap > 0.0:
                    axis = delta / d if d > 1e-9 else np.array([1.0, 0.0])
                    forces[i] += params.contact_k * overlap * axis
    return forces


def _pair_contacts(positions: np.ndarray, radii: np.ndarray) -> set:
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    rsum = radii[:, None] + radii[None, :]
    m = positions.shape[0]
    return {(i, j) for i in range(m) for j in range(i + 1, m) if dist[i, j] < rsum[i, j]}


def _covered_landmarks(positions, landmark_positions, cover_radius, agent_slice) -> set:
    """Landmark indices whose nearest agent (within agent_slice) is inside cover radius."""
    agents = positions[agent_slice]
    diff = agents[:, None, :] - landmark_positions[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    return {j for j in range(landmark_positions.shape[0]) if dist[:, j].min() < cover_radius}


def step(
    state: WorldState,
    action: np.ndarray,
    params: EnvParams = DEFAULT_PARAMS,
):
    """Advance one step.

    Returns (next_state, rewards, events, done). Forces are clipped to
    [-1, 1] per component before being applied.
    """
    task = state.task
    action = np.asarray(action, dtype=np.float64)
    if action.shape != (task.n_movers, 2):
        raise InputError(f"action shape {action.shape}, expected {(task.n_movers, 2)}")
    if not np.all(np.isfinite(action)):
        raise InputError("non-finite entries in action")
    applied = np.clip(action, -1.0, 1.0)

    accel = params.accel_gain * applied + _contact_forces(state, params)
    vel = params.damping * state.velocities + accel * params.dt
    speed = np.sqrt(np.sum(vel * vel, axis=-1))
    over = speed > state.max_speeds
    if np.any(over):
        vel[over] *= (state.max_speeds[over] / speed[over])[:, None]
    pos = np.clip(state.positions + vel * params.dt, -ARENA, ARENA)

    next_state = replace(state, positions=pos, velocities=vel, step=state.step + 1)

    # Events compare contact/coverage predicates before and after the move.
    contacts_before = _pair_contacts(state.positions, state.radii)
    contacts_after = _pair_contacts(pos, state.radii)
    new_contacts = tuple(sorted(contacts_after - contacts_before))

    newly_covered = ()
    target_by_agent = False
    target_by_adv = False
    catches = ()
    if task.kind == "cn":
        before = _covered_landmarks(
            state.positions, state.landmark_positions, params.cover_radius, slice(None)
        )
        after = _covered_landmarks(
            pos, state.landmark_positions, params.cover_radius, slice(None)
        )
        newly_covered = tuple(sorted(after - before))
    elif task.kind == "pd":
        adv = task.adversary_index
        target = state.landmark_positions[state.target_index]

        def covers(p):
            d = p - target
            return float(np.sqrt(d @ d)) < params.cover_radius

        agents_before = any(covers(state.positions[i]) for i in range(task.n_agents))
        agents_after = any(covers(pos[i]) for i in range(task.n_agents))
        target_by_agent = agents_after and not agents_before
        target_by_adv = covers(pos[adv]) and not covers(state.positions[adv])
    else:  # pp
        prey = task.prey_index
        catches = tuple((i, prey) for (i, j) in new_contacts if j == prey)

    events = StepEvents(
        newly_covered=newly_covered,
        agent_collisions=new_contacts,
        catches=catches,
        target_newly_covered_by_agent=target_by_agent,
        target_newly_covered_by_adversary=target_by_adv,
    )
    rewards = sparse_reward(next_state, events, params)
    done = state.step + 1 >= task.horizon
    return next_state, rewards, events, done


def sparse_reward(
    state_after: WorldState, events: StepEvents, params: EnvParams = DEFAULT_PARAMS
) -> np.ndarray:
    """Per-agent reward from this step's events; zero when nothing happened."""
    task = state_after.task
    rewards = np.zeros(task.n_movers)
    if task.kind == "cn":
        rewards += params.r_reach * len(events.newly_covered)
        for (i, j) in events.agent_collisions:
            rewards[i] -= params.p_collide
            rewards[j] -= params.p_collide
    elif task.kind == "pd":
        adv = task.adversary_index
        if events.target_newly_covered_by_agent:
            rewards[: task.n_agents] += params.r_reach
        if events.target_newly_covered_by_adversary:
            rewards[: task.n_agents] -= params.r_reach
            rewards[adv] += params.r_reach
    else:  # pp
        prey = task.prey_index
        for (_pred, _prey) in events.catches:
            rewards[: task.n_agents] += params.r_catch
            rewards[prey] -= params.r_catch
    return rewards


def obs_dim(task: TaskKind, agent_index: int) -> int:
    base = 4 + 2 * task.n_landmarks + 2 * (task.n_movers - 1)
    if task.kind == "pp" and agent_index != task.prey_index:
        base += 2  # prey velocity
    return base


def joint_obs_dim(task: TaskKind) -> int:
    return sum(obs_dim(task, i) for i in range(task.n_movers))


def observe(state: WorldState, agent_index: int) -> np.ndarray:
    """Local observation: own kinematics, then landmark and other-agent
    positions relative to self (index order), plus prey velocity for
    predators."""
    task = state.task
    if not 0 <= agent_index < task.n_movers:
        raise IndexError(f"agent index {agent_index} out of range")
    own_pos = state.positions[agent_index]
    parts = [state.velocities[agent_index], own_pos]
    for j in range(task.n_landmarks):
        parts.append(state.landmark_positions[j] - own_pos)
    for j in range(task.n_movers):
        if j != agent_index:
            parts.append(state.positions[j] - own_pos)
    if task.kind == "pp" and agent_index != task.prey_index:
        parts.append(state.velocities[task.prey_index])
    return np.concatenate(parts)


def observe_all(state: WorldState) -> list:
    return [observe(state, i) for i in range(state.task.n_movers)]


def joint_observation(obs_list: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate(obs_list)


@dataclass
class Environment:
    """Convenience bundle of a task and its physics constants."""

    task: TaskKind
    params: EnvParams = field(default_factory=EnvParams)

    def reset(self, rng: np.random.Generator) -> WorldState:
        return reset(self.task, rng, self.params)

    def step(self, state: WorldState, action: np.ndarray):
        return step(state, action, self.params)


def trajectory_header(task: TaskKind) -> str:
    cols = ["episode", "step"]
    for i in range(task.n_movers):
        cols += [f"agent{i}_x", f"agent{i}_y", f"agent{i}_vx", f"agent{i}_vy"]
    for j in range(task.n_landmarks):
        cols += [f"landmark{j}_x", f"landmark{j}_y", f"landmark{j}_vx", f"landmark{j}_vy"]
    cols += [f"reward{i}" for i in range(task.n_movers)]
    return ",".join(cols)


def write_trajectory_row(
    out: IO[str], episode: int, state: WorldState, rewards: np.ndarray
) -> None:
    """One CSV line per step; landmarks are static so their velocity is zero."""
    vals = [str(episode), str(state.step)]
    for i in range(state.task.n_movers):
        vals += [
            repr(float(state.positions[i, 0])),
            repr(float(state.positions[i, 1])),
            repr(float(state.velocities[i, 0])),
            repr(float(state.velocities[i, 1])),
        ]
    for j in range(state.task.n_landmarks):
        vals += [
            repr(float(state.landmark_positions[j, 0])),
            repr(float(state.landmark_positions[j, 1])),
            "0.0",
            "0.0",
        ]
    vals += [repr(float(r)) for r in rewards]
    out.write(",".join(vals) + "\n")
