"""Deterministic 2-D multi-robot particle environment.

Robots are double integrators driven by per-axis accelerations in [-1, 1].
Each robot sees only a local observation vector; the centralised critic gets
the global state ``[robot positions, goal positions]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._accel import njit, pick

SCENARIO_KINDS = ("random", "swap3", "cross6", "bilateral12")
FIXED_SIZES = {"swap3": 3, "cross6": 6, "bilateral12": 12}

GOAL_REWARD = 1.0
COLLISION_REWARD = -0.35
PROXIMITY_SLOPE = 0.05


@dataclass(frozen=True)
class EnvConfig:
    dt: float = 0.1
    v_max: float = 1.0
    a_max: float = 1.0
    robot_radius: float = 0.15
    arena_half_extent: float = 2.0
    episode_length: int = 50
    r_th: float = 0.2
    r_safe: float = 0.3
    goal_threshold: float = 0.1
    clearance_margin: float = 0.1
    # "normalized" -> i / n_robots, "raw" -> i
    index_mode: str = "normalized"
    # random scenarios: start-goal distance range and keep-out band at the walls
    min_goal_distance: float = 1.0
    max_goal_distance: float = 3.0
    wall_margin: float = 0.25
    max_retries: int = 1000

    def __post_init__(self):
        if self.index_mode not in ("normalized", "raw"):
            raise ValueError(f"unknown index_mode {self.index_mode!r}")
        if self.dt <= 0 or self.v_max <= 0 or self.a_max <= 0:
            raise ValueError("dt, v_max and a_max must be positive")

    @property
    def min_separation(self) -> float:
        return 2.0 * self.robot_radius + self.clearance_margin


DEFAULT_ENV = EnvConfig()


@dataclass
class Scenario:
    kind: str
    n_robots: int
    seed: int
    starts: np.ndarray
    goals: np.ndarray
    arena_half_extent: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_robots": int(self.n_robots),
            "seed": int(self.seed),
            "starts": self.starts.tolist(),
            "goals": self.goals.tolist(),
            "arena_half_extent": float(self.arena_half_extent),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        missing = {"kind", "n_robots", "seed", "starts", "goals", "arena_half_extent"} - set(d)
        if missing:
            raise ValueError(f"scenario document is missing keys {sorted(missing)}")
        sc = cls(
            kind=str(d["kind"]),
            n_robots=int(d["n_robots"]),
            seed=int(d["seed"]),
            starts=np.asarray(d["starts"], dtype=np.float64).reshape(-1, 2),
            goals=np.asarray(d["goals"], dtype=np.float64).reshape(-1, 2),
            arena_half_extent=float(d["arena_half_extent"]),
        )
        validate_scenario(sc)
        return sc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class WorldState:
    positions: np.ndarray
    velocities: np.ndarray
    goals: np.ndarray
    t_step: int
    reached: np.ndarray
    prev_goal_dists: np.ndarray

    @property
    def n_robots(self) -> int:
        return self.positions.shape[0]

    def global_state(self) -> np.ndarray:
        """Critic-side state vector: all robot positions then all goals (length 4N)."""
        return np.concatenate([self.positions.ravel(), self.goals.ravel()])

    def copy(self) -> "WorldState":
        return WorldState(
            self.positions.copy(),
            self.velocities.copy(),
            self.goals.copy(),
            self.t_step,
            self.reached.copy(),
            self.prev_goal_dists.copy(),
        )


@dataclass
class StepResult:
    next_state: WorldState
    observations: np.ndarray
    rewards: np.ndarray
    done: bool
    per_robot_done: np.ndarray
    collision_count_delta: int = field(default=0)


def obs_length(n_robots: int) -> int:
    return 8 + 2 * (n_robots - 1)


# --------------------------------------------------------------------------
# scenarios


def _pairwise_min(points: np.ndarray) -> float:
    if len(points) < 2:
        return np.inf
    diff = points[:, None, :] - points[None, :, :]
    d = np.sqrt((diff**2).sum(-1))
    d[np.diag_indices(len(points))] = np.inf
    return float(d.min())


def validate_scenario(sc: Scenario, cfg: EnvConfig = DEFAULT_ENV) -> None:
    if sc.kind not in SCENARIO_KINDS:
        raise ValueError(f"unknown scenario kind {sc.kind!r}")
    if sc.n_robots < 2:
        raise ValueError("need at least two robots")
    if sc.starts.shape != (sc.n_robots, 2) or sc.goals.shape != (sc.n_robots, 2):
        raise ValueError("starts and goals must each hold n_robots 2-D points")
    h = sc.arena_half_extent
    if np.any(np.abs(sc.starts) > h) or np.any(np.abs(sc.goals) > h):
        raise ValueError("scenario positions leave the arena")
    if _pairwise_min(sc.starts) < cfg.min_separation - 1e-12:
        raise ValueError("start positions overlap")


def _fixed_layout(kind: str) -> tuple[np.ndarray, np.ndarray]:
    if kind == "swap3":
        ang = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
        starts = 1.5 * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        goals = -starts
    elif kind == "cross6":
        # one column crossing to the other side in reversed vertical order
        ys = -1.25 + 0.5 * np.arange(6)
        starts = np.stack([np.full(6, -1.2), ys], axis=1)
        goals = np.stack([np.full(6, 1.2), ys[::-1]], axis=1)
    elif kind == "bilateral12":
        ys = -1.05 + 0.42 * np.arange(6)
        left = np.stack([np.full(6, -1.0), ys], axis=1)
        right = np.stack([np.full(6, 1.0), ys], axis=1)
        starts = np.concatenate([left, right])
        goals = np.concatenate([right, left])
    else:  # pragma: no cover - guarded by caller
        raise ValueError(kind)
    return starts, goals


def _sample_separated(rng, n, lo, hi, min_sep, accept, max_retries):
    pts = np.empty((n, 2))
    for i in range(n):
        for _ in range(max_retries):
            cand = rng.uniform(lo, hi, size=2)
            if i and np.min(np.sqrt(((pts[:i] - cand) ** 2).sum(1))) < min_sep:
                continue
            if not accept(i, cand):
                continue
            pts[i] = cand
            break
        else:
            return None
    return pts


def make_scenario(kind: str, n_robots: int, seed: int, cfg: EnvConfig = DEFAULT_ENV) -> Scenario:
    """Build a scenario; identical arguments always give identical output."""
    if kind not in SCENARIO_KINDS:
        raise ValueError(f"unknown scenario kind {kind!r}")
    if n_robots < 2:
        raise ValueError("need at least two robots")
    if kind in FIXED_SIZES:
        if n_robots != FIXED_SIZES[kind]:
            raise ValueError(f"{kind} requires n_robots={FIXED_SIZES[kind]}, got {n_robots}")
        starts, goals = _fixed_layout(kind)
        sc = Scenario(kind, n_robots, int(seed), starts, goals, cfg.arena_half_extent)
        validate_scenario(sc, cfg)
        return sc

    rng = np.random.default_rng(seed)
    lo = -cfg.arena_half_extent + cfg.wall_margin
    hi = cfg.arena_half_extent - cfg.wall_margin
    sep = cfg.min_separation
    for _ in range(cfg.max_retries):
        starts = _sample_separated(rng, n_robots, lo, hi, sep, lambda i, c: True, cfg.max_retries)
        if starts is None:
            continue

        def goal_ok(i, c, starts=starts):
            d = np.sqrt(((c - starts[i]) ** 2).sum())
            return cfg.min_goal_distance <= d <= cfg.max_goal_distance

        goals = _sample_separated(rng, n_robots, lo, hi, sep, goal_ok, cfg.max_retries)
        if goals is not None:
            sc = Scenario(kind, n_robots, int(seed), starts, goals, cfg.arena_half_extent)
            validate_scenario(sc, cfg)
            return sc
    raise ValueError(
        f"could not place {n_robots} non-overlapping robots after {cfg.max_retries} attempts; "
        "arena too small"
    )


# --------------------------------------------------------------------------
# observation / reset


def observe_all(state: WorldState, cfg: EnvConfig = DEFAULT_ENV) -> np.ndarray:
    """All local observations stacked as an (N, 8 + 2(N-1)) array."""
    n = state.n_robots
    obs = np.empty((n, obs_length(n)))
    idx = np.arange(n, dtype=np.float64)
    obs[:, 0] = idx / n if cfg.index_mode == "normalized" else idx
    obs[:, 1:3] = state.velocities
    obs[:, 3:5] = state.positions
    obs[:, 5:7] = state.goals - state.positions
    rel = state.positions[None, :, :] - state.positions[:, None, :]
    mask = ~np.eye(n, dtype=bool)
    obs[:, 7:-1] = rel[mask].reshape(n, 2 * (n - 1))
    obs[:, -1] = cfg.r_safe
    return obs


def observe(state: WorldState, i: int, cfg: EnvConfig = DEFAULT_ENV) -> np.ndarray:
    n = state.n_robots
    if not 0 <= i < n:
        raise IndexError(f"robot index {i} out of range for {n} robots")
    p = state.positions[i]
    others = [state.positions[j] - p for j in range(n) if j != i]
    index = i / n if cfg.index_mode == "normalized" else float(i)
    return np.concatenate(
        [[index], state.velocities[i], p, state.goals[i] - p, np.ravel(others), [cfg.r_safe]]
    )


def reset(scenario: Scenario, cfg: EnvConfig = DEFAULT_ENV) -> tuple[WorldState, np.ndarray]:
    validate_scenario(scenario, cfg)
    n = scenario.n_robots
    pos = scenario.starts.astype(np.float64).copy()
    goals = scenario.goals.astype(np.float64).copy()
    diff = goals - pos
    state = WorldState(
        positions=pos,
        velocities=np.zeros((n, 2)),
        goals=goals,
        t_step=0,
        reached=np.zeros(n, dtype=bool),
        prev_goal_dists=np.sqrt((diff**2).sum(1)),
    )
    return state, observe_all(state, cfg)


# --------------------------------------------------------------------------
# reward


def _min_clearance(positions: np.ndarray, i: int, radius: float) -> float:
    d = positions - positions[i]
    dist = np.sqrt((d**2).sum(1))
    dist[i] = np.inf
    return float(dist.min() - 2.0 * radius)


def reward_of(before: WorldState, after: WorldState, i: int, cfg: EnvConfig = DEFAULT_ENV) -> float:
    """Per-robot reward with branch priority goal > contact > proximity > progress.

    A robot that had already arrived before this step earns nothing.
    """
    if before.reached[i]:
        return 0.0
    diff = after.goals[i] - after.positions[i]
    d_g = float(np.sqrt((diff**2).sum()))
    if d_g < cfg.goal_threshold:
        return GOAL_REWARD
    clearance = _min_clearance(after.positions, i, cfg.robot_radius)
    if clearance < 0.0:
        return COLLISION_REWARD
    if clearance < cfg.r_th:
        return COLLISION_REWARD + PROXIMITY_SLOPE * clearance
    return float(before.prev_goal_dists[i] - d_g)


# --------------------------------------------------------------------------
# dynamics kernels


@njit
def _step_loop(pos, vel, goals, reached, prev_d, actions, dt, v_max, a_max, half, radius, goal_thr, r_th):
    n = pos.shape[0]
    new_pos = pos.copy()
    new_vel = vel.copy()
    dists = np.empty(n)
    rewards = np.zeros(n)
    new_reached = reached.copy()
    for i in range(n):
        if reached[i]:
            new_vel[i, 0] = 0.0
            new_vel[i, 1] = 0.0
            continue
        for k in range(2):
            a = min(max(actions[i, k], -a_max), a_max)
            new_vel[i, k] = vel[i, k] + a * dt
        speed = np.sqrt(new_vel[i, 0] * new_vel[i, 0] + new_vel[i, 1] * new_vel[i, 1])
        if speed > v_max:
            s = v_max / speed
            new_vel[i, 0] = new_vel[i, 0] * s
            new_vel[i, 1] = new_vel[i, 1] * s
        for k in range(2):
            p = pos[i, k] + new_vel[i, k] * dt
            if p > half:
                p = half
                new_vel[i, k] = 0.0
            elif p < -half:
                p = -half
                new_vel[i, k] = 0.0
            new_pos[i, k] = p
    for i in range(n):
        dx = goals[i, 0] - new_pos[i, 0]
        dy = goals[i, 1] - new_pos[i, 1]
        dists[i] = np.sqrt(dx * dx + dy * dy)
    contact = 2.0 * radius
    collisions = 0
    clearance = np.full(n, np.inf)
    for i in range(n):
        for j in range(i + 1, n):
            dx = new_pos[i, 0] - new_pos[j, 0]
            dy = new_pos[i, 1] - new_pos[j, 1]
            c = np.sqrt(dx * dx + dy * dy)
            if c < contact:
                collisions += 1
            c = c - contact
            if c < clearance[i]:
                clearance[i] = c
            if c < clearance[j]:
                clearance[j] = c
    for i in range(n):
        if reached[i]:
            continue
        if dists[i] < goal_thr:
            rewards[i] = 1.0
            new_reached[i] = True
        elif clearance[i] < 0.0:
            rewards[i] = -0.35
        elif clearance[i] < r_th:
            rewards[i] = -0.35 + 0.05 * clearance[i]
        else:
            rewards[i] = prev_d[i] - dists[i]
    return new_pos, new_vel, new_reached, dists, rewards, collisions


def _step_vec(pos, vel, goals, reached, prev_d, actions, dt, v_max, a_max, half, radius, goal_thr, r_th):
    n = pos.shape[0]
    a = np.minimum(np.maximum(actions, -a_max), a_max)
    new_vel = vel + a * dt
    speed = np.sqrt(new_vel[:, 0] * new_vel[:, 0] + new_vel[:, 1] * new_vel[:, 1])
    over = speed > v_max
    if over.any():
        s = v_max / speed[over]
        new_vel[over] = new_vel[over] * s[:, None]
    new_pos = pos + new_vel * dt
    hi = new_pos > half
    lo = new_pos < -half
    new_pos[hi] = half
    new_pos[lo] = -half
    new_vel[hi | lo] = 0.0
    new_pos[reached] = pos[reached]
    new_vel[reached] = 0.0

    dx = goals[:, 0] - new_pos[:, 0]
    dy = goals[:, 1] - new_pos[:, 1]
    dists = np.sqrt(dx * dx + dy * dy)
    contact = 2.0 * radius
    ii, jj = np.triu_indices(n, 1)
    px = new_pos[ii, 0] - new_pos[jj, 0]
    py = new_pos[ii, 1] - new_pos[jj, 1]
    c = np.sqrt(px * px + py * py)
    collisions = int(np.count_nonzero(c < contact))
    c = c - contact
    clearance = np.full(n, np.inf)
    np.minimum.at(clearance, ii, c)
    np.minimum.at(clearance, jj, c)

    rewards = np.where(
        dists < goal_thr,
        1.0,
        np.where(
            clearance < 0.0,
            -0.35,
            np.where(clearance < r_th, -0.35 + 0.05 * clearance, prev_d - dists),
        ),
    )
    rewards[reached] = 0.0
    new_reached = reached | (dists < goal_thr)
    return new_pos, new_vel, new_reached, dists, rewards, collisions


_step_kernel = pick(_step_loop, _step_vec)


def step(state: WorldState, actions, cfg: EnvConfig = DEFAULT_ENV) -> StepResult:
    """Advance one semi-implicit Euler step; arrived robots stay frozen."""
    if state.t_step >= cfg.episode_length or bool(np.all(state.reached)):
        raise RuntimeError("step() called on a terminal state; reset the episode first")
    actions = np.asarray(actions, dtype=np.float64).reshape(state.n_robots, 2)
    pos, vel, reached, dists, rewards, collisions = _step_kernel(
        state.positions,
        state.velocities,
        state.goals,
        state.reached,
        state.prev_goal_dists,
        actions,
        cfg.dt,
        cfg.v_max,
        cfg.a_max,
        cfg.arena_half_extent,
        cfg.robot_radius,
        cfg.goal_threshold,
        cfg.r_th,
    )
    nxt = WorldState(pos, vel, state.goals, state.t_step + 1, reached, dists)
    done = bool(reached.all()) or nxt.t_step >= cfg.episode_length
    return StepResult(
        next_state=nxt,
        observations=observe_all(nxt, cfg),
        rewards=rewards,
        done=done,
        per_robot_done=reached.copy(),
        collision_count_delta=int(collisions),
    )


def with_overrides(cfg: EnvConfig, **kw) -> EnvConfig:
    return replace(cfg, **kw)
