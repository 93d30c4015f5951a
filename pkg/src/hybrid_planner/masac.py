"""Multi-agent soft actor-critic with centralised training, decentralised execution.

One twin soft-Q critic (plus target copies) scores the joint input
``[global state (4N) | o_1 .. o_N | a_1 .. a_N]``; every robot owns an actor that
only ever sees its own observation, a target copy of that actor, and an
auto-tuned temperature ``alpha_i`` kept positive by optimising ``log alpha_i``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import env as envmod
from .nn import (
    AdamState,
    DivergenceError,
    MlpParams,
    adam_init,
    adam_step_arrays,
    adam_update,
    mlp_apply,
    mlp_backward,
    mlp_forward,
    mlp_init,
    params_from_doc,
    params_to_doc,
    split_head,
    squashed_gaussian,
    squashed_gaussian_grads,
)

log = logging.getLogger(__name__)

ACTION_DIM = 2
CHECKPOINT_VERSION = 1


@dataclass
class MasacConfig:
    """Training hyper-parameters; defaults are the full-scale 3-robot setup."""

    n_robots: int = 3
    episodes: int = 50_000
    warmup_episodes: int = 1_000
    timesteps_per_episode: int = 50
    batch_size: int = 2048
    memory_length: int = 1_000_000
    tau: float = 0.005
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    lr_alpha: float = 1e-3
    gamma: float = 0.99
    alpha_init: float = 0.01
    # "action_dim" -> -dim(a_i) = -2;  "table" -> -12
    target_entropy_mode: str = "action_dim"
    reward_scale: float = 1.0
    # "per_frequency": one round every `update_frequency` env steps; "per_step": every step
    update_interpretation: str = "per_frequency"
    update_frequency: int = 50
    updates_per_round: int = 1
    actor_delay: int = 1
    critic_hidden: tuple[int, ...] = (1024, 512, 300)
    actor_hidden: tuple[int, ...] = (500, 128)
    # next-state actions for the bootstrap come from "target" or "online" actors
    next_action_source: str = "target"
    scenario_kind: str = "random"
    d_safe: float = 0.3
    checkpoint_every: int = 1000
    log_every: int = 100
    seed: int = 0

    def __post_init__(self):
        self.critic_hidden = tuple(int(h) for h in self.critic_hidden)
        self.actor_hidden = tuple(int(h) for h in self.actor_hidden)
        if self.n_robots < 2:
            raise ValueError("n_robots must be at least 2")
        if self.target_entropy_mode not in ("action_dim", "table"):
            raise ValueError(f"unknown target_entropy_mode {self.target_entropy_mode!r}")
        if self.update_interpretation not in ("per_frequency", "per_step"):
            raise ValueError(f"unknown update_interpretation {self.update_interpretation!r}")
        if self.next_action_source not in ("target", "online"):
            raise ValueError(f"unknown next_action_source {self.next_action_source!r}")
        for name in ("episodes", "batch_size", "memory_length", "update_frequency",
                     "updates_per_round", "actor_delay", "timesteps_per_episode"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.warmup_episodes < 0:
            raise ValueError("warmup_episodes must be non-negative")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.alpha_init <= 0:
            raise ValueError("alpha_init must be positive")

    @property
    def target_entropy(self) -> float:
        return -float(ACTION_DIM) if self.target_entropy_mode == "action_dim" else -12.0

    @property
    def steps_between_updates(self) -> int:
        return 1 if self.update_interpretation == "per_step" else self.update_frequency

    def to_dict(self) -> dict:
        d = asdict(self)
        d["critic_hidden"] = list(self.critic_hidden)
        d["actor_hidden"] = list(self.actor_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MasacConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown masac config keys {sorted(unknown)}")
        return cls(**d)


def desk_config(**overrides) -> MasacConfig:
    """Reduced setup for CPU runs: 2 robots, small nets, frequent small updates.

    The shorter discount (0.95) makes arrival within the 50-step horizon pay
    off sooner; with 0.99 the same budget plateaus near 50% success.
    """
    base = dict(
        n_robots=2,
        episodes=8_000,
        warmup_episodes=100,
        batch_size=128,
        memory_length=200_000,
        gamma=0.95,
        critic_hidden=(128, 128),
        actor_hidden=(64, 64),
        update_interpretation="per_frequency",
        update_frequency=2,
        checkpoint_every=1_000,
        log_every=250,
    )
    base.update(overrides)
    return MasacConfig(**base)


# --------------------------------------------------------------------------
# replay buffer


@dataclass
class Batch:
    states: np.ndarray  # (B, 4N)
    obs: np.ndarray  # (B, N, L)
    actions: np.ndarray  # (B, N, 2)
    rewards: np.ndarray  # (B, N)
    next_obs: np.ndarray  # (B, N, L)
    next_states: np.ndarray  # (B, 4N)
    dones: np.ndarray  # (B, N) per-robot arrival flags
    terminal: np.ndarray  # (B,) episode ended because every robot arrived

    def __len__(self) -> int:
        return self.states.shape[0]


_FIELDS = ("states", "obs", "actions", "rewards", "next_obs", "next_states", "dones", "terminal")


class ReplayBuffer:
    """Ring buffer over transitions; storage grows lazily up to ``capacity``."""

    def __init__(self, capacity: int, n_robots: int, obs_len: int, initial: int = 4096):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.n_robots = n_robots
        self.obs_len = obs_len
        self.cursor = 0
        self.occupancy = 0
        self._shapes = {
            "states": (4 * n_robots,),
            "obs": (n_robots, obs_len),
            "actions": (n_robots, ACTION_DIM),
            "rewards": (n_robots,),
            "next_obs": (n_robots, obs_len),
            "next_states": (4 * n_robots,),
            "dones": (n_robots,),
            "terminal": (),
        }
        self._alloc = 0
        self._data: dict[str, np.ndarray] = {}
        self._grow(min(self.capacity, initial))

    def _grow(self, rows: int) -> None:
        new = {}
        for k, shape in self._shapes.items():
            dtype = bool if k in ("dones", "terminal") else np.float64
            arr = np.zeros((rows,) + shape, dtype=dtype)
            if self._alloc:
                arr[: self._alloc] = self._data[k]
            new[k] = arr
        self._data = new
        self._alloc = rows

    def __len__(self) -> int:
        return self.occupancy

    def push(self, states, obs, actions, rewards, next_obs, next_states, dones, terminal) -> None:
        if self.cursor >= self._alloc:
            self._grow(min(self.capacity, 2 * self._alloc))
        i = self.cursor
        d = self._data
        d["states"][i] = states
        d["obs"][i] = obs
        d["actions"][i] = actions
        d["rewards"][i] = rewards
        d["next_obs"][i] = next_obs
        d["next_states"][i] = next_states
        d["dones"][i] = dones
        d["terminal"][i] = terminal
        self.cursor = (self.cursor + 1) % self.capacity
        self.occupancy = min(self.occupancy + 1, self.capacity)

    def indices(self, batch_size: int, rng) -> np.ndarray:
        if self.occupancy < batch_size:
            raise ValueError(
                f"cannot sample {batch_size} transitions from a buffer holding {self.occupancy}"
            )
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        return rng.integers(0, self.occupancy, size=batch_size)

    def sample(self, batch_size: int, rng) -> Batch:
        """Uniform draw with replacement over occupied slots."""
        idx = self.indices(batch_size, rng)
        return Batch(**{k: self._data[k][idx] for k in _FIELDS})

    def get(self, slot: int) -> Batch:
        if not 0 <= slot < self.occupancy:
            raise IndexError(slot)
        return Batch(**{k: self._data[k][slot : slot + 1] for k in _FIELDS})


def buffer_push(buffer: ReplayBuffer, transition: Batch) -> ReplayBuffer:
    for b in range(len(transition)):
        buffer.push(*(getattr(transition, k)[b] for k in _FIELDS))
    return buffer


def buffer_sample(buffer: ReplayBuffer, batch_size: int, seed) -> Batch:
    return buffer.sample(batch_size, seed)


# --------------------------------------------------------------------------
# networks


@dataclass
class CriticEnsemble:
    q: list[MlpParams]  # two online critics
    q_target: list[MlpParams]
    opt: list[AdamState]

    @property
    def input_width(self) -> int:
        return self.q[0].layer_sizes[0]


@dataclass
class AgentSet:
    actors: list[MlpParams]
    actor_targets: list[MlpParams]
    log_alpha: np.ndarray  # (N,)
    target_entropy: np.ndarray  # (N,)
    actor_opt: list[AdamState]
    alpha_opt: list[AdamState]

    @property
    def n(self) -> int:
        return len(self.actors)

    @property
    def alphas(self) -> np.ndarray:
        return np.exp(self.log_alpha)


def critic_input_width(n_robots: int, obs_len: int) -> int:
    return 4 * n_robots + n_robots * obs_len + n_robots * ACTION_DIM


def critic_input(states, obs, actions) -> np.ndarray:
    """Joint critic input ``[s | o_1..o_N | a_1..a_N]`` for a batch."""
    b = states.shape[0]
    return np.concatenate([states, obs.reshape(b, -1), actions.reshape(b, -1)], axis=1)


def build_networks(cfg: MasacConfig, seed: int | None = None) -> tuple[CriticEnsemble, AgentSet]:
    n = cfg.n_robots
    obs_len = envmod.obs_length(n)
    ss = np.random.SeedSequence(cfg.seed if seed is None else seed)
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(2 + n)]
    width = critic_input_width(n, obs_len)
    critic_sizes = [width, *cfg.critic_hidden, 1]
    q = [mlp_init(critic_sizes, seeds[0]), mlp_init(critic_sizes, seeds[1])]
    critics = CriticEnsemble(q, [p.copy() for p in q], [adam_init(p.arrays()) for p in q])
    actor_sizes = [obs_len, *cfg.actor_hidden, 2 * ACTION_DIM]
    actors = [mlp_init(actor_sizes, seeds[2 + i]) for i in range(n)]
    log_alpha = np.full(n, np.log(cfg.alpha_init))
    agents = AgentSet(
        actors=actors,
        actor_targets=[a.copy() for a in actors],
        log_alpha=log_alpha,
        target_entropy=np.full(n, cfg.target_entropy),
        actor_opt=[adam_init(a.arrays()) for a in actors],
        alpha_opt=[adam_init([log_alpha[i : i + 1]]) for i in range(n)],
    )
    return critics, agents


def policy_sample(actor: MlpParams, obs_i, eps) -> tuple[np.ndarray, np.ndarray]:
    """Stochastic action and log-probability for one robot (vector or batch)."""
    head = split_head(mlp_apply(actor, obs_i))
    return squashed_gaussian(head, eps)


def policy_mean_action(actor: MlpParams, obs_i) -> np.ndarray:
    return np.tanh(mlp_apply(actor, obs_i)[..., :ACTION_DIM])


# --------------------------------------------------------------------------
# losses and updates


def critic_target(
    batch: Batch,
    critics: CriticEnsemble,
    agents: AgentSet,
    gamma: float,
    rng=None,
    eps=None,
    next_action_source: str = "target",
) -> np.ndarray:
    """Shared bootstrap target ``sum_i r_i + gamma * (min_j Q'_j - sum_i alpha_i log pi_i)``.

    ``eps`` (B, N, 2) fixes the reparameterisation noise; otherwise it is drawn
    from ``rng``.
    """
    b = len(batch)
    n = agents.n
    if b == 0:
        raise ValueError("empty batch")
    if eps is None:
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        eps = rng.standard_normal((b, n, ACTION_DIM))
    policies = agents.actor_targets if next_action_source == "target" else agents.actors
    next_actions = np.empty((b, n, ACTION_DIM))
    entropy_term = np.zeros(b)
    alphas = agents.alphas
    for i in range(n):
        a, logp = policy_sample(policies[i], batch.next_obs[:, i], eps[:, i])
        next_actions[:, i] = a
        entropy_term += alphas[i] * logp
    x = critic_input(batch.next_states, batch.next_obs, next_actions)
    q_next = np.minimum(mlp_apply(critics.q_target[0], x)[:, 0], mlp_apply(critics.q_target[1], x)[:, 0])
    not_terminal = 1.0 - batch.terminal.astype(np.float64)
    y = batch.rewards.sum(axis=1) + gamma * not_terminal * (q_next - entropy_term)
    if not np.all(np.isfinite(y)):
        raise DivergenceError("non-finite critic target")
    return y


def critic_loss_and_grads(batch: Batch, critics: CriticEnsemble, y: np.ndarray):
    """Summed mean-squared error of both online critics against ``y``."""
    x = critic_input(batch.states, batch.obs, batch.actions)
    b = x.shape[0]
    total = 0.0
    grads = []
    for q in critics.q:
        pred, cache = mlp_forward(q, x)
        resid = pred[:, 0] - y
        total += float(np.mean(resid * resid))
        grads.append(mlp_backward(q, cache, (2.0 / b) * resid[:, None], need_input_grad=False))
    if not np.isfinite(total):
        raise DivergenceError("non-finite critic loss")
    return total, grads


def critic_update(batch, critics, agents, gamma, lr, rng=None, eps=None, next_action_source="target"):
    y = critic_target(batch, critics, agents, gamma, rng=rng, eps=eps, next_action_source=next_action_source)
    loss, grads = critic_loss_and_grads(batch, critics, y)
    for q, g, opt in zip(critics.q, grads, critics.opt):
        adam_update(q, g, opt, lr)
    return critics, loss


def actor_loss_and_grads(batch: Batch, critics: CriticEnsemble, agents: AgentSet, i: int, eps_i):
    """Loss ``mean(alpha_i log pi_i - min_j Q_j)`` for agent ``i`` and its actor gradient.

    The other agents keep their replayed actions.  Returns
    ``(loss, gradients, log_probs)``.
    """
    b = len(batch)
    alpha = float(np.exp(agents.log_alpha[i]))
    out, a_cache = mlp_forward(agents.actors[i], batch.obs[:, i])
    head = split_head(out)
    action, logp = squashed_gaussian(head, eps_i)
    joint = batch.actions.copy()
    joint[:, i] = action
    x = critic_input(batch.states, batch.obs, joint)
    q1, c1 = mlp_forward(critics.q[0], x)
    q2, c2 = mlp_forward(critics.q[1], x)
    first = q1[:, 0] <= q2[:, 0]
    q_min = np.where(first, q1[:, 0], q2[:, 0])
    loss = float(np.mean(alpha * logp - q_min))
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite actor loss for agent {i}")

    g1 = np.where(first, -1.0 / b, 0.0)[:, None]
    g2 = np.where(first, 0.0, -1.0 / b)[:, None]
    dx = mlp_backward(critics.q[0], c1, g1, need_param_grads=False).input
    dx = dx + mlp_backward(critics.q[1], c2, g2, need_param_grads=False).input
    off = x.shape[1] - agents.n * ACTION_DIM + i * ACTION_DIM
    d_action = dx[:, off : off + ACTION_DIM]

    da_dmu, da_dls, dlp_dmu, dlp_dls = squashed_gaussian_grads(head, eps_i, action)
    w = alpha / b
    d_out = np.concatenate([d_action * da_dmu + w * dlp_dmu, d_action * da_dls + w * dlp_dls], axis=1)
    grads = mlp_backward(agents.actors[i], a_cache, d_out, need_input_grad=False)
    return loss, grads, logp


def alpha_loss_and_grad(logp: np.ndarray, log_alpha: float, target_entropy: float):
    """``L = mean(-alpha (log pi + H))`` and its derivative w.r.t. ``log alpha``."""
    alpha = float(np.exp(log_alpha))
    m = float(np.mean(logp + target_entropy))
    return -alpha * m, -alpha * m


def actor_update(batch, critics, agents, lr, rng=None, eps=None):
    """One reparameterised gradient step per actor; returns per-agent losses and log-probs."""
    b = len(batch)
    if eps is None:
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        eps = rng.standard_normal((b, agents.n, ACTION_DIM))
    losses = np.empty(agents.n)
    logps = []
    # gradients for every agent are taken at the same parameter values
    pending = []
    for i in range(agents.n):
        loss, grads, logp = actor_loss_and_grads(batch, critics, agents, i, eps[:, i])
        losses[i] = loss
        logps.append(logp)
        pending.append(grads)
    for actor, grads, opt in zip(agents.actors, pending, agents.actor_opt):
        adam_update(actor, grads, opt, lr)
    return agents, losses, logps


def alpha_update(batch_logprobs, agents: AgentSet, lr: float) -> AgentSet:
    for i, logp in enumerate(batch_logprobs):
        _, g = alpha_loss_and_grad(logp, agents.log_alpha[i], agents.target_entropy[i])
        adam_step_arrays([agents.log_alpha[i : i + 1]], [np.array([g])], agents.alpha_opt[i], lr)
    return agents


def soft_update(target: MlpParams, online: MlpParams, tau: float) -> MlpParams:
    """Polyak averaging ``target <- tau * online + (1 - tau) * target`` in place."""
    if target.layer_sizes != online.layer_sizes:
        raise ValueError(f"shape mismatch {target.layer_sizes} vs {online.layer_sizes}")
    for t, o in zip(target.arrays(), online.arrays()):
        t *= 1.0 - tau
        t += tau * o
    target.version += 1
    return target


def update_round(buffer, critics, agents, cfg: MasacConfig, rng, do_actor: bool = True):
    batch = buffer.sample(cfg.batch_size, rng)
    critics, closs = critic_update(
        batch, critics, agents, cfg.gamma, cfg.lr_critic, rng=rng, next_action_source=cfg.next_action_source
    )
    aloss = np.full(agents.n, np.nan)
    if do_actor:
        agents, aloss, logps = actor_update(batch, critics, agents, cfg.lr_actor, rng=rng)
        alpha_update(logps, agents, cfg.lr_alpha)
    for tq, q in zip(critics.q_target, critics.q):
        soft_update(tq, q, cfg.tau)
    if do_actor:
        for ta, a in zip(agents.actor_targets, agents.actors):
            soft_update(ta, a, cfg.tau)
    return closs, aloss


# --------------------------------------------------------------------------
# checkpoints


class CheckpointError(ValueError):
    """A checkpoint manifest or one of its network documents is unusable."""

    def __init__(self, message: str, document: str | None = None):
        super().__init__(message)
        self.document = document


@dataclass
class Checkpoint:
    critics: CriticEnsemble | None
    agents: AgentSet
    n_robots: int
    obs_len: int
    train_episode: int
    config: dict = field(default_factory=dict)

    @property
    def actors(self) -> list[MlpParams]:
        return self.agents.actors


def save_checkpoint(ckpt: Checkpoint, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    networks = {}

    def put(role, params):
        name = f"{role}.json"
        (directory / name).write_text(json.dumps(params_to_doc(params)))
        networks[role] = name

    for i, (a, t) in enumerate(zip(ckpt.agents.actors, ckpt.agents.actor_targets)):
        put(f"actor_{i}", a)
        put(f"actor_target_{i}", t)
    if ckpt.critics is not None:
        for j, (q, t) in enumerate(zip(ckpt.critics.q, ckpt.critics.q_target)):
            put(f"critic_{j}", q)
            put(f"critic_target_{j}", t)
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "n_robots": ckpt.n_robots,
        "obs_len": ckpt.obs_len,
        "train_episode": ckpt.train_episode,
        "alphas": ckpt.agents.alphas.tolist(),
        "log_alphas": ckpt.agents.log_alpha.tolist(),
        "target_entropy": ckpt.agents.target_entropy.tolist(),
        "networks": networks,
        "config": ckpt.config,
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_checkpoint(path) -> Checkpoint:
    """Load a checkpoint from its directory or manifest path."""
    path = Path(path)
    manifest_path = path / "manifest.json" if path.is_dir() else path
    directory = manifest_path.parent
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint manifest not found: {manifest_path}", manifest_path.name) from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{manifest_path.name}: invalid JSON ({exc})", manifest_path.name) from exc
    try:
        n = int(manifest["n_robots"])
        obs_len = int(manifest["obs_len"])
        networks = manifest["networks"]
        log_alpha = np.asarray(manifest.get("log_alphas", np.log(manifest["alphas"])), dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{manifest_path.name}: malformed manifest ({exc})", manifest_path.name) from exc

    def load(role):
        name = networks.get(role)
        if name is None:
            raise CheckpointError(f"manifest lists no network for role {role!r}", manifest_path.name)
        doc_path = directory / name
        try:
            doc = json.loads(doc_path.read_text())
        except FileNotFoundError as exc:
            raise CheckpointError(f"{name}: network document missing", name) from exc
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{name}: invalid JSON ({exc})", name) from exc
        try:
            return params_from_doc(doc, name)
        except ValueError as exc:
            raise CheckpointError(str(exc), name) from exc

    actors = [load(f"actor_{i}") for i in range(n)]
    targets = [load(f"actor_target_{i}") if f"actor_target_{i}" in networks else a.copy()
               for i, a in enumerate(actors)]
    for i, a in enumerate(actors):
        if a.layer_sizes[0] != obs_len or a.layer_sizes[-1] != 2 * ACTION_DIM:
            raise CheckpointError(f"actor_{i} has widths {a.layer_sizes}, expected {obs_len} -> 4",
                                  networks[f"actor_{i}"])
    critics = None
    if "critic_0" in networks:
        q = [load("critic_0"), load("critic_1")]
        qt = [load("critic_target_0"), load("critic_target_1")]
        critics = CriticEnsemble(q, qt, [adam_init(p.arrays()) for p in q])
    te = np.asarray(manifest.get("target_entropy", [-float(ACTION_DIM)] * n), dtype=np.float64)
    agents = AgentSet(
        actors=actors,
        actor_targets=targets,
        log_alpha=log_alpha.copy(),
        target_entropy=te,
        actor_opt=[adam_init(a.arrays()) for a in actors],
        alpha_opt=[adam_init([log_alpha[i : i + 1]]) for i in range(n)],
    )
    return Checkpoint(critics, agents, n, obs_len, int(manifest.get("train_episode", 0)),
                      manifest.get("config", {}))


def random_checkpoint(n_robots: int, seed: int = 0, actor_hidden=(64, 64), critic_hidden=(128, 128)) -> Checkpoint:
    """Untrained networks, useful as a sanity floor for the evaluation harness."""
    cfg = MasacConfig(n_robots=n_robots, actor_hidden=actor_hidden, critic_hidden=critic_hidden, seed=seed)
    critics, agents = build_networks(cfg)
    return Checkpoint(critics, agents, n_robots, envmod.obs_length(n_robots), 0, cfg.to_dict())


# --------------------------------------------------------------------------
# decentralised inference


@dataclass
class WaypointSet:
    positions: np.ndarray  # (T+1, N, 2), row 0 = starts
    reach_steps: np.ndarray  # (N,) step of arrival, -1 if never
    rewards: np.ndarray  # (N,) episode returns
    collision_events: int
    pair_steps: int
    min_distance: float  # smallest centre distance over the rollout
    success: bool

    @property
    def n_robots(self) -> int:
        return self.positions.shape[1]

    @property
    def steps(self) -> int:
        return self.positions.shape[0] - 1

    def robot_waypoints(self, i: int) -> np.ndarray:
        """Positions of robot ``i`` up to (and including) its arrival step."""
        end = self.reach_steps[i] if self.reach_steps[i] >= 0 else self.steps
        return self.positions[: end + 1, i]

    def robot_steps(self, i: int) -> int:
        return int(self.reach_steps[i]) if self.reach_steps[i] >= 0 else self.steps


def infer_waypoints(
    checkpoint: Checkpoint,
    scenario: envmod.Scenario,
    deterministic: bool = True,
    env_cfg: envmod.EnvConfig = envmod.DEFAULT_ENV,
    rng=None,
) -> WaypointSet:
    """Roll the environment forward with each actor acting on its own observation only."""
    if len(checkpoint.actors) != scenario.n_robots:
        raise ValueError(
            f"checkpoint has {len(checkpoint.actors)} actors but scenario has {scenario.n_robots} robots"
        )
    if not deterministic:
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    n = scenario.n_robots
    state, obs = envmod.reset(scenario, env_cfg)
    positions = [state.positions.copy()]
    reach = np.full(n, -1)
    returns = np.zeros(n)
    collisions = 0
    min_dist = _min_center_distance(state.positions)
    done = False
    while not done:
        actions = np.empty((n, ACTION_DIM))
        for i, actor in enumerate(checkpoint.actors):
            if deterministic:
                actions[i] = policy_mean_action(actor, obs[i])
            else:
                actions[i], _ = policy_sample(actor, obs[i], rng.standard_normal(ACTION_DIM))
        res = envmod.step(state, actions, env_cfg)
        newly = res.per_robot_done & ~state.reached
        reach[newly] = res.next_state.t_step
        returns += res.rewards
        collisions += res.collision_count_delta
        state, obs, done = res.next_state, res.observations, res.done
        positions.append(state.positions.copy())
        min_dist = min(min_dist, _min_center_distance(state.positions))
    steps = len(positions) - 1
    return WaypointSet(
        positions=np.asarray(positions),
        reach_steps=reach,
        rewards=returns,
        collision_events=collisions,
        pair_steps=steps * n * (n - 1) // 2,
        min_distance=min_dist,
        success=bool(np.all(reach >= 0)),
    )


def _min_center_distance(p: np.ndarray) -> float:
    diff = p[:, None, :] - p[None, :, :]
    d = np.sqrt((diff**2).sum(-1))
    d[np.diag_indices(len(p))] = np.inf
    return float(d.min())


# --------------------------------------------------------------------------
# training


LOG_HEADER_FIXED = ("episode", "mean_reward")


def _log_header(n: int) -> list[str]:
    return ["episode", "mean_reward", *[f"alpha_{i}" for i in range(n)], "critic_loss", "actor_loss_mean"]


def _fmt(x: float) -> str:
    return "nan" if not np.isfinite(x) else f"{x:.10g}"


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log_rows: list[list[str]]
    alpha_history: np.ndarray  # (episodes, N)
    episode_rewards: np.ndarray  # (episodes,)
    digests: list[str] = field(default_factory=list)  # actor-0 digest per episode (warm-up probe)

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_log_header(self.checkpoint.n_robots))
        w.writerows(self.log_rows)
        return buf.getvalue()


def train(
    cfg: MasacConfig,
    env_cfg: envmod.EnvConfig = envmod.DEFAULT_ENV,
    out_dir=None,
    progress=None,
    record_digests: bool = False,
) -> TrainResult:
    """Run the full training loop: warm-up, rollouts, updates, soft updates, checkpoints."""
    if env_cfg.episode_length != cfg.timesteps_per_episode:
        env_cfg = envmod.EnvConfig(**{**asdict(env_cfg), "episode_length": cfg.timesteps_per_episode})
    n = cfg.n_robots
    obs_len = envmod.obs_length(n)
    ss = np.random.SeedSequence(cfg.seed)
    init_ss, scen_ss, act_ss, upd_ss = ss.spawn(4)
    critics, agents = build_networks(cfg, seed=int(init_ss.generate_state(1)[0]))
    scen_rng = np.random.default_rng(scen_ss)
    act_rng = np.random.default_rng(act_ss)
    upd_rng = np.random.default_rng(upd_ss)
    buffer = ReplayBuffer(cfg.memory_length, n, obs_len)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    rows: list[list[str]] = []
    alpha_hist = np.empty((cfg.episodes, n))
    ep_rewards = np.empty(cfg.episodes)
    digests: list[str] = []
    total_steps = 0
    n_updates = 0
    every = cfg.steps_between_updates
    t0 = time.perf_counter()

    def snapshot(episode):
        return Checkpoint(critics, agents, n, obs_len, episode, {"masac": cfg.to_dict(), "env": asdict(env_cfg)})

    for ep in range(cfg.episodes):
        warm = ep < cfg.warmup_episodes
        scenario = envmod.make_scenario(cfg.scenario_kind, n, int(scen_rng.integers(2**63 - 1)), env_cfg)
        state, obs = envmod.reset(scenario, env_cfg)
        ep_return = np.zeros(n)
        closses, alosses = [], []
        done = False
        try:
            while not done:
                if warm:
                    actions = act_rng.uniform(-1.0, 1.0, size=(n, ACTION_DIM))
                else:
                    eps = act_rng.standard_normal((n, ACTION_DIM))
                    actions = np.empty((n, ACTION_DIM))
                    for i in range(n):
                        actions[i], _ = policy_sample(agents.actors[i], obs[i], eps[i])
                res = envmod.step(state, actions, env_cfg)
                nxt = res.next_state
                buffer.push(
                    state.global_state(), obs, actions, res.rewards * cfg.reward_scale,
                    res.observations, nxt.global_state(), res.per_robot_done,
                    bool(res.per_robot_done.all()),
                )
                ep_return += res.rewards
                total_steps += 1
                state, obs, done = nxt, res.observations, res.done
                if not warm and total_steps % every == 0 and len(buffer) >= cfg.batch_size:
                    for _ in range(cfg.updates_per_round):
                        n_updates += 1
                        closs, aloss = update_round(
                            buffer, critics, agents, cfg, upd_rng, do_actor=n_updates % cfg.actor_delay == 0
                        )
                        closses.append(closs)
                        if np.all(np.isfinite(aloss)):
                            alosses.append(float(np.mean(aloss)))
        except DivergenceError as exc:
            if out_dir is not None:
                save_checkpoint(snapshot(ep), out_dir / "diverged")
                (out_dir / "diverged" / "diagnostic.json").write_text(json.dumps({
                    "episode": ep, "total_steps": total_steps, "updates": n_updates,
                    "alphas": agents.alphas.tolist(), "error": str(exc),
                }, indent=2))
            raise DivergenceError(f"training diverged at episode {ep}: {exc}") from exc

        alpha_hist[ep] = agents.alphas
        ep_rewards[ep] = float(ep_return.mean())
        rows.append([
            str(ep), _fmt(ep_rewards[ep]), *[_fmt(a) for a in agents.alphas],
            _fmt(float(np.mean(closses)) if closses else np.nan),
            _fmt(float(np.mean(alosses)) if alosses else np.nan),
        ])
        if record_digests:
            digests.append(agents.actors[0].digest() + critics.q[0].digest())
        if out_dir is not None and cfg.checkpoint_every and (ep + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(snapshot(ep + 1), out_dir / f"checkpoint_{ep + 1:06d}")
        if progress is not None and (ep + 1) % cfg.log_every == 0:
            recent = ep_rewards[max(0, ep + 1 - cfg.log_every): ep + 1]
            progress(ep + 1, float(recent.mean()), agents.alphas.copy(), time.perf_counter() - t0)

    result = TrainResult(snapshot(cfg.episodes), rows, alpha_hist, ep_rewards, digests)
    if out_dir is not None:
        save_checkpoint(result.checkpoint, out_dir / "final")
        (out_dir / "train_log.csv").write_text(result.log_csv())
    return result
