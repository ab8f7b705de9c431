"""Vanilla DQN: replay buffer, target network, epsilon-greedy exploration."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .envsim import N_ACTIONS, DrivingEnv, ScenarioConfig
from .numerics import MlpParams, MlpSpec, backward, forward, init_params, make_optimizer, optimizer_step
from .numerics.optim import OptimizerState

log = logging.getLogger(__name__)

STATE_DIM = 25
Q_SPEC = MlpSpec((STATE_DIM, 128, 128, N_ACTIONS))


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class DqnConfig:
    episodes: int = 6000
    gamma: float = 0.9
    learning_rate: float = 5e-4
    batch_size: int = 64
    buffer_capacity: int = 20_000
    target_sync_steps: int = 500
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int = 1500
    train_start: int = 1000
    hidden_sizes: tuple[int, ...] = (128, 128)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end must not exceed epsilon_start")
        if self.episodes < 0 or self.batch_size < 1 or self.buffer_capacity < 1:
            raise ValueError("episodes, batch_size and buffer_capacity must be positive")

    def epsilon(self, episode: int) -> float:
        if episode >= self.epsilon_decay_episodes:
            return self.epsilon_end
        frac = episode / self.epsilon_decay_episodes
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


@dataclass
class QNetwork:
    params: MlpParams

    @classmethod
    def initialize(cls, rng: np.random.Generator, hidden_sizes=(128, 128)) -> QNetwork:
        spec = MlpSpec((STATE_DIM, *hidden_sizes, N_ACTIONS))
        return cls(init_params(spec, rng))

    def q_values(self, s) -> np.ndarray:
        out, _ = forward(self.params, flatten(s))
        return out

    def copy(self) -> QNetwork:
        return QNetwork(self.params.copy())


def flatten(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    return s.reshape(-1) if s.ndim == 2 and s.shape == (5, 5) else s


def greedy_action(q: QNetwork, s) -> int:
    # np.argmax returns the first maximum, i.e. the lowest action index on ties
    return int(np.argmax(q.q_values(s)))


def epsilon_greedy_action(q: QNetwork, s, epsilon: float, rng: np.random.Generator) -> int:
    if rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return greedy_action(q, s)


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring of transitions; the oldest entry is overwritten first."""

    def __init__(self, capacity: int, state_dim: int = STATE_DIM):
        self.capacity = int(capacity)
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, state, action: int, reward: float, next_state, done: bool) -> None:
        if not np.isfinite(reward):
            raise ValueError("non-finite reward")
        i = self.cursor
        self.states[i] = flatten(state)
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = flatten(next_state)
        self.dones[i] = float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        idx = rng.integers(self.size, size=batch_size)
        return self.batch(idx)

    def batch(self, idx) -> dict[str, np.ndarray]:
        return {
            "states": self.states[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_states": self.next_states[idx],
            "dones": self.dones[idx],
        }

    def transitions(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        order = [(self.cursor - self.size + i) % self.capacity for i in range(self.size)]
        b = self.batch(order)
        return [
            Transition(b["states"][i], int(b["actions"][i]), float(b["rewards"][i]), b["next_states"][i], bool(b["dones"][i]))
            for i in range(self.size)
        ]


def batch_from_transitions(transitions) -> dict[str, np.ndarray]:
    return {
        "states": np.array([flatten(t.state) for t in transitions]),
        "actions": np.array([t.action for t in transitions], dtype=np.int64),
        "rewards": np.array([t.reward for t in transitions], dtype=np.float64),
        "next_states": np.array([flatten(t.next_state) for t in transitions]),
        "dones": np.array([float(t.done) for t in transitions]),
    }


def td_targets(q_target: QNetwork, batch, gamma: float) -> np.ndarray:
    next_q, _ = forward(q_target.params, batch["next_states"])
    return batch["rewards"] + gamma * (1.0 - batch["dones"]) * next_q.max(axis=1)


def td_update(q: QNetwork, q_target: QNetwork, batch, gamma: float, optimizer: OptimizerState) -> float:
    """One regression step of ``Q(s, a)`` toward ``r + gamma * max Q_target(s', .)``.

    Only the taken action's output carries loss. Updates ``q`` in place and
    returns the batch MSE before the step.
    """
    if not isinstance(batch, dict):
        batch = batch_from_transitions(batch)
    y = td_targets(q_target, batch, gamma)
    out, cache = forward(q.params, batch["states"])
    rows = np.arange(len(y))
    err = out[rows, batch["actions"]] - y
    if np.abs(out).max() > 1e6:
        raise TrainingDivergedError(f"Q magnitude {np.abs(out).max():.3g} exceeds 1e6")
    grad_out = np.zeros_like(out)
    grad_out[rows, batch["actions"]] = 2.0 * err / len(y)
    grads, _ = backward(q.params, cache, grad_out)
    optimizer_step(optimizer, q.params, grads)
    return float(np.mean(err**2))


@dataclass
class TrainingLog:
    returns: list[float] = field(default_factory=list)
    epsilons: list[float] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)
    crashes: list[bool] = field(default_factory=list)

    def append(self, ret: float, eps: float, steps: int, crashed: bool) -> None:
        self.returns.append(ret)
        self.epsilons.append(eps)
        self.steps.append(steps)
        self.crashes.append(crashed)

    def __len__(self) -> int:
        return len(self.returns)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["episode", "return", "epsilon", "steps"])
            for i, (r, e, s) in enumerate(zip(self.returns, self.epsilons, self.steps)):
                w.writerow([i, repr(float(r)), repr(float(e)), s])


def _streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def train(env_config: ScenarioConfig, cfg: DqnConfig, progress=None) -> tuple[QNetwork, TrainingLog]:
    """Train from scratch; bit-reproducible for a given ``cfg.seed``.

    ``progress``, if given, is called as ``progress(episode, log)`` after
    each episode.
    """
    init_rng, explore_rng, env_rng = _streams(cfg.seed, 3)
    q = QNetwork.initialize(init_rng, cfg.hidden_sizes)
    q_target = q.copy()
    opt = make_optimizer(q.params, "adam", learning_rate=cfg.learning_rate)
    buffer = ReplayBuffer(cfg.buffer_capacity)
    env = DrivingEnv(env_config)
    history = TrainingLog()
    total_steps = 0

    for episode in range(cfg.episodes):
        eps = cfg.epsilon(episode)
        s = flatten(env.reset(int(env_rng.integers(2**31))))
        ret, steps = 0.0, 0
        while True:
            a = epsilon_greedy_action(q, s, eps, explore_rng)
            result = env.step(a)
            s_next = flatten(result.observation)
            # the step budget ending is a time limit, not a terminal state
            terminal = result.crashed
            buffer.add(s, a, result.reward, s_next, terminal)
            ret += result.reward
            steps += 1
            total_steps += 1
            if len(buffer) >= max(cfg.train_start, cfg.batch_size):
                td_update(q, q_target, buffer.sample(cfg.batch_size, explore_rng), cfg.gamma, opt)
            if total_steps % cfg.target_sync_steps == 0:
                q_target = q.copy()
            s = s_next
            if result.done:
                break
        history.append(ret, eps, steps, result.crashed)
        if progress is not None:
            progress(episode, history)
        if episode % 500 == 0:
            log.info("episode %d return %.2f eps %.3f", episode, ret, eps)
    return q, history


def collect_clean_observations(q: QNetwork, env_config: ScenarioConfig, n: int, seed: int) -> np.ndarray:
    """Greedy clean rollouts; every pre-action observation is recorded until ``n`` rows exist."""
    data = np.zeros((n, STATE_DIM))
    if n == 0:
        return data
    rng = np.random.default_rng(seed)
    env = DrivingEnv(env_config)
    count = 0
    while count < n:
        s = flatten(env.reset(int(rng.integers(2**31))))
        done = False
        while not done and count < n:
            data[count] = s
            count += 1
            result = env.step(greedy_action(q, s))
            s, done = flatten(result.observation), result.done
    return data
