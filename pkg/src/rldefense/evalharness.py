"""Seeded evaluation of attacked and defended policies.

The per-step order inside an episode is fixed: observe, perturb (if an
attack is configured), filter (if a defense is configured), act greedily on
the filtered state, step the simulator.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .agent import QNetwork, flatten, greedy_action
from .attacks import FgsmConfig, fgsm_perturb
from .defenses import DefenseStack
from .envsim import DrivingEnv, ScenarioConfig

log = logging.getLogger(__name__)

SUITE = ("baseline", "attack", "random_noise", "autoencoder", "pca", "ensemble")
DISPLAY_NAMES = {
    "baseline": "No Attack (Baseline)",
    "attack": "FGSM Attack",
    "random_noise": "Random Noise (FGSM)",
    "autoencoder": "Autoencoder (FGSM)",
    "pca": "PCA (FGSM)",
    "ensemble": "Ensemble (FGSM)",
}
EPSILON_GRID = (0.01, 0.02, 0.05, 0.1, 0.2)


@dataclass
class EvalConfig:
    scenario: ScenarioConfig
    episodes: int = 100
    attack: FgsmConfig | None = None
    defense: DefenseStack | None = None
    base_seed: int = 0
    batch_size: int = 10
    sma_window: int = 10
    label: str = "eval"

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.batch_size < 1 or self.episodes % self.batch_size:
            raise ValueError(f"batch_size {self.batch_size} must divide episodes {self.episodes}")


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    reward: float
    collided: bool
    steps: int
    seed: int


@dataclass
class EvalSummary:
    label: str
    mean_reward: float
    std_reward: float
    mean_collision_rate: float
    std_collision_rate: float
    n: int
    manifest: dict = field(default_factory=dict)

    def row(self) -> list:
        return [self.label, self.mean_reward, self.std_reward, self.mean_collision_rate, self.std_collision_rate, self.n]


def run_episode(q: QNetwork, cfg: EvalConfig, episode_seed: int, episode: int = 0, trace=None) -> EpisodeRecord:
    """Play one episode.

    ``trace``, if given, is called once per step with a dict holding the
    clean, attacked and fused states, each defense member's output and the
    chosen action.
    """
    env = DrivingEnv(cfg.scenario)
    s = flatten(env.reset(episode_seed))
    if cfg.defense is not None:
        cfg.defense.reset(episode_seed)
    total, collided, steps = 0.0, False, 0
    done = False
    while not done:
        attacked = s
        if cfg.attack is not None and cfg.attack.attacks_step(steps):
            attacked = fgsm_perturb(q, s, cfg.attack)
        members: list = []
        fused = attacked if cfg.defense is None else cfg.defense.apply(attacked, trace=members)
        action = greedy_action(q, fused)
        if trace is not None:
            trace({"step": steps, "clean": s, "attacked": attacked, "members": members, "fused": fused, "action": action})
        result = env.step(action)
        total += result.reward
        collided = collided or result.crashed
        steps += 1
        s, done = flatten(result.observation), result.done
    return EpisodeRecord(episode, total, collided, steps, int(episode_seed))


def episode_seed(base_seed: int, episode: int) -> int:
    return int(base_seed) + int(episode)


def run_eval(q: QNetwork, cfg: EvalConfig) -> tuple[list[EpisodeRecord], EvalSummary]:
    records = [
        run_episode(q, cfg, episode_seed(cfg.base_seed, e), episode=e) for e in range(1, cfg.episodes + 1)
    ]
    manifest = {"base_seed": cfg.base_seed, "episodes": cfg.episodes, "batch_size": cfg.batch_size}
    if cfg.attack is not None:
        manifest.update({"epsilon": cfg.attack.epsilon, "attack_loss": cfg.attack.loss})
    if cfg.defense is not None:
        manifest["defense"] = cfg.defense.label
    return records, summarize(records, cfg.batch_size, label=cfg.label, manifest=manifest)


def summarize(records, batch_size: int = 10, label: str = "eval", manifest: dict | None = None) -> EvalSummary:
    """Population mean/std of rewards; collision rate mean/std over consecutive batches."""
    rewards = np.array([r.reward for r in records], dtype=np.float64)
    collided = np.array([r.collided for r in records], dtype=np.float64)
    if rewards.size == 0 or rewards.size % batch_size:
        raise ValueError(f"batch_size {batch_size} must divide the record count {rewards.size}")
    rates = collided.reshape(-1, batch_size).mean(axis=1)
    return EvalSummary(
        label,
        float(rewards.mean()),
        float(rewards.std()),
        float(rates.mean()),
        float(rates.std()),
        int(rewards.size),
        dict(manifest or {}),
    )


def sma(series, window: int) -> np.ndarray:
    """Trailing moving average; the first ``window - 1`` points average the available prefix."""
    x = np.asarray(series, dtype=np.float64)
    if window < 1:
        raise ValueError("window must be >= 1")
    if x.size == 0:
        return x.copy()
    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


# -- standard suite ----------------------------------------------------------


def calibrate_epsilon(
    q: QNetwork,
    scenario: ScenarioConfig,
    baseline_reward: float,
    episodes: int = 100,
    base_seed: int = 0,
    target_fraction: float = 0.25,
    grid=EPSILON_GRID,
    loss: str = "cross_entropy",
) -> tuple[float, dict[float, float]]:
    """Smallest grid epsilon whose undefended attacked mean reward is at most
    ``target_fraction`` of the clean baseline; the largest grid value if none is.
    """
    sweep: dict[float, float] = {}
    for eps in grid:
        cfg = EvalConfig(scenario, episodes, attack=FgsmConfig(eps, loss), base_seed=base_seed, batch_size=1)
        _, summary = run_eval(q, cfg)
        sweep[eps] = summary.mean_reward
        log.info("calibration eps=%g mean reward %.3f (baseline %.3f)", eps, summary.mean_reward, baseline_reward)
        if summary.mean_reward <= target_fraction * baseline_reward:
            return eps, sweep
    log.warning("no epsilon in %s reaches %.0f%% of baseline; using %g", grid, 100 * target_fraction, grid[-1])
    return grid[-1], sweep


def suite_configs(
    scenario: ScenarioConfig,
    attack: FgsmConfig,
    stacks: dict[str, DefenseStack],
    episodes: int = 100,
    base_seed: int = 0,
    batch_size: int = 10,
    sma_window: int = 10,
) -> dict[str, EvalConfig]:
    """The six paired-seed configurations: baseline, attack only, each single defense, ensemble."""
    common = dict(episodes=episodes, base_seed=base_seed, batch_size=batch_size, sma_window=sma_window)
    out = {
        "baseline": EvalConfig(scenario, label="baseline", **common),
        "attack": EvalConfig(scenario, attack=attack, label="attack", **common),
    }
    for name in ("random_noise", "autoencoder", "pca", "ensemble"):
        if name in stacks:
            out[name] = EvalConfig(scenario, attack=attack, defense=stacks[name], label=name, **common)
    return out


# -- CSV ---------------------------------------------------------------------

EPISODE_HEADER = ["label", "episode", "seed", "reward", "collided", "steps"]
SUMMARY_HEADER = ["label", "mean_reward", "std_reward", "mean_collision_rate", "std_collision_rate", "n"]


def write_episode_csv(path, label: str, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPISODE_HEADER)
        for r in records:
            w.writerow([label, r.episode, r.seed, repr(float(r.reward)), int(r.collided), r.steps])


def read_episode_csv(path) -> list[EpisodeRecord]:
    with open(path, newline="") as fh:
        return [
            EpisodeRecord(int(row["episode"]), float(row["reward"]), row["collided"] == "1", int(row["steps"]), int(row["seed"]))
            for row in csv.DictReader(fh)
        ]


def write_summary_csv(path, summaries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for s in summaries:
            w.writerow([s.label] + [repr(float(v)) for v in s.row()[1:5]] + [s.n])


def read_summary_csv(path) -> list[EvalSummary]:
    with open(path, newline="") as fh:
        return [
            EvalSummary(
                row["label"],
                float(row["mean_reward"]),
                float(row["std_reward"]),
                float(row["mean_collision_rate"]),
                float(row["std_collision_rate"]),
                int(row["n"]),
            )
            for row in csv.DictReader(fh)
        ]
