"""
A short end-to-end run
======================

The same stages the command-line tool runs, on a profile small enough to
finish in well under a minute. Artifacts land in ./demo_artifacts.
"""

from pathlib import Path

from rldefense import pipeline
from rldefense.config import RunConfig

cfg = RunConfig(
    {
        "run.scenario": "merge",
        "run.seed": 0,
        "dqn.episodes": 300,
        "dqn.epsilon_decay_episodes": 150,
        "collect.n": 1000,
        "autoencoder.epochs": 20,
        "eval.episodes": 20,
    }
)
out = Path("demo_artifacts")
results = pipeline.full_pipeline(cfg, out)

print(results["report"]["table"])
ev = results["evaluate"]
print(f"calibrated eps {ev['epsilon']}, noise half-width {ev['eta']}, PCA k {ev['pca_k']}")
print("charts:", *(str(out / name) for name in ("sma_rewards.svg", "collision_rates.svg")))
