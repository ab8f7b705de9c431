"""
FGSM against a freshly trained Q-network
========================================

Train a small DQN on the merge scenario, then measure how often a
sign-gradient perturbation of size eps flips its greedy action.
"""

import numpy as np

from rldefense.agent import DqnConfig, collect_clean_observations, greedy_action, train
from rldefense.attacks import FgsmConfig, attack_success_probe, fgsm_perturb
from rldefense.envsim import merge_config

scenario = merge_config()
q, log = train(scenario, DqnConfig(episodes=400, epsilon_decay_episodes=200, seed=1))
print(f"mean return, last 100 training episodes: {np.mean(log.returns[-100:]):.2f}")

states = collect_clean_observations(q, scenario, 500, seed=2)

for eps in (0.01, 0.02, 0.05, 0.1, 0.2):
    flips = np.mean([attack_success_probe(q, s, FgsmConfig(eps)) for s in states])
    print(f"eps={eps:<5} greedy action changed in {100 * flips:5.1f}% of states")

# the perturbation is a signed step per coordinate
s = states[0]
adv = fgsm_perturb(q, s, FgsmConfig(0.05))
print(np.round((adv - s) / 0.05).reshape(5, 5))
print("action", greedy_action(q, s), "->", greedy_action(q, adv))
