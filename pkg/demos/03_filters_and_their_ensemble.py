"""
Input filters against perturbed observations
============================================

Fit the autoencoder and PCA filters on clean observations, then compare how
far each filter (and their mean) lands from the clean state when fed an
attacked one.
"""

import numpy as np

from rldefense.agent import DqnConfig, collect_clean_observations, train
from rldefense.attacks import FgsmConfig, fgsm_perturb
from rldefense.defenses import NoiseConfig, build_stack, fit_autoencoder, fit_pca
from rldefense.envsim import merge_config

scenario = merge_config()
q, _ = train(scenario, DqnConfig(episodes=300, epsilon_decay_episodes=150, seed=4))
clean = collect_clean_observations(q, scenario, 2000, seed=5)

ae = fit_autoencoder(clean, epochs=40, seed=6)
pca = fit_pca(clean, 0.95)
print(f"autoencoder MSE {ae.initial_mse:.4f} -> {ae.final_mse:.4f}, PCA keeps {pca.k} of 25 directions")

eps = 0.1
held_out = collect_clean_observations(q, scenario, 300, seed=7)
attacked = np.stack([fgsm_perturb(q, s, FgsmConfig(eps)) for s in held_out])

noise = NoiseConfig(eta=eps, seed=8)
stacks = {
    "none": None,
    "random noise": build_stack(["random_noise"], noise=noise),
    "autoencoder": build_stack(["autoencoder"], autoencoder=ae.params),
    "pca": build_stack(["pca"], pca=pca),
    "ensemble": build_stack(["random_noise", "autoencoder", "pca"], noise=noise, autoencoder=ae.params, pca=pca),
}
for name, stack in stacks.items():
    if stack is not None:
        stack.reset(0)
    filtered = attacked if stack is None else np.stack([stack.apply(s) for s in attacked])
    dist = np.linalg.norm(filtered - held_out, axis=1).mean()
    print(f"{name:>13}: mean distance to the clean state {dist:.3f}")
