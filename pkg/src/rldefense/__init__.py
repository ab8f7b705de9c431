"""Adversarial robustness workbench for a DQN highway-driving agent.

Trains a Q-network on a small kinematic driving simulator, perturbs its
observations with FGSM at inference time and filters them through random
noise, a denoising autoencoder, PCA reconstruction and their mean ensemble.
"""

__version__ = "0.1.0"
