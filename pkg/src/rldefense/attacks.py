"""FGSM observation perturbation against a fixed Q-network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent import QNetwork, flatten, greedy_action
from .numerics import backward, forward, input_gradient
from .numerics.mlp import NumericError

LOSSES = ("cross_entropy", "neg_q")


class AttackError(RuntimeError):
    pass


@dataclass(frozen=True)
class FgsmConfig:
    """``loss="cross_entropy"`` treats softmax(Q) as a policy and pushes it away
    from the greedy action; ``"neg_q"`` lowers the greedy action's Q-value.
    With ``apply_every_step=False`` only every ``interval``-th step is attacked.
    """

    epsilon: float = 0.05
    loss: str = "cross_entropy"
    apply_every_step: bool = True
    interval: int = 2

    def __post_init__(self):
        if not self.epsilon >= 0.0:
            raise ValueError("epsilon must be >= 0")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown FGSM loss {self.loss!r}; expected one of {LOSSES}")
        if self.interval < 1:
            raise ValueError("interval must be >= 1")

    def attacks_step(self, step: int) -> bool:
        return self.apply_every_step or step % self.interval == 0


def attack_gradient(q: QNetwork, s, loss: str = "cross_entropy") -> np.ndarray:
    """Input gradient of the attack objective at the greedy action of ``s``."""
    x = flatten(s)
    try:
        a = greedy_action(q, x)
        if loss == "cross_entropy":
            g = input_gradient(q.params, x, "cross_entropy", a)
        else:
            out, cache = forward(q.params, x)
            grad_out = np.zeros_like(out)
            grad_out[a] = -1.0
            _, g = backward(q.params, cache, grad_out)
    except NumericError as exc:
        raise AttackError(f"gradient evaluation failed: {exc}") from exc
    if not np.isfinite(g).all():
        raise AttackError("non-finite attack gradient")
    return g


def fgsm_perturb(q: QNetwork, s, cfg: FgsmConfig) -> np.ndarray:
    """``s + epsilon * sign(grad)``, unclipped, in the input's own shape."""
    s = np.asarray(s, dtype=np.float64)
    if s.size != 25:
        raise ValueError(f"expected a 25-element state, got shape {s.shape}")
    if cfg.epsilon == 0.0:
        return s.copy()
    g = attack_gradient(q, s, cfg.loss)
    return s + cfg.epsilon * np.sign(g).reshape(s.shape)


def attack_success_probe(q: QNetwork, s, cfg: FgsmConfig) -> bool:
    """True when the perturbation changes the greedy action."""
    return greedy_action(q, fgsm_perturb(q, s, cfg)) != greedy_action(q, s)
