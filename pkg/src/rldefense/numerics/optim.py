"""SGD and Adam updates over :class:`MlpParams`."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mlp import DimensionError, MlpParams


@dataclass
class OptimizerState:
    kind: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def make_optimizer(params: MlpParams, kind: str = "adam", learning_rate: float = 1e-3, **kwargs) -> OptimizerState:
    if kind not in ("sgd", "adam"):
        raise ValueError(f"unknown optimizer {kind!r}")
    state = OptimizerState(kind=kind, learning_rate=learning_rate, **kwargs)
    if kind == "adam":
        state.m = [np.zeros_like(a) for a in params.arrays()]
        state.v = [np.zeros_like(a) for a in params.arrays()]
    return state


def optimizer_step(state: OptimizerState, params: MlpParams, grads: MlpParams) -> tuple[MlpParams, OptimizerState]:
    """Apply one update in place and return ``(params, state)``."""
    ps, gs = params.arrays(), grads.arrays()
    if len(ps) != len(gs) or any(p.shape != g.shape for p, g in zip(ps, gs)):
        raise DimensionError("gradient shapes do not match parameters")
    state.step_count += 1
    lr = state.learning_rate
    if state.kind == "sgd":
        for p, g in zip(ps, gs):
            p -= lr * g
        return params, state

    b1, b2 = state.beta1, state.beta2
    t = state.step_count
    # bias corrections folded into the step size
    step = lr * np.sqrt(1.0 - b2**t) / (1.0 - b1**t)
    eps_hat = state.eps * np.sqrt(1.0 - b2**t)
    for p, g, m, v in zip(ps, gs, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= step * m / (np.sqrt(v) + eps_hat)
    return params, state
