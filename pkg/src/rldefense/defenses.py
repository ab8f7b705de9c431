"""Observation filters applied before the policy sees a (possibly attacked) state.

Every defense maps a flat 25-vector to a 25-vector through ``apply``. The
ensemble hands the same raw input to each member and averages the results
coordinate-wise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    MlpParams,
    MlpSpec,
    PcaModel,
    backprop_params,
    forward,
    init_params,
    make_optimizer,
    optimizer_step,
    pca_fit,
    pca_reconstruct,
)
from .numerics.mlp import NumericError

log = logging.getLogger(__name__)

AE_SPEC = MlpSpec((25, 128, 64, 128, 25))


class DefenseConfigError(ValueError):
    pass


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class NoiseConfig:
    eta: float = 0.05
    clip_lo: float = -1.0
    clip_hi: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.eta >= 0.0:
            raise DefenseConfigError("eta must be >= 0")
        if not self.clip_lo < self.clip_hi:
            raise DefenseConfigError("clip_lo must be below clip_hi")


def random_noise_apply(cfg: NoiseConfig, s, rng: np.random.Generator) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    return np.clip(s + rng.uniform(-cfg.eta, cfg.eta, size=s.shape), cfg.clip_lo, cfg.clip_hi)


def autoencoder_apply(params: MlpParams, s) -> np.ndarray:
    out, _ = forward(params, s)
    return out


def pca_apply(model: PcaModel, s) -> np.ndarray:
    return pca_reconstruct(model, s)


class RandomNoiseDefense:
    kind = "random_noise"

    def __init__(self, cfg: NoiseConfig):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)

    def reset(self, seed: int) -> None:
        """Re-key the generator, e.g. once per episode."""
        self.rng = np.random.default_rng([self.cfg.seed, int(seed)])

    def apply(self, s) -> np.ndarray:
        return random_noise_apply(self.cfg, s, self.rng)


@dataclass(frozen=True)
class AutoencoderDefense:
    params: MlpParams
    kind: str = "autoencoder"

    def apply(self, s) -> np.ndarray:
        return autoencoder_apply(self.params, s)


@dataclass(frozen=True)
class PcaDefense:
    model: PcaModel
    kind: str = "pca"

    def apply(self, s) -> np.ndarray:
        return pca_apply(self.model, s)


class IdentityDefense:
    kind = "identity"

    def apply(self, s) -> np.ndarray:
        return np.array(s, dtype=np.float64)


@dataclass
class DefenseStack:
    members: list = field(default_factory=list)
    fusion: str = "mean"

    def __post_init__(self):
        if not self.members:
            raise DefenseConfigError("a defense stack needs at least one member")
        if self.fusion != "mean":
            raise DefenseConfigError(f"unsupported fusion {self.fusion!r}")

    @property
    def label(self) -> str:
        return "+".join(m.kind for m in self.members)

    def reset(self, seed: int) -> None:
        for m in self.members:
            if hasattr(m, "reset"):
                m.reset(seed)

    def apply(self, s, trace: list | None = None) -> np.ndarray:
        """Apply every member to ``s`` and return the mean of their outputs.

        If ``trace`` is a list, member outputs are appended to it in order.
        """
        return ensemble_apply(self, s, trace)


def ensemble_apply(stack: DefenseStack, s, trace: list | None = None) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    outs = [np.asarray(m.apply(s), dtype=np.float64) for m in stack.members]
    if trace is not None:
        trace.extend(outs)
    if len(outs) == 1:
        return outs[0]
    # anchored on the first member so identical members reproduce it bit-for-bit
    base = outs[0]
    spread = np.zeros_like(base)
    for o in outs[1:]:
        spread += o - base
    return base + spread / len(outs)


# -- fitting -----------------------------------------------------------------


@dataclass
class AutoencoderFit:
    params: MlpParams
    initial_mse: float
    final_mse: float
    epoch_losses: list[float]


def reconstruction_mse(params: MlpParams, data) -> float:
    out, _ = forward(params, data)
    return float(np.mean((out - data) ** 2))


def fit_autoencoder(
    clean_data,
    epochs: int = 200,
    lr: float = 1e-3,
    batch_size: int = 64,
    seed: int = 0,
    spec: MlpSpec = AE_SPEC,
) -> AutoencoderFit:
    """Minimize reconstruction MSE on ``clean_data`` with minibatch Adam."""
    data = np.asarray(clean_data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != spec.input_size:
        raise DefenseConfigError(f"expected an n x {spec.input_size} matrix, got {data.shape}")
    if data.shape[0] < batch_size:
        raise DefenseConfigError(f"need at least batch_size={batch_size} rows, got {data.shape[0]}")
    init_rng, shuffle_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    params = init_params(spec, init_rng)
    initial = reconstruction_mse(params, data)
    opt = make_optimizer(params, "adam", learning_rate=lr)
    losses = []
    n = data.shape[0]
    for epoch in range(epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            xb = data[order[start : start + batch_size]]
            try:
                grads = backprop_params(params, xb, "mse", xb)
            except NumericError as exc:
                raise FitError(f"autoencoder fitting diverged at epoch {epoch}: {exc}") from exc
            optimizer_step(opt, params, grads)
        loss = reconstruction_mse(params, data)
        if not np.isfinite(loss):
            raise FitError(f"non-finite reconstruction loss at epoch {epoch}")
        losses.append(loss)
    final = losses[-1] if losses else initial
    log.info("autoencoder fit: mse %.3g -> %.3g over %d epochs", initial, final, epochs)
    return AutoencoderFit(params, initial, final, losses)


def fit_pca(clean_data, variance_target: float = 0.95) -> PcaModel:
    return pca_fit(clean_data, variance_target)


def build_stack(
    kinds,
    noise: NoiseConfig | None = None,
    autoencoder: MlpParams | None = None,
    pca: PcaModel | None = None,
) -> DefenseStack:
    """Assemble a stack from kind names: random_noise, autoencoder, pca, identity."""
    members = []
    for kind in kinds:
        if kind == "random_noise":
            members.append(RandomNoiseDefense(noise or NoiseConfig()))
        elif kind == "autoencoder":
            if autoencoder is None:
                raise DefenseConfigError("autoencoder defense requested without fitted parameters")
            members.append(AutoencoderDefense(autoencoder))
        elif kind == "pca":
            if pca is None:
                raise DefenseConfigError("PCA defense requested without a fitted model")
            members.append(PcaDefense(pca))
        elif kind == "identity":
            members.append(IdentityDefense())
        else:
            raise DefenseConfigError(f"unknown defense kind {kind!r}")
    return DefenseStack(members)
