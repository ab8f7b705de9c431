"""Dense ReLU networks with hand-written backpropagation.

Everything runs in float64. Inputs may be a single vector of shape ``(d,)``
or a batch of shape ``(n, d)``; outputs keep the same leading layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOSS_KINDS = ("mse", "cross_entropy")


class DimensionError(ValueError):
    """An array does not have the shape a network or loss expects."""


class NumericError(ArithmeticError):
    """A non-finite value appeared inside a network computation."""

    def __init__(self, message: str, layer: int | None = None):
        super().__init__(message if layer is None else f"{message} (layer {layer})")
        self.layer = layer


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "linear"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise DimensionError(f"invalid layer sizes {self.layer_sizes!r}")
        if self.hidden_activation != "relu" or self.output_activation != "linear":
            raise ValueError("only ReLU hidden and linear output layers are supported")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class MlpParams:
    """Weights ``W[l]`` of shape ``(out, in)`` and biases ``b[l]`` of shape ``(out,)``."""

    spec: MlpSpec
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        sizes = self.spec.layer_sizes
        if len(self.weights) != self.spec.n_layers or len(self.biases) != self.spec.n_layers:
            raise DimensionError("parameter count does not match spec")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1],):
                raise DimensionError(
                    f"layer {l}: expected W {(sizes[l + 1], sizes[l])} and b {(sizes[l + 1],)}, "
                    f"got {w.shape} and {b.shape}"
                )

    def arrays(self) -> list[np.ndarray]:
        """Flat list ``[W0, b0, W1, b1, ...]``, the order used on disk."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> MlpParams:
        return MlpParams(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> MlpParams:
        return zero_params(self.spec)

    def allclose(self, other: MlpParams, atol: float = 0.0) -> bool:
        return self.spec == other.spec and all(
            np.allclose(a, b, rtol=0.0, atol=atol) for a, b in zip(self.arrays(), other.arrays())
        )


def zero_params(spec: MlpSpec) -> MlpParams:
    sizes = spec.layer_sizes
    return MlpParams(
        spec,
        [np.zeros((sizes[l + 1], sizes[l])) for l in range(spec.n_layers)],
        [np.zeros(sizes[l + 1]) for l in range(spec.n_layers)],
    )


def init_params(spec: MlpSpec, rng: np.random.Generator) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    sizes = spec.layer_sizes
    weights, biases = [], []
    for l in range(spec.n_layers):
        fan_in, fan_out = sizes[l], sizes[l + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(spec, weights, biases)


def _as_input(params: MlpParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != params.spec.input_size:
        raise DimensionError(f"expected input of length {params.spec.input_size}, got shape {x.shape}")
    return x


def forward(params: MlpParams, x) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Run the network.

    Returns the output and a cache of ``(pre_activation, post_activation)``
    per layer; entry 0 holds the input itself in both slots.
    """
    a = _as_input(params, x)
    cache = [(a, a)]
    last = params.spec.n_layers - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        with np.errstate(over="ignore", invalid="ignore"):
            z = a @ w.T + b
        a = z if l == last else np.maximum(z, 0.0)
        if not np.isfinite(a).all():
            raise NumericError("non-finite activation", layer=l)
        cache.append((z, a))
    return a, cache


def backward(params: MlpParams, cache, grad_out: np.ndarray) -> tuple[MlpParams, np.ndarray]:
    """Backpropagate ``dL/d(output)`` through a cached forward pass.

    For batched input the parameter gradients are summed over the batch,
    so ``grad_out`` should already carry any ``1/n`` averaging.
    """
    grad = np.asarray(grad_out, dtype=np.float64)
    batched = grad.ndim == 2
    n = params.spec.n_layers
    gw: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for l in range(n - 1, -1, -1):
        z, _ = cache[l + 1]
        if l != n - 1:
            grad = grad * (z > 0.0)
        a_prev = cache[l][1]
        if batched:
            gw[l] = grad.T @ a_prev
            gb[l] = grad.sum(axis=0)
        else:
            gw[l] = np.outer(grad, a_prev)
            gb[l] = grad.copy()
        grad = grad @ params.weights[l]
        if not np.isfinite(grad).all():
            raise NumericError("non-finite gradient", layer=l)
    return MlpParams(params.spec, gw, gb), grad


def mse_loss(pred, target) -> float:
    """``(1/d) * sum((pred - target)**2)``; averaged over rows for a batch."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"shape mismatch {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cross_entropy_from_logits(logits, target_index) -> float:
    """Negative log-softmax at ``target_index`` (batch: mean over rows)."""
    logits = np.asarray(logits, dtype=np.float64)
    idx = np.asarray(target_index)
    k = logits.shape[-1]
    if np.any(idx < 0) or np.any(idx >= k):
        raise IndexError(f"target index {target_index} out of range for {k} logits")
    logp = _log_softmax(logits)
    if logits.ndim == 1:
        return float(-logp[int(idx)])
    return float(-np.mean(logp[np.arange(len(logits)), idx]))


def loss_and_grad(kind: str, out: np.ndarray, target, reduce: str = "mean") -> tuple[float, np.ndarray]:
    """Loss value and its gradient with respect to ``out``.

    ``reduce="mean"`` averages per-example losses over a batch, ``"sum"``
    adds them (each row then gets the gradient of its own loss).
    """
    n = out.shape[0] if out.ndim == 2 else 1
    scale = 1.0 / n if reduce == "mean" else 1.0
    if kind == "mse":
        target = np.asarray(target, dtype=np.float64)
        if target.shape != out.shape:
            raise DimensionError(f"target shape {target.shape} does not match output {out.shape}")
        diff = out - target
        d = out.shape[-1]
        per_example = (diff**2).sum(axis=-1) / d
        return float(per_example.sum() * scale), diff * (2.0 / d) * scale
    if kind == "cross_entropy":
        idx = np.asarray(target)
        if np.any(idx < 0) or np.any(idx >= out.shape[-1]):
            raise IndexError(f"target index {target} out of range")
        logp = _log_softmax(out)
        probs = np.exp(logp)
        if out.ndim == 1:
            probs[int(idx)] -= 1.0
            return float(-logp[int(idx)]), probs
        rows = np.arange(n)
        value = -logp[rows, idx].sum() * scale
        probs[rows, idx] -= 1.0
        return float(value), probs * scale
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def input_gradient(params: MlpParams, x, loss: str, target) -> np.ndarray:
    """Gradient of the loss with respect to the network input.

    With a batch, row ``i`` is the gradient of example ``i``'s own loss.
    """
    out, cache = forward(params, x)
    _, g = loss_and_grad(loss, out, target, reduce="sum")
    _, gx = backward(params, cache, g)
    return gx


def backprop_params(params: MlpParams, x, loss: str, target) -> MlpParams:
    """Parameter gradient of the (batch-mean) loss."""
    out, cache = forward(params, x)
    _, g = loss_and_grad(loss, out, target, reduce="mean")
    grads, _ = backward(params, cache, g)
    return grads
