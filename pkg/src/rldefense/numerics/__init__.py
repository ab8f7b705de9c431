"""Dense networks, losses, optimizers and PCA on plain numpy arrays."""

from .mlp import (
    DimensionError,
    MlpParams,
    MlpSpec,
    NumericError,
    backprop_params,
    backward,
    cross_entropy_from_logits,
    forward,
    init_params,
    input_gradient,
    loss_and_grad,
    mse_loss,
    zero_params,
)
from .optim import OptimizerState, make_optimizer, optimizer_step
from .pca import InsufficientDataError, PcaModel, jacobi_eigh, pca_fit, pca_reconstruct
from .files import (
    FormatError,
    load_mlp,
    load_observations,
    load_pca,
    save_mlp,
    save_observations,
    save_pca,
)

__all__ = [
    "DimensionError",
    "FormatError",
    "InsufficientDataError",
    "MlpParams",
    "MlpSpec",
    "NumericError",
    "OptimizerState",
    "PcaModel",
    "backprop_params",
    "backward",
    "cross_entropy_from_logits",
    "forward",
    "init_params",
    "input_gradient",
    "jacobi_eigh",
    "load_mlp",
    "load_observations",
    "load_pca",
    "loss_and_grad",
    "make_optimizer",
    "mse_loss",
    "optimizer_step",
    "pca_fit",
    "pca_reconstruct",
    "save_mlp",
    "save_observations",
    "save_pca",
    "zero_params",
]
