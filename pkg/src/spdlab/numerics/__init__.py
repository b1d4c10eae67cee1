"""Minimal differentiable-computation layer."""

from .gradcheck import GradCheckReport, gradient_check, network_gradient_check, relative_error
from .layers import GRU, Dense, SoftmaxHead, Tape, sigmoid, softmax
from .network import Network, NetworkSpec, StaleTapeError, backward, forward, mlp_spec
from .optim import (
    OptimizerState,
    make_optimizer,
    mse_loss_and_grad,
    optimizer_step,
    wbce_loss_and_grad,
    weighted_binary_cross_entropy,
)
from .params import (
    DimensionError,
    DomainError,
    ParameterSet,
    dumps_params,
    load_params,
    loads_params,
    save_params,
    soft_update,
)

__all__ = [
    "GRU", "Dense", "SoftmaxHead", "Tape", "sigmoid", "softmax",
    "Network", "NetworkSpec", "StaleTapeError", "backward", "forward", "mlp_spec",
    "OptimizerState", "make_optimizer", "mse_loss_and_grad", "optimizer_step",
    "wbce_loss_and_grad", "weighted_binary_cross_entropy",
    "DimensionError", "DomainError", "ParameterSet", "dumps_params", "load_params",
    "loads_params", "save_params", "soft_update",
    "GradCheckReport", "gradient_check", "network_gradient_check", "relative_error",
]
