from .autograd import Tensor, concat
from .network import (
    Network,
    Normalizer,
    NonFiniteLoss,
    TapedNet,
    fit_normalizer,
    loss_param_gradient,
    parameter_count,
)
from .optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "Network",
    "NonFiniteLoss",
    "Normalizer",
    "TapedNet",
    "Tensor",
    "adam_step",
    "concat",
    "fit_normalizer",
    "loss_param_gradient",
    "parameter_count",
]
