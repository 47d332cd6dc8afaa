"""From-scratch micro dense CNN: layers, loss, optimizer, gradient checks."""

from .layers import AvgPool2, Conv2d, GlobalAvgPool, Linear, ReLU
from .loss import cross_entropy, cross_entropy_grad, softmax, softmax_backward
from .model import DenseBlockConfig, MicroDenseNet, ModelConfig
from .optim import AdamState, adam_step
from .gradcheck import grad_check, relative_error
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "AvgPool2",
    "Conv2d",
    "GlobalAvgPool",
    "Linear",
    "ReLU",
    "softmax",
    "softmax_backward",
    "cross_entropy",
    "cross_entropy_grad",
    "DenseBlockConfig",
    "ModelConfig",
    "MicroDenseNet",
    "AdamState",
    "adam_step",
    "grad_check",
    "relative_error",
    "save_checkpoint",
    "load_checkpoint",
]
