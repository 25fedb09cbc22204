"""Minimal tensor/layer stack with exact backpropagation."""

from .checkpoint import MAGIC, read_checkpoint, write_checkpoint
from .layers import (
    BatchNorm2d,
    Conv2d,
    Dense,
    GlobalAvgPool,
    Layer,
    MaxPool2d,
    ReLU,
    Sequential,
    add_backward,
    add_forward,
    concat_channels_backward,
    concat_channels_forward,
    set_checked,
)
from .loss import SmoothedLossSpec, smoothed_cross_entropy, softmax
from .optim import SGD, SgdConfig, sgd_step

__all__ = [
    "MAGIC",
    "BatchNorm2d",
    "Conv2d",
    "Dense",
    "GlobalAvgPool",
    "Layer",
    "MaxPool2d",
    "ReLU",
    "SGD",
    "Sequential",
    "SgdConfig",
    "SmoothedLossSpec",
    "add_backward",
    "add_forward",
    "concat_channels_backward",
    "concat_channels_forward",
    "read_checkpoint",
    "set_checked",
    "sgd_step",
    "smoothed_cross_entropy",
    "softmax",
    "write_checkpoint",
]
