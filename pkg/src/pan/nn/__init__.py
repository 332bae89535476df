from .tensor import Tensor, add, div, gradients, matmul, mul, no_grad, reshape, sqrt, sub, tmean, tsum
from .ops import (
    batchnorm,
    conv2d,
    conv_out_size,
    cross_entropy,
    dense,
    maxpool2d,
    mse,
    relu,
    softmax,
    tconv_out_size,
    transposed_conv2d,
    unpool_nearest,
)
from .optim import AdamState, adam_init, adam_step

__all__ = [
    "Tensor", "add", "div", "gradients", "matmul", "mul", "no_grad", "reshape",
    "sqrt", "sub", "tmean", "tsum",
    "batchnorm", "conv2d", "conv_out_size", "cross_entropy", "dense", "maxpool2d",
    "mse", "relu", "softmax", "tconv_out_size", "transposed_conv2d", "unpool_nearest",
    "AdamState", "adam_init", "adam_step",
]
