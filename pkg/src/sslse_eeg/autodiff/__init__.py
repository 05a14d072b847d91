from .check import grad_check
from .ops import (
    add,
    as_tensor,
    concat,
    conv2d,
    dense,
    exp,
    global_avg_pool,
    l2_normalize,
    log,
    matmul,
    mean,
    mul,
    neg,
    relu,
    row_logsumexp,
    scale_channels,
    sigmoid,
    softmax_cross_entropy,
    sub,
    sum_,
    transpose,
)
from .optim import AdamState, adam_step, sgd_step, zero_grads
from .tape import DEFAULT_DTYPE, Tape, Tensor, active_tape, backward, tensor

__all__ = [
    "AdamState",
    "DEFAULT_DTYPE",
    "Tape",
    "Tensor",
    "active_tape",
    "adam_step",
    "add",
    "as_tensor",
    "backward",
    "concat",
    "conv2d",
    "dense",
    "exp",
    "global_avg_pool",
    "grad_check",
    "l2_normalize",
    "log",
    "matmul",
    "mean",
    "mul",
    "neg",
    "relu",
    "row_logsumexp",
    "scale_channels",
    "sgd_step",
    "sigmoid",
    "softmax_cross_entropy",
    "sub",
    "sum_",
    "tensor",
    "transpose",
    "zero_grads",
]
