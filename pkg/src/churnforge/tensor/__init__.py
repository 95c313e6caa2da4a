"""Dense tensors with reverse-mode differentiation and the Adam optimizer."""

from churnforge.tensor.adam import AdamState, adam_step
from churnforge.tensor.core import (
    GradTape,
    Tensor,
    add,
    backward,
    broadcast_to,
    concat,
    exp,
    gelu,
    log,
    matmul,
    mean,
    mul,
    narrow,
    pow_const,
    relu,
    reshape,
    sigmoid,
    sub,
    sum_,
    tanh,
    transpose,
)
from churnforge.tensor.gradcheck import GradCheckReport, grad_check
from churnforge.tensor.ops import (
    attention,
    bce_with_logits,
    conv2d,
    dropout,
    maxpool2d,
    normalize,
    softmax,
    squared_error_on_sigmoid,
)

__all__ = [
    "AdamState",
    "GradCheckReport",
    "GradTape",
    "Tensor",
    "adam_step",
    "add",
    "attention",
    "backward",
    "bce_with_logits",
    "broadcast_to",
    "concat",
    "conv2d",
    "dropout",
    "exp",
    "gelu",
    "grad_check",
    "log",
    "matmul",
    "maxpool2d",
    "mean",
    "mul",
    "narrow",
    "normalize",
    "pow_const",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "squared_error_on_sigmoid",
    "sub",
    "sum_",
    "tanh",
    "transpose",
]
