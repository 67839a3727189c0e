from .gradcheck import grad_check
from .kernels import depthwise_conv2d, gru_layer
from .sampling import bilinear_sample, linear_sample
from .tensor import (
    NonFiniteError,
    OpCounter,
    ShapeError,
    Tape,
    Tensor,
    add,
    as_tensor,
    backward,
    broadcast_to,
    concat,
    count_ops,
    div,
    elementwise,
    layer_norm,
    leaky_relu,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    pad,
    power,
    record_branches,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    softmax_rows,
    sub,
    swapaxes,
    take,
    tanh,
    transpose,
    tsum,
)

__all__ = [
    "NonFiniteError",
    "OpCounter",
    "ShapeError",
    "Tape",
    "Tensor",
    "add",
    "as_tensor",
    "backward",
    "bilinear_sample",
    "broadcast_to",
    "concat",
    "count_ops",
    "depthwise_conv2d",
    "div",
    "elementwise",
    "grad_check",
    "gru_layer",
    "layer_norm",
    "leaky_relu",
    "linear_sample",
    "matmul",
    "mean",
    "mul",
    "neg",
    "no_grad",
    "pad",
    "power",
    "record_branches",
    "relu",
    "reshape",
    "scale",
    "sigmoid",
    "softmax",
    "softmax_rows",
    "sub",
    "swapaxes",
    "take",
    "tanh",
    "transpose",
    "tsum",
]
