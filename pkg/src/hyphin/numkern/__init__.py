"""Dense/sparse kernels and the reverse-mode differentiation tape."""

from .autodiff import (
    Tensor,
    add,
    as_tensor,
    backward,
    constant,
    div,
    elu,
    exp,
    leaky_relu,
    log,
    masked_row_logsumexp,
    masked_row_softmax,
    matmul,
    mean_,
    mul,
    parameter,
    pick,
    power,
    reshape,
    row_blend,
    slice1d,
    stack1d,
    sub,
    sum_,
    tanh,
    transpose,
)
from .dense import as_matrix, require_finite, softmax_rows
from .sparse import SparseBinaryMatrix, spmm

__all__ = [
    "Tensor",
    "SparseBinaryMatrix",
    "add",
    "as_matrix",
    "as_tensor",
    "backward",
    "constant",
    "div",
    "elu",
    "exp",
    "leaky_relu",
    "log",
    "masked_row_logsumexp",
    "masked_row_softmax",
    "matmul",
    "mean_",
    "mul",
    "parameter",
    "pick",
    "power",
    "require_finite",
    "reshape",
    "row_blend",
    "slice1d",
    "softmax_rows",
    "spmm",
    "stack1d",
    "sub",
    "sum_",
    "tanh",
    "transpose",
]
