"""Minimal dense-tensor engine with reverse-mode autodiff."""

from .checkpoint import load_state, save_state
from .conv import conv2d, conv3d
from .dtype import (
    debug_checks_enabled,
    dtype_scope,
    get_default_dtype,
    set_debug_checks,
    set_default_dtype,
)
from .gradcheck import GradCheckReport, finite_difference_check
from .interpolate import interp_matrix, interpolate_bilinear, interpolate_bilinear2x
from .optim import Adam
from .tensor import (
    Graph,
    Parameter,
    Tensor,
    add,
    add_scalar,
    backward,
    clip,
    concat,
    div,
    exp,
    is_recording,
    log,
    matmul,
    min_elementwise,
    mul,
    mul_scalar,
    neg,
    no_grad,
    permute,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    sub,
)
from . import nn

__all__ = [
    "Adam",
    "GradCheckReport",
    "Graph",
    "Parameter",
    "Tensor",
    "add",
    "add_scalar",
    "backward",
    "clip",
    "concat",
    "conv2d",
    "conv3d",
    "debug_checks_enabled",
    "div",
    "dtype_scope",
    "exp",
    "finite_difference_check",
    "get_default_dtype",
    "interp_matrix",
    "interpolate_bilinear",
    "interpolate_bilinear2x",
    "is_recording",
    "load_state",
    "log",
    "matmul",
    "min_elementwise",
    "mul",
    "mul_scalar",
    "neg",
    "nn",
    "no_grad",
    "permute",
    "reduce_mean",
    "reduce_sum",
    "relu",
    "reshape",
    "save_state",
    "set_debug_checks",
    "set_default_dtype",
    "sigmoid",
    "softmax",
    "sqrt",
    "sub",
]
