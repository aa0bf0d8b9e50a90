"""Minimal float64 tensor algebra, reverse-mode autodiff, MLPs and Adam."""
from .nn import Mlp
from .optim import AdamState, adam_step, zero_grad
from .tensor import (ContractError, DimensionError, Parameter, Tensor, absolute, add,
                     arcsin, arctan2, arctanh, as_tensor, clip, concat, cos, cross, div, dot, exp, getitem,
                     is_tensor, log, matmul, maximum, mean, mul, neg, norm, power, relu,
                     reshape, sin, softplus, sqrt, stack, sub, sum, tanh, transpose, value,
                     where)


def forward(mlp, x):
    """Run ``mlp`` on ``x`` and record the tape."""
    return mlp.forward(x)


def backward(loss):
    """Populate ``.grad`` of every Parameter reachable from scalar ``loss``."""
    loss.backward()


__all__ = [
    "AdamState", "ContractError", "DimensionError", "Mlp", "Parameter", "Tensor",
    "absolute", "adam_step", "add", "arcsin", "arctan2", "arctanh", "as_tensor", "backward", "clip", "concat",
    "cos", "cross", "div", "dot", "exp", "forward", "getitem", "is_tensor", "log", "matmul",
    "maximum", "mean", "mul", "neg", "norm", "power", "relu", "reshape", "sin", "softplus",
    "sqrt", "stack", "sub", "sum", "tanh", "transpose", "value", "where", "zero_grad",
]
