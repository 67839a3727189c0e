"""Random differentiable test problems, one per kernel.

Each builder returns ``(f, inputs)`` where ``f(inputs)`` is a scalar tensor.
Inputs are drawn from [-2, 2]; positions for the samplers keep their
fractional part away from lattice crossings.
"""
import numpy as np

from deformtime import numerics as nx
from deformtime.numerics import Tensor


def _u(rng, *shape):
    return Tensor(rng.uniform(-2, 2, size=shape), requires_grad=True)


def _away_from_zero(rng, *shape):
    x = rng.uniform(0.05, 2, size=shape) * rng.choice([-1.0, 1.0], size=shape)
    return Tensor(x, requires_grad=True)


def _frac_positions(rng, lo, hi, shape):
    base = rng.integers(lo, hi, size=shape).astype(float)
    return Tensor(base + rng.uniform(0.05, 0.95, size=shape), requires_grad=True)


def _readout(rng, shape):
    w = Tensor(rng.normal(size=shape))
    return lambda out: (out * w).sum()


def build_case(kind, rng):
    if kind == "matmul":
        a, b = _u(rng, 2, 3, 4), _u(rng, 4, 5)
        r = _readout(rng, (2, 3, 5))
        return lambda ins: r(nx.matmul(ins[0], ins[1])), [a, b]
    if kind == "softmax":
        x = _u(rng, 3, 5)
        r = _readout(rng, (3, 5))
        return lambda ins: r(nx.softmax_rows(ins[0])), [x]
    if kind == "layer_norm":
        x, g, b = _u(rng, 4, 6), _u(rng, 6), _u(rng, 6)
        r = _readout(rng, (4, 6))
        return lambda ins: r(nx.layer_norm(*ins)), [x, g, b]
    if kind in ("tanh", "sigmoid"):
        x = _u(rng, 3, 4)
        fn = getattr(nx, kind)
        r = _readout(rng, (3, 4))
        return lambda ins: r(fn(ins[0])), [x]
    if kind == "relu":
        x = _away_from_zero(rng, 3, 4)
        r = _readout(rng, (3, 4))
        return lambda ins: r(nx.relu(ins[0])), [x]
    if kind == "leaky_relu":
        x = _away_from_zero(rng, 3, 4)
        r = _readout(rng, (3, 4))
        return lambda ins: r(nx.leaky_relu(ins[0], 0.01)), [x]
    if kind == "mul":
        a, b = _u(rng, 3, 4), _u(rng, 1, 4)
        r = _readout(rng, (3, 4))
        return lambda ins: r(ins[0] * ins[1] + ins[0]), [a, b]
    if kind == "div":
        a = _u(rng, 3, 4)
        b = Tensor(rng.uniform(0.5, 2, size=(3, 4)), requires_grad=True)
        r = _readout(rng, (3, 4))
        return lambda ins: r(nx.div(ins[0], ins[1])), [a, b]
    if kind == "concat":
        a, b = _u(rng, 2, 3), _u(rng, 2, 5)
        r = _readout(rng, (2, 8))
        return lambda ins: r(nx.concat(ins, axis=1)), [a, b]
    if kind == "transpose":
        a = _u(rng, 2, 3, 4)
        r = _readout(rng, (4, 2, 3))
        return lambda ins: r(nx.reshape(nx.transpose(ins[0], (2, 0, 1)), (4, 2, 3))), [a]
    if kind == "take":
        a = _u(rng, 5, 3)
        idx = np.array([[0, 2, 2], [4, 1, 0]])
        r = _readout(rng, (2, 3, 3))
        return lambda ins: r(nx.take(ins[0], idx, axis=0)), [a]
    if kind == "pad":
        a = _u(rng, 3, 4)
        r = _readout(rng, (5, 5))
        return lambda ins: r(nx.pad(ins[0], [(1, 1), (0, 1)])), [a]
    if kind == "bilinear":
        P = _u(rng, 2, 5, 6)
        row = _frac_positions(rng, -2, 6, (2, 7))
        col = _frac_positions(rng, -2, 7, (2, 7))
        r = _readout(rng, (2, 7))
        return lambda ins: r(nx.bilinear_sample(*ins)), [P, row, col]
    if kind == "linear":
        z = _u(rng, 3, 6)
        p = _frac_positions(rng, -2, 7, (3, 4))
        r = _readout(rng, (3, 4))
        return lambda ins: r(nx.linear_sample(*ins)), [z, p]
    if kind == "conv":
        x, w, b = _u(rng, 2, 5, 4, 3), _u(rng, 3, 3, 3), _u(rng, 3)
        r = _readout(rng, (2, 5, 4, 3))
        return lambda ins: r(nx.depthwise_conv2d(*ins)), [x, w, b]
    if kind == "gru":
        x = _u(rng, 2, 5, 3)
        wih, whh = _u(rng, 3, 12), _u(rng, 4, 12)
        bih, bhh = _u(rng, 12), _u(rng, 12)
        r = _readout(rng, (2, 5, 4))
        return lambda ins: r(nx.gru_layer(*ins)), [x, wih, whh, bih, bhh]
    raise KeyError(kind)


ALL_KINDS = ["matmul", "softmax", "layer_norm", "tanh", "sigmoid", "relu", "leaky_relu",
             "mul", "div", "concat", "transpose", "take", "pad", "bilinear", "linear",
             "conv", "gru"]
