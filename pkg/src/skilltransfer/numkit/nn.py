"""Multilayer perceptrons built on the tape."""
from __future__ import annotations

import numpy as np

from .tensor import DimensionError, Parameter, matmul, relu, value


class Mlp:
    """Fully connected network with rectifier hidden layers and a linear head.

    Parameters
    ----------
    widths : sequence of int
        Layer widths including input and output, e.g. ``(46, 256, 256, 64)``.
    rng : numpy.random.Generator
        Source for the Glorot-uniform weight initialization.
    """

    def __init__(self, widths, rng):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or min(widths) <= 0:
            raise ValueError(f"invalid layer widths {widths}")
        self.widths = widths
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(Parameter(rng.uniform(-limit, limit, size=(fan_in, fan_out))))
            self.biases.append(Parameter(np.zeros((1, fan_out))))
        self.frozen = False

    @property
    def in_width(self):
        return self.widths[0]

    @property
    def out_width(self):
        return self.widths[-1]

    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def freeze(self, frozen=True):
        """Stop gradients into this network's parameters."""
        self.frozen = frozen
        for p in self.parameters():
            p.requires_grad = not frozen
        return self

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x):
        if value(x).shape[-1] != self.in_width:
            raise DimensionError(
                f"input width {value(x).shape[-1]} does not match layer width {self.in_width}")
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = matmul(h, w) + b if not self.frozen else matmul(h, w.data) + b.data
            if i < last:
                h = relu(h)
        return h

    def predict(self, x):
        """Forward pass on raw arrays without touching the tape."""
        h = np.asarray(x, dtype=np.float64)
        if h.shape[-1] != self.in_width:
            raise DimensionError(
                f"input width {h.shape[-1]} does not match layer width {self.in_width}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.data + b.data
            if i < last:
                np.maximum(h, 0.0, out=h)
        return h

    def state(self):
        return [p.data.copy() for p in self.parameters()]

    def load_state(self, arrays):
        params = self.parameters()
        if len(arrays) != len(params):
            raise DimensionError("parameter count mismatch")
        for p, a in zip(params, arrays):
            a = np.asarray(a, dtype=np.float64)
            if a.shape != p.shape:
                raise DimensionError(f"expected {p.shape}, got {a.shape}")
            p.data = a.copy()

    def copy(self):
        clone = Mlp.__new__(Mlp)
        clone.widths = list(self.widths)
        clone.weights = [Parameter(w.data.copy()) for w in self.weights]
        clone.biases = [Parameter(b.data.copy()) for b in self.biases]
        clone.frozen = False
        clone.freeze(self.frozen)
        return clone
