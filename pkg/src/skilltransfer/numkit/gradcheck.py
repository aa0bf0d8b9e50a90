"""Central finite differences, used to cross-check the tape."""
from __future__ import annotations

import numpy as np


def numerical_grad(f, params, eps=1e-5):
    """Central-difference gradient of scalar ``f()`` w.r.t. each parameter's data.

    ``f`` is re-evaluated with each scalar perturbed in place; it must not
    depend on hidden state that changes between calls.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = float(np.asarray(f()))
            flat[i] = orig - eps
            down = float(np.asarray(f()))
            flat[i] = orig
            g.reshape(-1)[i] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def max_relative_error(a, b, floor=1e-7):
    """Largest ``|a - b| / max(|a|, |b|)`` over entries whose absolute gap exceeds ``floor``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    gap = np.abs(a - b)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.finfo(float).tiny)
    rel = np.where(gap > floor, gap / scale, 0.0)
    return float(rel.max()) if rel.size else 0.0
