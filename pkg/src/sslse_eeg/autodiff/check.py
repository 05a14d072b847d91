"""Finite-difference verification of tape gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .tape import Tape, Tensor, backward

REL_FLOOR = 1e-12


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5) -> float:
    """Max relative error between tape and central-difference gradients.

    f must be scalar-valued and deterministic. The numeric passes run with no
    active tape, so they cost only the forward computation. Meaningful
    tolerances require x (and everything f closes over) in float64.
    """
    x.grad = None
    with Tape() as tape:
        loss = f(x)
        backward(tape, loss)
    if x.grad is None:
        raise ValueError("f does not depend on x (no gradient reached it)")
    analytic = np.ascontiguousarray(x.grad, dtype=np.float64)

    # Index through .flat so writes reach storage whatever the memory order;
    # reshape(-1) silently copies for non-C-contiguous arrays (transposed
    # grads arrive F-ordered) and the perturbations would be lost.
    numeric = np.zeros(analytic.shape, dtype=np.float64)
    for i in range(x.data.size):
        orig = x.data.flat[i]
        x.data.flat[i] = orig + eps
        fp = float(f(x).data)
        x.data.flat[i] = orig - eps
        fm = float(f(x).data)
        x.data.flat[i] = orig
        numeric.flat[i] = (fp - fm) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    return float((np.abs(analytic - numeric) / denom).max())
