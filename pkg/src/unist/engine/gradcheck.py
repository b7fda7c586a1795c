"""Central finite-difference verification of analytic gradients.

The checker evaluates a scalar-producing closure at perturbed coordinates of
the given tensors and compares the two-sided difference quotient against the
gradient from one recorded backward pass. It is meant to run with the engine
in float64 (see ``dtype_scope``); in float32 the difference quotient itself
is too noisy at the tolerances used here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, backward, no_grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    coords_checked: int
    worst_tensor: str

    def passed(self, tol: float) -> bool:
        return self.max_rel_error < tol


def finite_difference_check(
    build_loss,
    tensors,
    *,
    max_coords_per_tensor: int | None = None,
    rng: np.random.Generator | None = None,
    h: float = 1e-6,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Compare analytic gradients of ``build_loss()`` against central differences.

    ``build_loss`` must be a deterministic closure that re-runs the forward
    pass and returns a scalar Tensor. ``tensors`` is a list of (name, Tensor)
    pairs whose gradients are checked; when ``max_coords_per_tensor`` is set,
    a random subset of coordinates per tensor is probed (full coverage
    otherwise). The relative error for a coordinate is
    ``|analytic - fd| / max(|analytic|, |fd|, floor)``.
    """
    tensors = list(tensors)
    for _, t in tensors:
        t.grad = None
    loss = build_loss()
    backward(loss)
    analytic = {}
    for name, t in tensors:
        analytic[name] = t.grad.copy() if t.grad is not None else np.zeros_like(t.data)

    max_rel = 0.0
    worst = ""
    checked = 0
    with no_grad():
        for name, t in tensors:
            flat = t.data.reshape(-1)
            n = flat.size
            if max_coords_per_tensor is not None and n > max_coords_per_tensor:
                idxs = np.sort(rng.choice(n, size=max_coords_per_tensor, replace=False))
            else:
                idxs = np.arange(n)
            a_flat = analytic[name].reshape(-1)
            for i in idxs:
                original = flat[i]
                step = h * max(1.0, abs(float(original)))
                flat[i] = original + step
                loss_plus = build_loss().item()
                flat[i] = original - step
                loss_minus = build_loss().item()
                flat[i] = original
                fd = (loss_plus - loss_minus) / (2.0 * step)
                a = float(a_flat[i])
                rel = abs(a - fd) / max(abs(a), abs(fd), floor)
                checked += 1
                if rel > max_rel:
                    max_rel = rel
                    worst = name
    return GradCheckReport(max_rel_error=max_rel, coords_checked=checked, worst_tensor=worst)
