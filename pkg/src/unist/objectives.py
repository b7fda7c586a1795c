"""Training losses.

VSP trains against a composite of KL divergence, (negated) linear
correlation, and histogram intersection between the predicted map and the
dense gaze map, weighted ``KL + l1*CC + l2*SIM`` with l1 = l2 = -0.1.
VSOD trains with plain binary cross entropy on the mask sequence.

The KL and SIM terms sum-normalize both maps internally: the prediction
comes out of a sigmoid and is not a distribution by itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import (
    Tensor,
    add,
    add_scalar,
    clip,
    div,
    log,
    min_elementwise,
    mul,
    mul_scalar,
    neg,
    reduce_mean,
    reduce_sum,
    sqrt,
    sub,
)
from .errors import DegenerateInputError, ShapeError

LOG_EPS = 1e-7
STD_EPS = 1e-8


@dataclass
class LossWeights:
    lambda1: float = -0.1  # weight of the CC term
    lambda2: float = -0.1  # weight of the SIM term


def _check_same_shape(op: str, p: Tensor, g: Tensor) -> None:
    if p.shape != g.shape:
        raise ShapeError(f"{op}: prediction {p.shape} vs target {g.shape}")


def normalize_sum(m: Tensor) -> Tensor:
    """Scale a nonnegative map to sum to one."""
    if float(m.data.min()) < 0.0:
        raise DegenerateInputError("normalize_sum requires a nonnegative map")
    total = reduce_sum(m)
    if float(total.data) <= 0.0:
        raise DegenerateInputError("normalize_sum on an all-zero map")
    return div(m, total)


def kl_loss(p: Tensor, g: Tensor) -> Tensor:
    """KL(G || P) after sum-normalizing both maps; >= 0, zero iff equal."""
    _check_same_shape("kl_loss", p, g)
    pn = normalize_sum(p)
    gn = normalize_sum(g)
    ratio = div(add_scalar(gn, LOG_EPS), add_scalar(pn, LOG_EPS))
    return reduce_sum(mul(gn, log(ratio)))


def cc_loss(p: Tensor, g: Tensor) -> Tensor:
    """Negated Pearson correlation, in [-1, 1]; -1 at perfect correlation."""
    _check_same_shape("cc_loss", p, g)
    if float(p.data.std()) <= STD_EPS or float(g.data.std()) <= STD_EPS:
        raise DegenerateInputError("cc_loss is undefined for constant maps")
    pc = sub(p, reduce_mean(p))
    gc = sub(g, reduce_mean(g))
    cov = reduce_mean(mul(pc, gc))
    std_p = sqrt(reduce_mean(mul(pc, pc)))
    std_g = sqrt(reduce_mean(mul(gc, gc)))
    return neg(div(cov, mul(std_p, std_g)))


def sim_loss(p: Tensor, g: Tensor) -> Tensor:
    """Histogram intersection of the sum-normalized maps, in [0, 1]."""
    _check_same_shape("sim_loss", p, g)
    return reduce_sum(min_elementwise(normalize_sum(p), normalize_sum(g)))


def vsp_loss(p: Tensor, g_den: Tensor, weights: LossWeights = LossWeights()):
    """Composite VSP loss; returns (total, components) where components holds
    the plain float values of the three terms for logging."""
    kl = kl_loss(p, g_den)
    cc = cc_loss(p, g_den)
    sim = sim_loss(p, g_den)
    total = add(kl, add(mul_scalar(cc, weights.lambda1), mul_scalar(sim, weights.lambda2)))
    components = {"kl": float(kl.data), "cc": float(cc.data), "sim": float(sim.data)}
    return total, components


def vsod_bce(p: Tensor, g: Tensor) -> Tensor:
    """Mean binary cross entropy over all pixels of all frames."""
    _check_same_shape("vsod_bce", p, g)
    pc = clip(p, LOG_EPS, 1.0 - LOG_EPS)
    pos = mul(g, log(pc))
    ones = Tensor(np.ones((), dtype=g.data.dtype))
    neg_term = mul(sub(ones, g), log(sub(ones, pc)))
    return neg(reduce_mean(add(pos, neg_term)))
