"""Training losses: photometric MSE, visibility-prior hinge, stop-gradient
visibility consistency, sparse depth, and their gated weighted sum.

All losses reduce by mean over the ray/pixel batch, which keeps the weight
calibration independent of batch size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "LossWeights",
    "loss_mse",
    "loss_vip",
    "loss_vis_consistency",
    "loss_sparse_depth",
    "total_loss",
]


@dataclass(frozen=True)
class LossWeights:
    """Combination weights; the prior term activates at `vip_start_iteration`."""

    mse: float = 1.0
    sparse_depth: float = 0.1
    vip: float = 0.001
    vis_consistency: float = 0.1
    vip_start_iteration: int = 0

    def __post_init__(self):
        for name in ("mse", "sparse_depth", "vip", "vis_consistency"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be nonnegative")
        if self.vip_start_iteration < 0:
            raise ValueError("vip_start_iteration must be nonnegative")


def loss_mse(rendered: Tensor, target: np.ndarray) -> Tensor:
    """Squared color error, summed over channels, mean over the pixel batch."""
    diff = rendered - Tensor(np.asarray(target, dtype=np.float64))
    return ad.tensor_mean(ad.tensor_sum(ad.square(diff), axis=1))


def loss_vip(visibility: Tensor, prior: np.ndarray) -> Tensor:
    """Hinge max(tau - t', 0): penalizes predicted under-visibility only.

    Pixels with tau = 0 contribute nothing, by construction of the hinge.
    """
    tau = Tensor(np.asarray(prior, dtype=np.float64))
    return ad.tensor_mean(ad.maximum(tau - visibility, 0.0))


def loss_vis_consistency(transmittance: Tensor, vis_head: Tensor) -> Tensor:
    """Two one-sided squared terms, split by stop-gradient.

    The first term updates only the decoder head (transmittance frozen); the
    second updates only the density path (head frozen). Summed over samples,
    mean over rays.
    """
    if transmittance.shape != vis_head.shape:
        raise ad.ShapeError(
            f"transmittance {transmittance.shape} vs head {vis_head.shape}"
        )
    pull_head = ad.square(ad.stop_gradient(transmittance) - vis_head)
    pull_density = ad.square(transmittance - ad.stop_gradient(vis_head))
    per_ray = ad.tensor_sum(pull_head + pull_density, axis=1)
    return ad.tensor_mean(per_ray)


def loss_sparse_depth(rendered_depth: Tensor, target_depth: np.ndarray) -> Tensor:
    """Squared depth error, mean over the sparse-depth batch."""
    diff = rendered_depth - Tensor(np.asarray(target_depth, dtype=np.float64))
    return ad.tensor_mean(ad.square(diff))


def total_loss(
    mse: Tensor,
    sparse_depth: Tensor | None,
    vip: Tensor | None,
    vis_consistency: Tensor | None,
    weights: LossWeights,
    iteration: int,
) -> Tensor:
    """Weighted combination; the prior hinge is gated until its start iteration."""
    if iteration < 0:
        raise ValueError("iteration must be nonnegative")
    total = weights.mse * mse
    if sparse_depth is not None and weights.sparse_depth > 0:
        total = total + weights.sparse_depth * sparse_depth
    if vip is not None and weights.vip > 0 and iteration >= weights.vip_start_iteration:
        total = total + weights.vip * vip
    if vis_consistency is not None and weights.vis_consistency > 0:
        total = total + weights.vis_consistency * vis_consistency
    return total
