"""Binary mask ↔ signed distance map.

Sign convention: negative inside the object, zero on its boundary voxels,
positive outside. Produced maps are normalized per volume to [-1, 1].

The inverse transform is 1 / (1 + exp(+k·z)), so the interior (z < 0) maps
above 0.5. Written with the opposite sign it would send the interior to ~0
under this convention.
"""
import logging

import numpy as np
import torch
from scipy.ndimage import distance_transform_edt
from scipy.special import expit

from core import Volume, DegenerateMask, DomainError
from .surface import as_foreground, surface_mask

log = logging.getLogger(__name__)

DEFAULT_K = 1500.0
EXP_CLAMP = 500.0


def mask_to_sdf(mask: Volume, normalize: bool = True) -> Volume:
    """Signed Euclidean distance (spacing units) to the nearest boundary voxel."""
    fg = as_foreground(mask)
    if not fg.any():
        raise DegenerateMask("mask has no foreground voxel", all_foreground=False)
    if fg.all():
        raise DegenerateMask("mask has no background voxel", all_foreground=True)

    boundary = surface_mask(fg)
    dist = distance_transform_edt(~boundary, sampling=mask.spacing).astype(np.float64)
    sdf = np.where(fg, -dist, dist)
    sdf[boundary] = 0.0
    if normalize:
        sdf = sdf / np.abs(sdf).max()
    return mask.like(sdf, "sdf")


def sdf_or_constant(mask: Volume) -> Volume:
    """mask_to_sdf with the constant +1 (all-0) / -1 (all-1) substitute."""
    try:
        return mask_to_sdf(mask)
    except DegenerateMask as e:
        value = -1.0 if e.all_foreground else 1.0
        return mask.like(np.full(mask.shape, value, dtype=np.float64), "sdf")


def _check_k(k: float):
    if not k > 0:
        raise DomainError(f"k must be positive, got {k}")


def sdf_to_mask(sdf: Volume, k: float = DEFAULT_K) -> Volume:
    """Smooth inverse transform; monotone decreasing in z, 0.5 at z = 0."""
    _check_k(k)
    z = np.clip(k * np.asarray(sdf.data, dtype=np.float64), -EXP_CLAMP, EXP_CLAMP)
    return sdf.like(expit(-z), "probability")


def sdf_to_mask_torch(sdf: torch.Tensor, k: float = DEFAULT_K) -> torch.Tensor:
    """Differentiable version of sdf_to_mask."""
    _check_k(k)
    z = torch.clamp(k * sdf, -EXP_CLAMP, EXP_CLAMP)
    return torch.sigmoid(-z)


def binarize(prob: Volume | np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Foreground where probability >= threshold (boundary voxels sit at 0.5)."""
    data = prob.data if isinstance(prob, Volume) else np.asarray(prob)
    return (data >= threshold).astype(np.uint8)
