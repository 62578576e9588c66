"""Surface distances between two binary masks, in spacing units.

Distances are measured between voxel centres of the extracted surfaces.
When exactly one side has no surface (all-0 or all-1 mask) the metric is
undefined; it is then reported as the volume diagonal and flagged.
"""
import math

import numpy as np
from scipy.ndimage import distance_transform_edt

from core import Volume, ShapeError
from modules.geometry.surface import surface_mask
from .overlap import _pair

HD_PERCENTILE = 95.0


def degenerate_penalty(shape, spacing) -> float:
    return math.sqrt(sum((n * s) ** 2 for n, s in zip(shape, spacing)))


def _spacing(a, b, spacing) -> tuple[float, ...]:
    if spacing is None:
        for v in (a, b):
            if isinstance(v, Volume):
                return tuple(v.spacing)
        spacing = (1.0,) * np.ndim(a.data if isinstance(a, Volume) else a)
    return tuple(float(s) for s in spacing)


def directed_distances(src: np.ndarray, dst: np.ndarray, spacing) -> np.ndarray:
    """Distance from every surface voxel of src to the nearest surface voxel of dst."""
    dist = distance_transform_edt(~dst, sampling=spacing)
    return dist[src]


def surface_distances(a, b, spacing=None) -> tuple[np.ndarray | None, bool]:
    """Pooled directed distances in both directions.

    Returns (None, degenerate) when a surface is missing; degenerate is
    False only when both masks are identical.
    """
    sp = _spacing(a, b, spacing)
    fa, fb = _pair(a, b)
    if len(sp) != fa.ndim:
        raise ShapeError(f"spacing {sp} does not match {fa.ndim} axes")
    sa, sb = surface_mask(fa), surface_mask(fb)
    if not sa.any() or not sb.any():
        return None, not np.array_equal(fa, fb)
    pooled = np.concatenate([directed_distances(sa, sb, sp), directed_distances(sb, sa, sp)])
    return pooled, False


def _surface_metric(a, b, spacing, reduce) -> tuple[float, bool]:
    pooled, degenerate = surface_distances(a, b, spacing)
    if pooled is None:
        if not degenerate:
            return 0.0, False
        fa, _ = _pair(a, b)
        return degenerate_penalty(fa.shape, _spacing(a, b, spacing)), True
    return float(reduce(pooled)), False


def asd_with_flag(a, b, spacing=None) -> tuple[float, bool]:
    return _surface_metric(a, b, spacing, np.mean)


def hd95_with_flag(a, b, spacing=None) -> tuple[float, bool]:
    return _surface_metric(a, b, spacing,
                           lambda d: np.percentile(d, HD_PERCENTILE, method="linear"))


def asd(a, b, spacing=None) -> float:
    """Average symmetric surface distance."""
    return asd_with_flag(a, b, spacing)[0]


def hd95(a, b, spacing=None) -> float:
    """95th percentile of the pooled symmetric surface distances."""
    return hd95_with_flag(a, b, spacing)[0]
