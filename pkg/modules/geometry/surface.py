import numpy as np
from scipy.ndimage import binary_erosion, generate_binary_structure

from core import Volume, SurfacePointSet


def as_foreground(mask: Volume | np.ndarray) -> np.ndarray:
    data = mask.data if isinstance(mask, Volume) else np.asarray(mask)
    return data.astype(bool)


def surface_mask(foreground: np.ndarray) -> np.ndarray:
    """Foreground voxels with at least one background face-neighbor.

    Voxels outside the grid count as foreground, so the grid border alone
    never creates a surface.
    """
    foreground = np.asarray(foreground, dtype=bool)
    footprint = generate_binary_structure(foreground.ndim, 1)
    eroded = binary_erosion(foreground, structure=footprint, border_value=1)
    return foreground & ~eroded


def extract_surface(mask: Volume) -> SurfacePointSet:
    """Surface voxels (4-/6-connectivity rule); empty for all-0 or all-1 masks."""
    surface = surface_mask(as_foreground(mask))
    return SurfacePointSet(np.argwhere(surface), tuple(mask.spacing))
