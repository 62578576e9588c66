from .surface import extract_surface, surface_mask
from .sdf import (
    mask_to_sdf, sdf_or_constant, sdf_to_mask, sdf_to_mask_torch, binarize, DEFAULT_K,
)
