"""Sliding-window prediction over full volumes."""
import logging

import numpy as np
import torch

from core import Volume, ShapeError
from modules.geometry import binarize, sdf_to_mask_torch, DEFAULT_K
from modules.model.network import DualHeadNetwork, param_dtype

log = logging.getLogger(__name__)


def window_starts(size: int, patch: int, stride: int) -> list[int]:
    """Regular starts plus a final window flush with the far edge."""
    starts = list(range(0, size - patch + 1, stride))
    if starts[-1] != size - patch:
        starts.append(size - patch)
    return starts


def _check(shape, patch_shape, stride):
    if len(patch_shape) != len(shape) or len(stride) != len(shape):
        raise ShapeError(f"patch {patch_shape} / stride {stride} do not match volume {shape}")
    if any(p > s for p, s in zip(patch_shape, shape)):
        raise ShapeError(f"patch {patch_shape} exceeds volume {shape}")
    if any(st < 1 or st > p for st, p in zip(stride, patch_shape)):
        raise ShapeError(f"stride {stride} must lie in [1, patch] per axis")


def windows(shape, patch_shape, stride):
    grids = np.meshgrid(*[window_starts(s, p, st) for s, p, st in zip(shape, patch_shape, stride)],
                        indexing="ij")
    for origin in zip(*(g.ravel() for g in grids)):
        yield tuple(slice(int(o), int(o) + p) for o, p in zip(origin, patch_shape))


def coverage_counts(shape, patch_shape, stride) -> np.ndarray:
    """How many windows cover each voxel."""
    shape, patch_shape, stride = tuple(shape), tuple(patch_shape), tuple(stride)
    _check(shape, patch_shape, stride)
    counts = np.zeros(shape, dtype=np.int64)
    for sl in windows(shape, patch_shape, stride):
        counts[sl] += 1
    return counts


def _foreground(model, x: torch.Tensor, head: str, k: float) -> torch.Tensor:
    if isinstance(model, DualHeadNetwork):
        out = model(x, heads="seg" if head == "seg" else "reg")
    else:
        out = model(x)
    if head == "seg":
        return out["seg"][:, 1]
    return sdf_to_mask_torch(out["sdf"][:, 0], k)


@torch.no_grad()
def infer_sliding_window(model, volume: Volume, patch_shape, stride, head: str = "seg",
                         k: float = DEFAULT_K) -> Volume:
    """Foreground probability averaged over overlapping windows.

    head="seg" reads the segmentation head; head="sdf" maps the regression
    head through the inverse SDF transform.
    """
    if head not in ("seg", "sdf"):
        raise ValueError(f"head must be 'seg' or 'sdf', got {head!r}")
    patch_shape, stride = tuple(int(p) for p in patch_shape), tuple(int(s) for s in stride)
    _check(volume.shape, patch_shape, stride)
    dtype = param_dtype(model) if isinstance(model, torch.nn.Module) else torch.float32
    data = torch.from_numpy(np.ascontiguousarray(volume.data)).to(dtype)
    acc = np.zeros(volume.shape, dtype=np.float64)
    counts = np.zeros(volume.shape, dtype=np.int64)
    for sl in windows(volume.shape, patch_shape, stride):
        prob = _foreground(model, data[sl][None, None], head, k)
        acc[sl] += prob[0].cpu().numpy().astype(np.float64)
        counts[sl] += 1
    return volume.like(np.clip(acc / counts, 0.0, 1.0), "probability")


def predict_mask(model, volume: Volume, patch_shape, stride, head: str = "seg",
                 k: float = DEFAULT_K) -> Volume:
    prob = infer_sliding_window(model, volume, patch_shape, stride, head, k)
    return volume.like(binarize(prob), "binary-mask")
