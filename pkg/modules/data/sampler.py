"""Patch batches: random crops, flip/rotation augmentation, SDF targets per patch."""
import logging
from dataclasses import dataclass

import numpy as np

from core import Volume, ShapeError, ConfigError
from modules.geometry import sdf_or_constant
from .dataset import SemiDataset

log = logging.getLogger(__name__)


@dataclass(slots=True)
class PatchBatch:
    labeled_images: np.ndarray   # (L, *patch) float32
    labeled_masks: np.ndarray    # (L, *patch) uint8
    labeled_sdfs: np.ndarray     # (L, *patch) float32
    unlabeled_images: np.ndarray  # (U, *patch) float32
    patch_shape: tuple[int, ...]

    @property
    def n_labeled(self) -> int:
        return int(self.labeled_images.shape[0])

    @property
    def n_unlabeled(self) -> int:
        return int(self.unlabeled_images.shape[0])

    def images(self) -> np.ndarray:
        """Labeled first, then unlabeled."""
        return np.concatenate([self.labeled_images, self.unlabeled_images], axis=0)

    def to_npz(self, path: str):
        np.savez(path, labeled_images=self.labeled_images, labeled_masks=self.labeled_masks,
                 labeled_sdfs=self.labeled_sdfs, unlabeled_images=self.unlabeled_images)


# ── Crop / augment ──

def crop_origin(shape, patch_shape, rng: np.random.Generator) -> tuple[int, ...]:
    if len(shape) != len(patch_shape) or any(p > s for p, s in zip(patch_shape, shape)):
        raise ShapeError(f"patch {tuple(patch_shape)} exceeds volume {tuple(shape)}")
    return tuple(int(rng.integers(0, s - p + 1)) for s, p in zip(shape, patch_shape))


def crop(data: np.ndarray, origin, patch_shape) -> np.ndarray:
    return data[tuple(slice(o, o + p) for o, p in zip(origin, patch_shape))]


def flip(data: np.ndarray, axis: int) -> np.ndarray:
    return np.flip(data, axis=axis)


def draw_augmentation(ndim: int, patch_shape, rng: np.random.Generator) -> tuple[tuple[bool, ...], int]:
    """Per-axis flips and a right-angle turn count in the first two (in-plane) axes."""
    flips = tuple(bool(rng.integers(0, 2)) for _ in range(ndim))
    turns = int(rng.integers(0, 4))
    if patch_shape[0] != patch_shape[1] and turns % 2:
        turns = (turns + 1) % 4  # odd turns would change a non-square patch shape
    return flips, turns


def apply_augmentation(data: np.ndarray, flips, turns: int) -> np.ndarray:
    for axis, do in enumerate(flips):
        if do:
            data = flip(data, axis)
    if turns:
        data = np.rot90(data, k=turns, axes=(0, 1))
    return np.ascontiguousarray(data)


def _spacing_after(spacing: tuple[float, ...], turns: int) -> tuple[float, ...]:
    if turns % 2:
        spacing = (spacing[1], spacing[0]) + tuple(spacing[2:])
    return spacing


def sample_batch(dataset: SemiDataset, patch_shape, rng: np.random.Generator,
                 n_labeled: int = 2, n_unlabeled: int = 2, augment: bool = True,
                 full_sdfs: dict[str, Volume] | None = None) -> PatchBatch:
    """One PatchBatch; SDF targets are recomputed on the augmented patch
    unless full-volume SDFs are given, which are then cropped alongside."""
    patch_shape = tuple(int(p) for p in patch_shape)
    if n_labeled < 1 or n_unlabeled < 0:
        raise ConfigError("a batch needs >= 1 labeled and >= 0 unlabeled samples")
    if n_unlabeled and not dataset.unlabeled:
        raise ConfigError("batch asks for unlabeled samples but the dataset has none")

    images, masks, sdfs = [], [], []
    for _ in range(n_labeled):
        case = dataset.labeled[int(rng.integers(len(dataset.labeled)))]
        origin = crop_origin(case.image.shape, patch_shape, rng)
        flips, turns = draw_augmentation(len(patch_shape), patch_shape, rng) if augment else ((), 0)
        img = apply_augmentation(crop(case.image.data, origin, patch_shape), flips, turns)
        msk = apply_augmentation(crop(case.mask.data, origin, patch_shape), flips, turns)
        if full_sdfs is not None:
            sdf = apply_augmentation(crop(full_sdfs[case.sample_id].data, origin, patch_shape), flips, turns)
        else:
            spacing = _spacing_after(case.mask.spacing, turns)
            sdf = sdf_or_constant(Volume(msk, spacing, "binary-mask")).data
        images.append(img)
        masks.append(msk)
        sdfs.append(sdf)

    unlabeled = []
    for _ in range(n_unlabeled):
        case = dataset.unlabeled[int(rng.integers(len(dataset.unlabeled)))]
        origin = crop_origin(case.image.shape, patch_shape, rng)
        flips, turns = draw_augmentation(len(patch_shape), patch_shape, rng) if augment else ((), 0)
        unlabeled.append(apply_augmentation(crop(case.image.data, origin, patch_shape), flips, turns))

    empty = np.zeros((0,) + patch_shape, dtype=np.float32)
    return PatchBatch(
        labeled_images=np.stack(images).astype(np.float32),
        labeled_masks=np.stack(masks).astype(np.uint8),
        labeled_sdfs=np.stack(sdfs).astype(np.float32),
        unlabeled_images=np.stack(unlabeled).astype(np.float32) if unlabeled else empty,
        patch_shape=patch_shape,
    )


class BatchSampler:
    """Independent, reproducible batch stream derived from (seed, stream)."""

    def __init__(self, dataset: SemiDataset, patch_shape, n_labeled: int = 2, n_unlabeled: int = 2,
                 seed: int = 0, stream: int = 0, augment: bool = True,
                 sdf_from_full_volume: bool = False):
        self.dataset = dataset
        self.patch_shape = tuple(int(p) for p in patch_shape)
        self.n_labeled = n_labeled
        self.n_unlabeled = n_unlabeled
        self.augment = augment
        self._rng = np.random.default_rng([seed, stream])
        self._full_sdfs = None
        if sdf_from_full_volume:
            self._full_sdfs = {c.sample_id: sdf_or_constant(c.mask) for c in dataset.labeled}

    def sample(self) -> PatchBatch:
        return sample_batch(self.dataset, self.patch_shape, self._rng, self.n_labeled,
                            self.n_unlabeled, self.augment, self._full_sdfs)

    def __iter__(self):
        while True:
            yield self.sample()
