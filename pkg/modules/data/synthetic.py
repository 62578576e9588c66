"""Synthetic blob volumes standing in for annotated scans.

Every sample is fully determined by (seed, index): a smooth random blob mask
(thresholded sum of Gaussians, optionally notched) and a noisy image
correlated with it. `ImageStyle` controls how hard the image is to read:
noise, foreground contrast, a multiplicative bias field, blurred edges and
unlabeled look-alike spots.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from core import Volume, ConfigError, GenerationRetryExceeded

log = logging.getLogger(__name__)

MIN_FOREGROUND = 0.05
MAX_FOREGROUND = 0.60
MAX_RETRIES = 100
_BLOB_THRESHOLD = 0.5


@dataclass(frozen=True, slots=True)
class ImageStyle:
    snr: float = 4.0
    contrast: float = 1.0     # foreground intensity above background
    bias: float = 0.0         # amplitude of the smooth multiplicative field
    blur: float = 1.0         # edge smoothing sigma, voxels
    distractors: int = 0      # unlabeled spots per volume
    irregular: bool = False   # notch blobs with negative lobes

    def validate(self) -> "ImageStyle":
        if self.snr <= 0:
            raise ConfigError(f"snr must be positive, got {self.snr}")
        if self.contrast <= 0 or self.blur < 0 or self.distractors < 0:
            raise ConfigError("contrast must be positive, blur and distractors >= 0")
        if not 0.0 <= self.bias < 1.0:
            raise ConfigError(f"bias must lie in [0, 1), got {self.bias}")
        return self


@dataclass(slots=True)
class Sample:
    sample_id: str
    image: Volume
    mask: Volume


@dataclass(slots=True)
class SyntheticPool:
    samples: list[Sample]
    seed: int
    shape: tuple[int, ...]
    dims: int

    def __len__(self) -> int:
        return len(self.samples)


def sample_id(index: int) -> str:
    return f"case{index:04d}"


def _grids(shape: tuple[int, ...]) -> list[np.ndarray]:
    return np.meshgrid(*[np.arange(n, dtype=np.float64) for n in shape], indexing="ij")


def _gaussian(grids, center, sigma) -> np.ndarray:
    return np.exp(-0.5 * sum(((g - c) / s) ** 2 for g, c, s in zip(grids, center, sigma)))


def _blob_mask(rng: np.random.Generator, shape: tuple[int, ...], irregular: bool = False) -> np.ndarray:
    grids = _grids(shape)
    field = np.zeros(shape, dtype=np.float64)
    for _ in range(int(rng.integers(2, 5))):
        center = [rng.uniform(0.2 * n, 0.8 * n) for n in shape]
        sigma = [rng.uniform(0.1, 0.25) * n for n in shape]
        field += _gaussian(grids, center, sigma)
    if irregular:
        for _ in range(int(rng.integers(1, 3))):
            center = [rng.uniform(0.2 * n, 0.8 * n) for n in shape]
            sigma = [rng.uniform(0.05, 0.12) * n for n in shape]
            field -= rng.uniform(0.5, 1.0) * _gaussian(grids, center, sigma)
    return (field > _BLOB_THRESHOLD).astype(np.uint8)


def _bias_field(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    low = gaussian_filter(rng.standard_normal(shape), sigma=max(shape) / 4.0, mode="wrap")
    return low / max(float(np.abs(low).max()), 1e-12)


def _distractor_field(rng: np.random.Generator, shape: tuple[int, ...], count: int) -> np.ndarray:
    """Compact round spots at foreground-like brightness, never labeled."""
    grids = _grids(shape)
    field = np.zeros(shape, dtype=np.float64)
    for _ in range(count):
        center = [rng.uniform(0, n) for n in shape]
        radius = rng.uniform(0.04, 0.08) * min(shape)
        field = np.maximum(field, rng.uniform(0.7, 1.0) * _gaussian(grids, center, [radius] * len(shape)))
    return field


def _image_for(rng: np.random.Generator, mask: np.ndarray, style: ImageStyle) -> np.ndarray:
    signal = mask.astype(np.float64)
    if style.distractors:
        signal = np.maximum(signal, _distractor_field(rng, mask.shape, style.distractors))
    smooth = style.contrast * gaussian_filter(signal, sigma=style.blur) if style.blur else style.contrast * signal
    texture = gaussian_filter(rng.standard_normal(mask.shape), sigma=2.0)
    texture /= max(float(np.abs(texture).max()), 1e-12)
    img = smooth + 0.2 * texture
    if style.bias:
        img = img * (1.0 + style.bias * _bias_field(rng, mask.shape))
    img = img + rng.standard_normal(mask.shape) / style.snr
    img = (img - img.mean()) / max(float(img.std()), 1e-12)
    return img.astype(np.float32)


def generate_sample(seed: int, index: int, shape: tuple[int, ...], snr: float = 4.0,
                    spacing: tuple[float, ...] | None = None,
                    max_retries: int = MAX_RETRIES, style: ImageStyle | None = None) -> Sample:
    style = style or ImageStyle(snr=snr)
    rng = np.random.default_rng([seed, index])
    for attempt in range(max_retries):
        mask = _blob_mask(rng, shape, style.irregular)
        frac = float(mask.mean())
        if MIN_FOREGROUND <= frac <= MAX_FOREGROUND:
            image = _image_for(rng, mask, style)
            return Sample(sample_id(index),
                          Volume(image, spacing, "image"),
                          Volume(mask, spacing, "binary-mask"))
        log.debug("Sample %d attempt %d rejected (foreground %.3f)", index, attempt, frac)
    raise GenerationRetryExceeded(
        f"sample {index}: no mask with foreground fraction in "
        f"[{MIN_FOREGROUND}, {MAX_FOREGROUND}] after {max_retries} attempts")


def generate_synthetic(seed: int, count: int, shape, dims: int, snr: float = 4.0,
                       spacing: tuple[float, ...] | None = None,
                       style: ImageStyle | None = None) -> SyntheticPool:
    """`style` overrides `snr` when given."""
    shape = tuple(int(s) for s in shape)
    if dims not in (2, 3) or len(shape) != dims:
        raise ConfigError(f"shape {shape} does not match dims={dims}")
    if count < 1 or any(s < 2 for s in shape):
        raise ConfigError("count must be >= 1 and every side >= 2")
    style = (style or ImageStyle(snr=snr)).validate()
    samples = [generate_sample(seed, i, shape, spacing=spacing, style=style) for i in range(count)]
    log.info("Generated %d synthetic %dD volumes of %s (seed=%d, snr=%.2f, contrast=%.2f, distractors=%d)",
             count, dims, shape, seed, style.snr, style.contrast, style.distractors)
    return SyntheticPool(samples, seed, shape, dims)
