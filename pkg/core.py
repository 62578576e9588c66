"""Shared volume types and the error hierarchy used by every module."""
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

VOLUME_KINDS = ("image", "binary-mask", "sdf", "probability")


# ── Errors ──

class CemtError(Exception):
    """Base class for every error raised by the training laboratory."""


class ConfigError(CemtError):
    pass


class ShapeError(CemtError):
    pass


class LayoutMismatch(CemtError):
    pass


class DomainError(CemtError):
    pass


class DegenerateMask(CemtError):
    """Mask is all-0 or all-1, so it has no boundary."""

    def __init__(self, message: str, all_foreground: bool = False):
        super().__init__(message)
        self.all_foreground = all_foreground


class GenerationRetryExceeded(CemtError):
    pass


class SplitError(CemtError):
    pass


class FormatError(CemtError):
    pass


class IoError(CemtError, OSError):
    pass


class HashMismatch(CemtError):
    pass


class NonFiniteLoss(CemtError):
    def __init__(self, message: str, dump_path: str | None = None):
        super().__init__(message)
        self.dump_path = dump_path


# ── Volumes ──

@dataclass(slots=True)
class Volume:
    """Dense 1D/2D/3D scalar grid with per-axis spacing and a kind tag."""

    data: np.ndarray
    spacing: tuple[float, ...] | None = None
    kind: str = "image"

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim < 1 or self.data.ndim > 3:
            raise ShapeError(f"volume must be 1D, 2D or 3D, got {self.data.ndim}D")
        if any(n < 1 for n in self.data.shape):
            raise ShapeError(f"volume axes must have length >= 1, got {self.data.shape}")
        if self.spacing is None:
            self.spacing = (1.0,) * self.data.ndim
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != self.data.ndim:
            raise ShapeError(f"spacing {self.spacing} does not match {self.data.ndim} axes")
        if any(not s > 0 for s in self.spacing):
            raise ConfigError(f"spacing must be strictly positive, got {self.spacing}")
        if self.kind not in VOLUME_KINDS:
            raise ConfigError(f"unknown volume kind {self.kind!r}")
        if self.kind == "binary-mask":
            if not np.isin(self.data, (0, 1)).all():
                raise DomainError("binary-mask values must be 0 or 1")
            self.data = self.data.astype(np.uint8, copy=False)
        elif self.kind == "probability":
            if self.data.size and (self.data.min() < 0 or self.data.max() > 1):
                raise DomainError("probability values must lie in [0, 1]")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def like(self, data: np.ndarray, kind: str) -> "Volume":
        """New volume on the same grid."""
        return Volume(data, self.spacing, kind)


@dataclass(slots=True)
class SurfacePointSet:
    points: np.ndarray  # (n, ndim) integer voxel indices
    spacing: tuple[float, ...]

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def empty(self) -> bool:
        return len(self) == 0

    def physical(self) -> np.ndarray:
        """Point coordinates scaled by spacing."""
        return self.points.astype(np.float64) * np.asarray(self.spacing, dtype=np.float64)

    def as_set(self) -> set[tuple[int, ...]]:
        return {tuple(int(c) for c in p) for p in self.points}
