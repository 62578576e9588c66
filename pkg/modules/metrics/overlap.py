import numpy as np

from core import Volume, ShapeError


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a.data if isinstance(a, Volume) else a).astype(bool)
    b = np.asarray(b.data if isinstance(b, Volume) else b).astype(bool)
    if a.shape != b.shape:
        raise ShapeError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a, b


def dice(a, b) -> float:
    """2|A∩B| / (|A|+|B|); 1.0 when both masks are empty."""
    a, b = _pair(a, b)
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / total


def jaccard(a, b) -> float:
    a, b = _pair(a, b)
    union = int((a | b).sum())
    if union == 0:
        return 1.0
    return int((a & b).sum()) / union
