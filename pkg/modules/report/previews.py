"""Qualitative overlays: ground-truth contour in green, prediction in red."""
import logging
import os

import cv2
import numpy as np
from PIL import Image

from core import Volume

log = logging.getLogger(__name__)

GT_COLOR = (0, 200, 0)
PRED_COLOR = (230, 0, 0)
SCALE = 4
_GAP = 4


def mid_slice(data: np.ndarray) -> np.ndarray:
    """2D view: the array itself, or the middle slice along the last axis."""
    data = np.asarray(data)
    if data.ndim == 3:
        return data[..., data.shape[2] // 2]
    if data.ndim == 1:
        return data[None, :]
    return data


def _to_gray(image: np.ndarray) -> np.ndarray:
    lo, hi = float(image.min()), float(image.max())
    scaled = (image - lo) / (hi - lo) if hi > lo else np.zeros_like(image, dtype=np.float64)
    return (scaled * 255.0).round().astype(np.uint8)


def _contours(mask: np.ndarray):
    binary = (mask > 0).astype(np.uint8) * 255
    contours, _ = cv2.findContours(binary, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
    return contours


def overlay(image: Volume, gt: Volume, pred: Volume) -> np.ndarray:
    """RGB uint8 panel of the mid slice with both contours drawn."""
    img = mid_slice(image.data).astype(np.float64)
    size = (img.shape[1] * SCALE, img.shape[0] * SCALE)
    gray = cv2.resize(_to_gray(img), size, interpolation=cv2.INTER_NEAREST)
    rgb = cv2.cvtColor(gray, cv2.COLOR_GRAY2RGB)
    for mask, color in ((gt, GT_COLOR), (pred, PRED_COLOR)):
        m = cv2.resize(mid_slice(mask.data).astype(np.uint8), size, interpolation=cv2.INTER_NEAREST)
        cv2.drawContours(rgb, _contours(m), -1, color, 1)
    return rgb


def tile(columns: list[list[np.ndarray]]) -> np.ndarray:
    """Grid with one column per method and one row per case, white gaps between panels."""
    if not columns or not columns[0]:
        raise ValueError("nothing to tile")
    h, w = columns[0][0].shape[:2]
    n_rows, n_cols = len(columns[0]), len(columns)
    canvas = np.full((n_rows * (h + _GAP) - _GAP, n_cols * (w + _GAP) - _GAP, 3), 255, dtype=np.uint8)
    for c, column in enumerate(columns):
        for r, panel in enumerate(column):
            y, x = r * (h + _GAP), c * (w + _GAP)
            canvas[y:y + h, x:x + w] = panel
    return canvas


def save_png(path: str, rgb: np.ndarray) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    Image.fromarray(np.ascontiguousarray(rgb)).save(path, format="PNG")
    log.info("Preview written: %s", path)
    return path
