import itertools

import numpy as np
import pytest

from config import TrainConfig
from core import Volume
from modules.data import generate_synthetic, holdout, split
from modules.ensembling import EmaConfig
from modules.model import NetworkConfig


def brute_force_sdf(fg: np.ndarray, spacing=None) -> np.ndarray:
    """Signed distance to the nearest boundary voxel by checking every pair."""
    fg = np.asarray(fg, dtype=bool)
    spacing = np.ones(fg.ndim) if spacing is None else np.asarray(spacing, dtype=np.float64)
    boundary = []
    for idx in itertools.product(*[range(n) for n in fg.shape]):
        if not fg[idx]:
            continue
        for axis in range(fg.ndim):
            for step in (-1, 1):
                nb = list(idx)
                nb[axis] += step
                if 0 <= nb[axis] < fg.shape[axis] and not fg[tuple(nb)]:
                    boundary.append(idx)
                    break
            else:
                continue
            break
    pts = np.array(boundary, dtype=np.float64) * spacing
    out = np.zeros(fg.shape, dtype=np.float64)
    for idx in itertools.product(*[range(n) for n in fg.shape]):
        d = np.sqrt((((np.array(idx) * spacing) - pts) ** 2).sum(axis=1)).min()
        out[idx] = -d if fg[idx] else d
    return out


def brute_force_surface_distances(a: np.ndarray, b: np.ndarray, spacing=None) -> np.ndarray:
    from modules.geometry import surface_mask
    spacing = np.ones(a.ndim) if spacing is None else np.asarray(spacing, dtype=np.float64)
    pa = np.argwhere(surface_mask(a)) * spacing
    pb = np.argwhere(surface_mask(b)) * spacing
    d = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2))
    return np.concatenate([d.min(axis=1), d.min(axis=0)])


def random_mask(rng: np.random.Generator, shape, p: float = 0.4) -> np.ndarray:
    """Random 0/1 mask that is neither empty nor full."""
    while True:
        m = (rng.random(shape) < p).astype(np.uint8)
        if 0 < m.sum() < m.size:
            return m


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_net():
    return NetworkConfig(dims=2, base_channels=2, depth=2, convs_per_stage=1)


@pytest.fixture(scope="session")
def small_pool():
    return generate_synthetic(seed=7, count=12, shape=(16, 16), dims=2)


@pytest.fixture
def small_dataset(small_pool):
    train, test = holdout(small_pool, 4)
    return split(train, 4, seed=0, test=test)


def make_config(method: str, **overrides) -> TrainConfig:
    base = dict(
        method=method, iterations=4, patch_shape=(16, 16), n_labeled=4,
        network=NetworkConfig(dims=2, base_channels=2, depth=2, convs_per_stage=1),
        ema=EmaConfig(alpha=0.99), schedule_step=2, progress=False, log_every=1000,
        unlabeled_per_batch=0 if method == "supervised" else 2,
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture
def config_factory():
    return make_config


@pytest.fixture
def square_mask():
    m = np.zeros((5, 5), dtype=np.uint8)
    m[1:4, 1:4] = 1
    return Volume(m, kind="binary-mask")
