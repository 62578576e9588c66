import os

import numpy as np
import pytest

from core import ConfigError, FormatError, GenerationRetryExceeded, IoError, ShapeError, SplitError, Volume
from modules.data import (
    BatchSampler, ImageStyle, Manifest, ManifestEntry, UnlabeledCase, crop, decode_volume, encode_volume,
    flip, generate_sample, generate_synthetic, holdout, load_dataset, load_volume, sample_batch,
    save_volume, split, split_roles,
)
from modules.data import synthetic
from modules.geometry import sdf_or_constant
from utils import sha256_bytes


# ── generation ──

def test_generation_is_deterministic():
    a = generate_synthetic(seed=4, count=5, shape=(16, 16), dims=2)
    b = generate_synthetic(seed=4, count=5, shape=(16, 16), dims=2)
    for x, y in zip(a.samples, b.samples):
        assert x.sample_id == y.sample_id
        assert np.array_equal(x.image.data, y.image.data)
        assert np.array_equal(x.mask.data, y.mask.data)


def test_sample_depends_only_on_seed_and_index():
    pool = generate_synthetic(seed=4, count=5, shape=(16, 16), dims=2)
    alone = generate_sample(4, 3, (16, 16))
    assert np.array_equal(pool.samples[3].mask.data, alone.mask.data)


def test_masks_are_non_degenerate(small_pool):
    for s in small_pool.samples:
        frac = s.mask.data.mean()
        assert 0.05 <= frac <= 0.60
        assert s.image.data.dtype == np.float32
        assert s.mask.kind == "binary-mask"


def test_3d_generation():
    pool = generate_synthetic(seed=1, count=2, shape=(12, 12, 8), dims=3)
    assert pool.samples[0].image.shape == (12, 12, 8)


def test_generation_errors(monkeypatch):
    with pytest.raises(ConfigError):
        generate_synthetic(seed=0, count=2, shape=(16, 16), dims=3)
    with pytest.raises(ConfigError):
        generate_synthetic(seed=0, count=0, shape=(16, 16), dims=2)
    monkeypatch.setattr(synthetic, "MIN_FOREGROUND", 0.99)
    with pytest.raises(GenerationRetryExceeded):
        generate_sample(0, 0, (16, 16), max_retries=3)



# ── image difficulty ──

DESK_STYLE = ImageStyle(snr=1.5, contrast=0.6, bias=0.4, blur=2.0, distractors=3, irregular=True)


def _separation(pool):
    gaps = [float(s.image.data[s.mask.data == 1].mean() - s.image.data[s.mask.data == 0].mean())
            for s in pool.samples]
    return float(np.mean(gaps))


def test_default_style_matches_snr_only_generation():
    a = generate_sample(4, 3, (16, 16))
    b = generate_sample(4, 3, (16, 16), style=ImageStyle())
    np.testing.assert_array_equal(a.image.data, b.image.data)
    np.testing.assert_array_equal(a.mask.data, b.mask.data)


def test_distractors_leave_the_mask_alone():
    plain = generate_sample(9, 2, (32, 32))
    spotted = generate_sample(9, 2, (32, 32), style=ImageStyle(distractors=4))
    np.testing.assert_array_equal(plain.mask.data, spotted.mask.data)
    assert not np.array_equal(plain.image.data, spotted.image.data)


def test_harder_style_weakens_foreground_separation():
    easy = generate_synthetic(seed=5, count=20, shape=(32, 32), dims=2)
    hard = generate_synthetic(seed=5, count=20, shape=(32, 32), dims=2, style=DESK_STYLE)
    assert 0.0 < _separation(hard) < 0.6 * _separation(easy)
    for s in hard.samples:
        assert synthetic.MIN_FOREGROUND <= s.mask.data.mean() <= synthetic.MAX_FOREGROUND


@pytest.mark.parametrize("bad", [
    {"snr": 0.0}, {"contrast": -1.0}, {"blur": -0.5}, {"distractors": -1}, {"bias": 1.0},
])
def test_invalid_style(bad):
    with pytest.raises(ConfigError):
        generate_synthetic(seed=0, count=1, shape=(16, 16), dims=2, style=ImageStyle(**bad))

# ── split ──

@pytest.fixture(scope="module")
def pool80():
    return generate_synthetic(seed=2, count=80, shape=(16, 16), dims=2)


@pytest.mark.parametrize("n_labeled, n_unlabeled", [(16, 64), (8, 72)])
def test_split_sizes(pool80, n_labeled, n_unlabeled):
    ds = split(pool80, n_labeled, seed=0)
    assert len(ds.labeled) == n_labeled and len(ds.unlabeled) == n_unlabeled
    assert (ds.split_spec.n_labeled, ds.split_spec.n_unlabeled) == (n_labeled, n_unlabeled)
    labeled_ids = {c.sample_id for c in ds.labeled}
    unlabeled_ids = {c.sample_id for c in ds.unlabeled}
    assert not labeled_ids & unlabeled_ids


def test_split_is_deterministic_and_hides_labels(pool80):
    a, b = split(pool80, 8, seed=3), split(pool80, 8, seed=3)
    assert [c.sample_id for c in a.labeled] == [c.sample_id for c in b.labeled]
    case = a.unlabeled[0]
    assert isinstance(case, UnlabeledCase) and not hasattr(case, "mask")
    hidden = a.oracle_mask(case.sample_id)
    original = next(s for s in pool80.samples if s.sample_id == case.sample_id)
    assert np.array_equal(hidden.data, original.mask.data)


def test_split_errors(pool80):
    with pytest.raises(SplitError):
        split(pool80, 0, seed=0)
    with pytest.raises(SplitError):
        split(pool80, 81, seed=0)
    with pytest.raises(SplitError):
        holdout(pool80, 80)


def test_split_roles_match_split(pool80):
    roles = split_roles([s.sample_id for s in pool80.samples], 8, seed=3)
    ds = split(pool80, 8, seed=3)
    assert roles["labeled"] == [c.sample_id for c in ds.labeled]
    assert roles["unlabeled"] == [c.sample_id for c in ds.unlabeled]


# ── sampling ──

def test_full_volume_patch_without_augmentation_is_identity(small_dataset):
    rng = np.random.default_rng(0)
    batch = sample_batch(small_dataset, (16, 16), rng, n_labeled=1, n_unlabeled=0, augment=False)
    images = {c.sample_id: c.image.data for c in small_dataset.labeled}
    assert any(np.array_equal(batch.labeled_images[0], img) for img in images.values())


def test_flip_twice_is_identity(rng):
    data = rng.standard_normal((6, 5))
    for axis in (0, 1):
        assert np.array_equal(flip(flip(data, axis), axis), data)


def test_crop():
    data = np.arange(36).reshape(6, 6)
    np.testing.assert_array_equal(crop(data, (1, 2), (2, 3)), data[1:3, 2:5])


def test_default_batch_composition_and_sdf_targets(small_dataset):
    batch = BatchSampler(small_dataset, (8, 8), seed=1).sample()
    assert batch.n_labeled == 2 and batch.n_unlabeled == 2
    assert batch.images().shape == (4, 8, 8)
    for mask, sdf in zip(batch.labeled_masks, batch.labeled_sdfs):
        expected = sdf_or_constant(Volume(mask, kind="binary-mask")).data
        np.testing.assert_allclose(sdf, expected, atol=1e-6)


def test_sampler_streams_are_reproducible(small_dataset):
    a = BatchSampler(small_dataset, (8, 8), seed=5, stream=0)
    b = BatchSampler(small_dataset, (8, 8), seed=5, stream=0)
    c = BatchSampler(small_dataset, (8, 8), seed=5, stream=1)
    for _ in range(3):
        x, y, z = a.sample(), b.sample(), c.sample()
        assert np.array_equal(x.images(), y.images())
    assert not np.array_equal(x.images(), z.images())


def test_full_volume_sdf_option(small_dataset):
    batch = BatchSampler(small_dataset, (16, 16), seed=0, augment=False, sdf_from_full_volume=True).sample()
    assert batch.labeled_sdfs.shape == (2, 16, 16)
    assert np.all(batch.labeled_sdfs[batch.labeled_masks == 1] <= 0)


def test_patch_larger_than_volume(small_dataset):
    with pytest.raises(ShapeError):
        BatchSampler(small_dataset, (32, 32), seed=0).sample()


def test_nonfinite_dump(tmp_path, small_dataset):
    batch = BatchSampler(small_dataset, (8, 8), seed=0).sample()
    path = str(tmp_path / "batch.npz")
    batch.to_npz(path)
    with np.load(path) as data:
        assert np.array_equal(data["labeled_masks"], batch.labeled_masks)


# ── VSEG1 ──

@pytest.mark.parametrize("volume", [
    Volume(np.arange(12, dtype=np.float32).reshape(3, 4), (0.5, 2.0), "image"),
    Volume(np.eye(3, dtype=np.uint8)[:, :, None].repeat(2, axis=2), None, "binary-mask"),
    Volume(np.linspace(-1, 1, 5), None, "sdf"),
])
def test_volume_round_trip(tmp_path, volume):
    path = str(tmp_path / "v.vseg")
    raw = save_volume(path, volume)
    loaded = load_volume(path)
    assert loaded.kind == volume.kind and loaded.spacing == volume.spacing
    assert loaded.data.dtype == volume.data.dtype
    assert np.array_equal(loaded.data, volume.data)
    assert encode_volume(loaded) == raw


def test_volume_bad_files(tmp_path):
    raw = encode_volume(Volume(np.zeros((4, 4), dtype=np.float32)))
    with pytest.raises(FormatError):
        decode_volume(raw[:-3])
    with pytest.raises(FormatError):
        decode_volume(b"VSEG2" + raw[5:])
    with pytest.raises(FormatError):
        decode_volume(raw.replace(b'"float32"', b'"int16"  '))
    with pytest.raises(FormatError):
        decode_volume(raw.replace(b'"kind": "image"', b'"kind": "bogus"'))
    with pytest.raises(FormatError):
        decode_volume(raw.replace(b"[1.0, 1.0]", b"[0.0, 1.0]"))
    mask = encode_volume(Volume(np.zeros((4, 4), dtype=np.uint8), kind="binary-mask"))
    with pytest.raises(FormatError):
        decode_volume(mask[:-1] + b"\x02")
    with pytest.raises(IoError):
        load_volume(str(tmp_path / "missing.vseg"))


# ── manifest ──

def test_manifest_round_trip_and_load(tmp_path, small_pool):
    entries = []
    for i, s in enumerate(small_pool.samples):
        img, msk = f"images/{s.sample_id}.vseg", f"masks/{s.sample_id}.vseg"
        h1 = sha256_bytes(save_volume(str(tmp_path / img), s.image))
        h2 = sha256_bytes(save_volume(str(tmp_path / msk), s.mask))
        entries.append(ManifestEntry(s.sample_id, "train" if i < 8 else "test", img, msk, h1, h2))
    path = str(tmp_path / "manifest.json")
    Manifest({"seed": 7}, entries, {"4": split_roles([e.sample_id for e in entries[:8]], 4, 0)}).save(path)

    manifest = Manifest.load(path)
    assert len(manifest.roles("train")) == 8 and len(manifest.roles("test")) == 4
    ds = load_dataset(path, n_labeled=4, split_seed=0)
    assert [c.sample_id for c in ds.labeled] == manifest.splits["4"]["labeled"]
    assert [c.sample_id for c in ds.test] == [e.sample_id for e in entries[8:]]
    assert os.path.isfile(tmp_path / "images" / "case0000.vseg")


def test_manifest_errors(tmp_path):
    with pytest.raises(IoError):
        Manifest.load(str(tmp_path / "none.json"))
    (tmp_path / "bad.json").write_text('{"entries": []}')
    with pytest.raises(FormatError):
        Manifest.load(str(tmp_path / "bad.json"))
