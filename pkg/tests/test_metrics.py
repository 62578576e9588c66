import math

import numpy as np
import pytest

from conftest import brute_force_surface_distances, random_mask
from core import ShapeError, Volume
from modules.data import generate_sample
from modules.metrics import (
    CaseMetrics, aggregate, asd, asd_with_flag, degenerate_penalty, dice, evaluate_case, hd95,
    hd95_with_flag, jaccard, read_case_csv, write_case_csv, write_summary_json,
)
from utils import load_json


def offset_segments():
    a = np.zeros((8, 12), dtype=np.uint8)
    b = np.zeros((8, 12), dtype=np.uint8)
    a[2, 1:11] = 1
    b[5, 1:11] = 1
    return a, b


# ── overlap ──

def test_overlap_examples():
    m = np.array([1, 1, 0, 0])
    assert dice(m, m) == 1.0 and jaccard(m, m) == 1.0
    assert dice(m, 1 - m) == 0.0 and jaccard(m, 1 - m) == 0.0
    a, b = np.array([1, 1, 0]), np.array([1, 0, 0])
    assert dice(a, b) == pytest.approx(2 / 3)
    assert jaccard(a, b) == pytest.approx(0.5)


def test_overlap_both_empty():
    z = np.zeros((3, 3))
    assert dice(z, z) == 1.0 and jaccard(z, z) == 1.0


def test_overlap_shape_mismatch():
    with pytest.raises(ShapeError):
        dice(np.zeros(3), np.zeros(4))


def test_dice_jaccard_identity(rng):
    for _ in range(1000):
        a, b = rng.random((6, 6)) < 0.5, rng.random((6, 6)) < 0.5
        d, j = dice(a, b), jaccard(a, b)
        assert abs(d - 2 * j / (1 + j)) < 1e-12
        assert j <= d


# ── surface distances ──

def test_offset_segments_exact():
    a, b = offset_segments()
    assert asd(a, b) == 3.0
    assert hd95(a, b) == 3.0


def test_identical_masks_have_zero_distance(rng):
    m = random_mask(rng, (10, 10))
    assert asd(m, m) == 0.0 and hd95(m, m) == 0.0


def test_surface_metrics_are_symmetric(rng):
    a, b = random_mask(rng, (9, 11)), random_mask(rng, (9, 11))
    assert asd(a, b) == pytest.approx(asd(b, a))
    assert hd95(a, b) == pytest.approx(hd95(b, a))


@pytest.mark.parametrize("shape, spacing", [
    ((12, 12), None), ((7, 9, 5), None), ((16, 16), (0.5, 1.5)), ((6, 6, 6), (1.0, 2.0, 0.7)),
])
def test_surface_metrics_match_all_pairs(rng, shape, spacing):
    for _ in range(5):
        a, b = random_mask(rng, shape), random_mask(rng, shape)
        pooled = brute_force_surface_distances(a, b, spacing)
        assert asd(a, b, spacing) == pytest.approx(pooled.mean(), abs=1e-12)
        assert hd95(a, b, spacing) == pytest.approx(np.percentile(pooled, 95), abs=1e-12)
        assert hd95(a, b, spacing) <= pooled.max() + 1e-12


@pytest.mark.parametrize("spacing", [None, (1.0, 0.5, 2.0)])
def test_surface_metrics_match_all_pairs_on_16_cubed_blobs(spacing):
    for i in range(4):
        a = generate_sample(seed=11, index=2 * i, shape=(16, 16, 16)).mask.data
        b = generate_sample(seed=11, index=2 * i + 1, shape=(16, 16, 16)).mask.data
        pooled = brute_force_surface_distances(a, b, spacing)
        assert asd(a, b, spacing) == pytest.approx(pooled.mean(), abs=1e-12)
        assert hd95(a, b, spacing) == pytest.approx(np.percentile(pooled, 95), abs=1e-12)


def test_spacing_taken_from_volume():
    a, b = offset_segments()
    va = Volume(a, (2.0, 1.0), "binary-mask")
    vb = Volume(b, (2.0, 1.0), "binary-mask")
    assert asd(va, vb) == 6.0


def test_degenerate_prediction_penalty():
    gt = np.zeros((4, 6), dtype=np.uint8)
    gt[1:3, 1:4] = 1
    empty = np.zeros_like(gt)
    value, flagged = asd_with_flag(empty, gt)
    assert flagged and value == pytest.approx(math.sqrt(4 ** 2 + 6 ** 2))
    assert hd95_with_flag(np.ones_like(gt), gt, (2.0, 1.0)) == (degenerate_penalty((4, 6), (2.0, 1.0)), True)
    assert asd_with_flag(empty, empty) == (0.0, False)


# ── case table ──

def test_evaluate_case_and_aggregate():
    a, b = offset_segments()
    case = evaluate_case(a, b, case_id="c0")
    assert (case.dice, case.jaccard, case.asd, case.hd95, case.degenerate_flag) == (0.0, 0.0, 3.0, 3.0, False)
    summary = aggregate([case])
    assert summary["asd"] == {"mean": 3.0, "std": 0.0, "n": 1, "degenerate_count": 0}


def test_aggregate_mean_and_std():
    cases = [CaseMetrics(0.8, 0.6, 1.0, 2.0), CaseMetrics(0.9, 0.7, 1.0, 2.0, degenerate_flag=True)]
    summary = aggregate(cases)
    assert summary["dice"]["mean"] == pytest.approx(0.85)
    assert summary["dice"]["std"] == pytest.approx(0.05)
    assert summary["asd"]["std"] == 0.0
    assert summary["hd95"]["degenerate_count"] == 1 and summary["hd95"]["n"] == 2


def test_case_csv_and_summary(tmp_path):
    cases = [CaseMetrics(0.8, 0.6, 1.5, 2.5, False, "case0001"), CaseMetrics(0.5, 1 / 3, 0.1, 0.2, True, "case0002")]
    write_case_csv(str(tmp_path / "cases.csv"), cases)
    assert read_case_csv(str(tmp_path / "cases.csv")) == cases
    write_summary_json(str(tmp_path / "m.json"), cases, extra={"method": "mt"})
    data = load_json(str(tmp_path / "m.json"))
    assert data["method"] == "mt" and data["jaccard"]["n"] == 2
