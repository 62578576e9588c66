import math

import pytest
import torch

from core import ConfigError, ShapeError
from modules.losses import (
    DICE_SMOOTH, consistency_loss, cross_entropy_loss, dice_loss, rampup_weight,
    supervised_sdf_loss, supervised_seg_loss,
)


def t(*values):
    return torch.tensor(values, dtype=torch.float64)


def two_class(p_fg: torch.Tensor) -> torch.Tensor:
    """(B, 2, ...) probabilities from a foreground map (B, ...)."""
    return torch.stack([1 - p_fg, p_fg], dim=1)


# ── dice ──

def test_dice_perfect_and_disjoint():
    target = t(0, 1, 1, 0)
    assert dice_loss(target.clone(), target) <= 1e-5
    assert dice_loss(torch.ones(4, dtype=torch.float64), torch.zeros(4)) == pytest.approx(1.0, abs=1e-5)


def test_dice_half_prediction():
    loss = dice_loss(t(0.5, 0.5), t(1, 0))
    assert float(loss) == pytest.approx(1 - (1 + DICE_SMOOTH) / (2 + DICE_SMOOTH), abs=1e-12)
    assert float(loss) == pytest.approx(0.5, abs=1e-5)


def test_dice_shape_mismatch():
    with pytest.raises(ShapeError):
        dice_loss(t(1, 0), t(1, 0, 1))


# ── cross-entropy ──

def test_ce_examples():
    target = torch.tensor([[1, 0]])
    assert float(cross_entropy_loss(two_class(t(1, 0)[None]), target)) == pytest.approx(0.0, abs=1e-12)
    assert float(cross_entropy_loss(two_class(t(0.5, 0.5)[None]), target)) == pytest.approx(math.log(2))
    single = cross_entropy_loss(two_class(t(0.25)[None]), torch.tensor([[1]]))
    assert float(single) == pytest.approx(-math.log(0.25))


def test_ce_probability_floor():
    loss = cross_entropy_loss(two_class(t(0.0)[None]), torch.tensor([[1]]))
    assert float(loss) == pytest.approx(-math.log(1e-7))


def test_ce_shape_mismatch():
    with pytest.raises(ShapeError):
        cross_entropy_loss(two_class(t(0.5, 0.5)[None]), torch.tensor([[1, 0, 1]]))


# ── combined supervised losses ──

def test_seg_loss_uniform_balanced():
    out = supervised_seg_loss(two_class(t(0.5, 0.5)[None]), torch.tensor([[1, 0]]))
    assert out.item() == pytest.approx(0.5 * 0.5 + 0.5 * math.log(2), abs=1e-5)
    assert set(out.components) == {"dice", "ce"}


def test_seg_loss_disjoint_at_least_half():
    out = supervised_seg_loss(two_class(t(0.0, 1.0)[None]), torch.tensor([[1, 0]]))
    assert out.item() >= 0.5


def test_sdf_loss_perfect_and_negated():
    z = t(-1.0, -0.5, 0.5, 1.0)[None]
    assert supervised_sdf_loss(z.clone(), z, k=1500).item() <= 1e-5
    neg = supervised_sdf_loss(-z, z, k=1500)
    assert neg.components["mse"] == pytest.approx(float((4 * z ** 2).mean()))


def test_sdf_loss_zero_prediction_mse():
    z = t(-1.0, -0.25, 0.5, 1.0)[None]
    out = supervised_sdf_loss(torch.zeros_like(z), z, k=1500)
    assert out.components["mse"] == pytest.approx(float((z ** 2).mean()))
    assert 0.0 <= out.components["dice"] <= 1.0


# ── consistency ──

def test_consistency_examples():
    a = torch.rand(2, 3, 4, dtype=torch.float64)
    assert float(consistency_loss(a, a.clone())) == 0.0
    assert float(consistency_loss(a + 0.1, a)) == pytest.approx(0.01)
    assert float(consistency_loss(a, a + 0.1)) == pytest.approx(float(consistency_loss(a + 0.1, a)))


def test_consistency_gradient_only_to_student():
    s = torch.rand(5, dtype=torch.float64, requires_grad=True)
    teacher = torch.rand(5, dtype=torch.float64, requires_grad=True)
    consistency_loss(s, teacher).backward()
    assert s.grad is not None and teacher.grad is None


# ── ramp ──

def test_rampup_examples():
    assert rampup_weight(0, 100, 0.1) == pytest.approx(0.1 * math.exp(-5))
    assert rampup_weight(100, 100, 0.1) == 0.1
    assert rampup_weight(500, 100, 0.1) == 0.1
    assert rampup_weight(50, 100, 0.1) == pytest.approx(0.1 * math.exp(-1.25))


def test_rampup_monotone_and_bounded():
    values = [rampup_weight(s, 40, 0.3) for s in range(60)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert max(values) <= 0.3


@pytest.mark.parametrize("step, max_step", [(0, 0), (-1, 10)])
def test_rampup_errors(step, max_step):
    with pytest.raises(ConfigError):
        rampup_weight(step, max_step, 0.1)
