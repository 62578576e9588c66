"""Training objectives: supervised seg/SDF losses, teacher consistency, ramped weight."""
import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from core import ShapeError, ConfigError
from modules.geometry import sdf_to_mask_torch, DEFAULT_K

DICE_SMOOTH = 1e-5
PROB_FLOOR = 1e-7


@dataclass(slots=True)
class LossValue:
    value: torch.Tensor
    components: dict[str, float] = field(default_factory=dict)

    def item(self) -> float:
        return float(self.value.detach())


def _check_same_shape(a: torch.Tensor, b: torch.Tensor):
    if tuple(a.shape) != tuple(b.shape):
        raise ShapeError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def dice_loss(pred: torch.Tensor, target: torch.Tensor, smooth: float = DICE_SMOOTH) -> torch.Tensor:
    """1 − (2Σpt + ε) / (Σp + Σt + ε) over the whole tensor."""
    _check_same_shape(pred, target)
    target = target.to(pred.dtype)
    inter = (pred * target).sum()
    return 1.0 - (2.0 * inter + smooth) / (pred.sum() + target.sum() + smooth)


def cross_entropy_loss(probs: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean −log p(true class); probs is (B, C, ...), target is (B, ...)."""
    if probs.dim() != target.dim() + 1 or probs.shape[0] != target.shape[0] \
            or tuple(probs.shape[2:]) != tuple(target.shape[1:]):
        raise ShapeError(f"probabilities {tuple(probs.shape)} do not match target {tuple(target.shape)}")
    p_true = probs.gather(1, target.long().unsqueeze(1)).squeeze(1)
    return -torch.log(torch.clamp(p_true, min=PROB_FLOOR)).mean()


def supervised_seg_loss(probs: torch.Tensor, target: torch.Tensor) -> LossValue:
    """0.5·dice(foreground) + 0.5·cross-entropy."""
    if probs.dim() < 2 or probs.shape[1] < 2:
        raise ShapeError(f"expected class probabilities (B, C, ...), got {tuple(probs.shape)}")
    dice = dice_loss(probs[:, 1], target)
    ce = cross_entropy_loss(probs, target)
    return LossValue(0.5 * dice + 0.5 * ce, {"dice": float(dice.detach()), "ce": float(ce.detach())})


def supervised_sdf_loss(pred_sdf: torch.Tensor, target_sdf: torch.Tensor, k: float = DEFAULT_K) -> LossValue:
    """MSE to the target SDF + dice of the transformed prediction vs the target mask."""
    _check_same_shape(pred_sdf, target_sdf)
    mse = F.mse_loss(pred_sdf, target_sdf)
    target_mask = (target_sdf <= 0).to(pred_sdf.dtype)
    dice = dice_loss(sdf_to_mask_torch(pred_sdf, k), target_mask)
    return LossValue(mse + dice, {"mse": float(mse.detach()), "dice": float(dice.detach())})


def consistency_loss(student_out: torch.Tensor, teacher_out: torch.Tensor) -> torch.Tensor:
    """MSE in the head's native output space; no gradient reaches the teacher."""
    _check_same_shape(student_out, teacher_out)
    return F.mse_loss(student_out, teacher_out.detach())


def rampup_weight(step: int, max_step: int, w_max: float) -> float:
    """w_max · exp(−5(1 − t)²), t = min(step, max_step) / max_step."""
    if max_step <= 0:
        raise ConfigError(f"max_step must be positive, got {max_step}")
    if step < 0:
        raise ConfigError(f"step must be non-negative, got {step}")
    phase = 1.0 - min(step, max_step) / max_step
    return w_max * math.exp(-5.0 * phase * phase)
