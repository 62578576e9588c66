"""Teacher updates: classic EMA and competitive EMA over ParamVectors."""
from dataclasses import dataclass

import torch

from core import ConfigError, DomainError
from modules.model.params import ParamVector
from .weights import CompetitiveWeights

HEAD_POLICIES = ("per-head", "full-vector")


@dataclass(slots=True)
class EmaConfig:
    alpha: float = 0.99
    head_policy: str = "per-head"
    warmup: bool = False  # true average for the first 1/(1-alpha) steps

    def validate(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError(f"ema alpha must lie in [0, 1), got {self.alpha}")
        if self.head_policy not in HEAD_POLICIES:
            raise ConfigError(f"head_policy must be one of {HEAD_POLICIES}")

    def alpha_at(self, step: int) -> float:
        if self.warmup:
            return min(1.0 - 1.0 / (step + 1), self.alpha)
        return self.alpha


def _check_alpha(alpha: float):
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"alpha must lie in [0, 1), got {alpha}")


def _blend(teacher: torch.Tensor, student: torch.Tensor, alpha: float) -> torch.Tensor:
    return teacher * alpha + student * (1.0 - alpha)


def ema_update_classic(teacher: ParamVector, student: ParamVector, alpha: float) -> ParamVector:
    """θ' ← αθ' + (1−α)θ."""
    teacher.check_layout(student)
    _check_alpha(alpha)
    return teacher.with_values(_blend(teacher.values, student.values, alpha))


def ema_update_competitive(teacher: ParamVector, s1: ParamVector, s2: ParamVector,
                           w: CompetitiveWeights, cfg: EmaConfig,
                           alpha: float | None = None) -> ParamVector:
    """θ' ← αθ' + (1−α)(r1θ¹ + r2θ²).

    per-head: the rule applies to the backbone only; the teacher's seg head
    follows s1's seg head and its reg head follows s2's reg head.
    """
    teacher.check_layout(s1)
    teacher.check_layout(s2)
    alpha = cfg.alpha if alpha is None else alpha
    _check_alpha(alpha)

    mixed = s1.values * w.r1 + s2.values * w.r2
    if cfg.head_policy == "full-vector":
        return teacher.with_values(_blend(teacher.values, mixed, alpha))
    if cfg.head_policy != "per-head":
        raise ConfigError(f"unknown head_policy {cfg.head_policy!r}")

    layout = teacher.layout
    out = teacher.values.clone()
    bb, seg, reg = layout.segment("backbone"), layout.segment("seg_head"), layout.segment("reg_head")
    out[bb] = _blend(teacher.values[bb], mixed[bb], alpha)
    out[seg] = _blend(teacher.values[seg], s1.values[seg], alpha)
    out[reg] = _blend(teacher.values[reg], s2.values[reg], alpha)
    return teacher.with_values(out)
