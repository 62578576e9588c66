from config import TrainConfig
from modules.losses import rampup_weight


def lr_at(step: int, config: TrainConfig) -> float:
    """Step decay: base_lr · gamma^floor(step / schedule_step)."""
    return config.base_lr * config.lr_gamma ** (step // config.schedule_step)


def consistency_weight(step: int, config: TrainConfig) -> float:
    if not config.semi_supervised:
        return 0.0
    return rampup_weight(step, config.ramp_length, config.w_max)
