from .weights import (
    CompetitiveWeights, weights_unidirectional, weights_bidirectional,
    weights_classic, competitive_weights, STRATEGIES,
)
from .ema import EmaConfig, ema_update_classic, ema_update_competitive
from .trace import WeightTrace, read_weight_trace
