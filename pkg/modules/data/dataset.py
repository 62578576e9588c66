"""Labeled / unlabeled / test views of a sample pool."""
import logging
from dataclasses import dataclass, field

import numpy as np

from core import Volume, SplitError
from .synthetic import Sample, SyntheticPool

log = logging.getLogger(__name__)


@dataclass(slots=True)
class LabeledCase:
    sample_id: str
    image: Volume
    mask: Volume


@dataclass(slots=True)
class UnlabeledCase:
    """Image only: the trainer never sees a mask for these."""
    sample_id: str
    image: Volume


@dataclass(frozen=True, slots=True)
class SplitSpec:
    n_labeled: int
    n_unlabeled: int
    seed: int


@dataclass(slots=True)
class SemiDataset:
    labeled: list[LabeledCase]
    unlabeled: list[UnlabeledCase]
    split_spec: SplitSpec
    test: list[LabeledCase] = field(default_factory=list)
    _hidden_masks: dict[str, Volume] = field(default_factory=dict, repr=False)

    def oracle_mask(self, sample_id: str) -> Volume:
        """Withheld label of an unlabeled sample, for evaluation only."""
        return self._hidden_masks[sample_id]


def holdout(pool: SyntheticPool | list[Sample], n_test: int) -> tuple[list[Sample], list[LabeledCase]]:
    """Last n_test samples become the test set."""
    samples = list(pool.samples if isinstance(pool, SyntheticPool) else pool)
    if n_test < 0 or n_test >= len(samples):
        raise SplitError(f"cannot hold out {n_test} of {len(samples)} samples")
    cut = len(samples) - n_test
    test = [LabeledCase(s.sample_id, s.image, s.mask) for s in samples[cut:]]
    return samples[:cut], test


def split_order(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng([seed]).permutation(n)


def split(pool: SyntheticPool | list[Sample], n_labeled: int, seed: int,
          test: list[LabeledCase] | None = None) -> SemiDataset:
    """Deterministic shuffle, then the first n_labeled samples keep their labels."""
    samples = list(pool.samples if isinstance(pool, SyntheticPool) else pool)
    if n_labeled < 1 or n_labeled > len(samples):
        raise SplitError(f"n_labeled={n_labeled} is outside [1, {len(samples)}]")
    order = split_order(len(samples), seed)
    chosen = [samples[i] for i in order]
    labeled = [LabeledCase(s.sample_id, s.image, s.mask) for s in chosen[:n_labeled]]
    unlabeled = [UnlabeledCase(s.sample_id, s.image) for s in chosen[n_labeled:]]
    hidden = {s.sample_id: s.mask for s in chosen[n_labeled:]}
    log.info("Split %d samples: %d labeled / %d unlabeled (seed=%d)",
             len(samples), len(labeled), len(unlabeled), seed)
    return SemiDataset(labeled, unlabeled, SplitSpec(len(labeled), len(unlabeled), seed),
                       list(test or []), hidden)
