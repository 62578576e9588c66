"""Per-case metric rows and their mean ± std summary."""
import csv
import logging
import os
from dataclasses import dataclass, asdict

import numpy as np

from utils import save_json
from .overlap import dice, jaccard
from .surface import asd_with_flag, hd95_with_flag

log = logging.getLogger(__name__)

METRICS = ("dice", "jaccard", "asd", "hd95")
CASE_FIELDS = ("case_id",) + METRICS + ("degenerate_flag",)


@dataclass(slots=True)
class CaseMetrics:
    dice: float
    jaccard: float
    asd: float
    hd95: float
    degenerate_flag: bool = False
    case_id: str = ""

    def to_row(self) -> dict:
        return asdict(self)


def evaluate_case(pred, gt, spacing=None, case_id: str = "") -> CaseMetrics:
    """All four metrics for one predicted mask against its ground truth."""
    a, flag_a = asd_with_flag(pred, gt, spacing)
    h, flag_h = hd95_with_flag(pred, gt, spacing)
    return CaseMetrics(dice(pred, gt), jaccard(pred, gt), a, h, flag_a or flag_h, case_id)


def aggregate(cases: list[CaseMetrics]) -> dict[str, dict]:
    """{metric: {mean, std, n, degenerate_count}}; population std, no case excluded."""
    n = len(cases)
    degenerate = sum(1 for c in cases if c.degenerate_flag)
    summary = {}
    for name in METRICS:
        values = np.array([getattr(c, name) for c in cases], dtype=np.float64)
        mean = float(values.mean()) if n else float("nan")
        std = float(np.sqrt(((values - mean) ** 2).mean())) if n else float("nan")
        summary[name] = {"mean": mean, "std": std, "n": n, "degenerate_count": degenerate}
    return summary


def write_case_csv(path: str, cases: list[CaseMetrics]):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CASE_FIELDS)
        for c in cases:
            writer.writerow((c.case_id, repr(c.dice), repr(c.jaccard), repr(c.asd),
                             repr(c.hd95), int(c.degenerate_flag)))


def read_case_csv(path: str) -> list[CaseMetrics]:
    with open(path, "r", newline="", encoding="utf-8") as f:
        return [CaseMetrics(float(r["dice"]), float(r["jaccard"]), float(r["asd"]),
                            float(r["hd95"]), bool(int(r["degenerate_flag"])), r["case_id"])
                for r in csv.DictReader(f)]


def write_summary_json(path: str, cases: list[CaseMetrics], extra: dict | None = None) -> dict:
    summary = aggregate(cases)
    payload = dict(summary)
    if extra:
        payload.update(extra)
    save_json(path, payload)
    log.info("Dice %.4f ± %.4f over %d cases (%d degenerate)",
             summary["dice"]["mean"], summary["dice"]["std"], len(cases),
             summary["dice"]["degenerate_count"])
    return summary
