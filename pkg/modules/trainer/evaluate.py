"""Test-set evaluation of a trained predictor."""
import logging
import os
from concurrent.futures import ThreadPoolExecutor

import torch

from core import Volume, IoError
from modules.data.dataset import LabeledCase
from modules.metrics import CaseMetrics, evaluate_case
from modules.model import load_checkpoint
from .inference import predict_mask
from .report import load_report

log = logging.getLogger(__name__)


def predict_cases(net, cases: list[LabeledCase], patch_shape, stride) -> list[Volume]:
    net.eval()
    return [predict_mask(net, c.image, patch_shape, stride, head="seg") for c in cases]


def score_cases(cases: list[LabeledCase], predictions: list[Volume], workers: int = 1) -> list[CaseMetrics]:
    """Metrics per case; cases are independent so they may be scored in parallel."""
    def one(pair):
        case, pred = pair
        return evaluate_case(pred, case.mask, case.mask.spacing, case_id=case.sample_id)

    pairs = list(zip(cases, predictions))
    if workers <= 1:
        return [one(p) for p in pairs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, pairs))


def evaluate_model(net, cases: list[LabeledCase], patch_shape, stride) -> list[CaseMetrics]:
    return score_cases(cases, predict_cases(net, cases, patch_shape, stride))


def load_predictor(run_dir: str):
    """Network that produces the run's test predictions, plus the run's report.json."""
    report = load_report(run_dir)
    dtype = torch.float64 if report["config"].get("dtype") == "float64" else torch.float32
    name = report.get("predictor", "teacher")
    path = report["checkpoints"].get(name)
    if path is None or not os.path.isfile(path):
        raise IoError(f"{run_dir}: checkpoint for {name} is missing")
    return load_checkpoint(path, dtype=dtype), report


def evaluate_run(run_dir: str, testset: list[LabeledCase]) -> list[CaseMetrics]:
    """Re-evaluate a finished run from its saved predictor checkpoint."""
    net, report = load_predictor(run_dir)
    cfg = report["config"]
    cases = evaluate_model(net, testset, cfg["patch_shape"], cfg["eval_stride"])
    log.info("Evaluated %s (%s) on %d test cases", run_dir, report["predictor"], len(cases))
    return cases
