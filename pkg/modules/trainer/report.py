"""RunReport and its on-disk files: trace.csv, cases.csv, metrics.json, report.json."""
import csv
import os
from dataclasses import dataclass, field

from modules.metrics import CaseMetrics, aggregate, write_case_csv, write_summary_json
from utils import load_json, save_json

TRACE_FIELDS = ("step", "lr", "lambda_con", "loss_m1", "loss_m2",
                "dice_l1", "dice_l2", "r1", "r2")

TRACE_FILE = "trace.csv"
WEIGHTS_FILE = "weights.csv"
CASES_FILE = "cases.csv"
METRICS_FILE = "metrics.json"
REPORT_FILE = "report.json"


@dataclass(slots=True)
class TraceRow:
    step: int
    lr: float
    lambda_con: float
    loss_m1: float
    loss_m2: float | None = None
    dice_l1: float | None = None
    dice_l2: float | None = None
    r1: float | None = None
    r2: float | None = None

    def cells(self) -> list[str]:
        return [str(self.step)] + ["" if v is None else repr(float(v))
                                   for v in (self.lr, self.lambda_con, self.loss_m1, self.loss_m2,
                                             self.dice_l1, self.dice_l2, self.r1, self.r2)]


@dataclass(slots=True)
class RunReport:
    method: str
    config: dict
    trace: list[TraceRow] = field(default_factory=list)
    cases: list[CaseMetrics] = field(default_factory=list)
    checkpoints: dict[str, str] = field(default_factory=dict)
    predictor: str = "teacher"
    wall_clock: float = 0.0
    run_dir: str | None = None

    @property
    def summary(self) -> dict:
        return aggregate(self.cases)

    def save(self, run_dir: str) -> str:
        """Writes every file of the run; only report.json holds wall-clock time."""
        self.run_dir = run_dir
        os.makedirs(run_dir, exist_ok=True)
        write_trace_csv(os.path.join(run_dir, TRACE_FILE), self.trace)
        write_case_csv(os.path.join(run_dir, CASES_FILE), self.cases)
        write_summary_json(os.path.join(run_dir, METRICS_FILE), self.cases,
                           extra={"method": self.method, "predictor": self.predictor})
        path = os.path.join(run_dir, REPORT_FILE)
        save_json(path, {
            "method": self.method,
            "config": self.config,
            "predictor": self.predictor,
            "checkpoints": {k: os.path.relpath(v, run_dir) for k, v in self.checkpoints.items()},
            "trace_file": TRACE_FILE,
            "cases_file": CASES_FILE,
            "metrics_file": METRICS_FILE,
            "iterations_run": len(self.trace),
            "wall_clock_seconds": self.wall_clock,
        })
        return path


def write_trace_csv(path: str, rows: list[TraceRow]):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_FIELDS)
        for row in rows:
            writer.writerow(row.cells())


def read_trace_csv(path: str) -> list[TraceRow]:
    def num(v: str) -> float | None:
        return None if v == "" else float(v)

    with open(path, "r", newline="", encoding="utf-8") as f:
        return [TraceRow(int(r["step"]), float(r["lr"]), float(r["lambda_con"]), float(r["loss_m1"]),
                         num(r["loss_m2"]), num(r["dice_l1"]), num(r["dice_l2"]), num(r["r1"]), num(r["r2"]))
                for r in csv.DictReader(f)]


def load_report(run_dir: str) -> dict:
    """report.json with checkpoint paths resolved against the run directory."""
    data = load_json(os.path.join(run_dir, REPORT_FILE))
    data["checkpoints"] = {k: os.path.join(run_dir, v) for k, v in data.get("checkpoints", {}).items()}
    data["run_dir"] = run_dir
    return data
