from .schedule import lr_at, consistency_weight
from .inference import infer_sliding_window, predict_mask, coverage_counts, window_starts
from .report import RunReport, TraceRow, read_trace_csv, load_report, TRACE_FIELDS
from .evaluate import evaluate_model, evaluate_run, load_predictor, predict_cases, score_cases
from .loop import Trainer, train, NONFINITE_DUMP
