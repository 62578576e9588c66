from .overlap import dice, jaccard
from .surface import asd, hd95, asd_with_flag, hd95_with_flag, surface_distances, degenerate_penalty
from .table import (
    CaseMetrics, evaluate_case, aggregate, write_case_csv, read_case_csv, write_summary_json, METRICS,
)
