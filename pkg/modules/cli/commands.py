"""Subcommand implementations: generate-data, train, evaluate, compare, report.

Output layout under the output root:
    data/manifest.json, data/images/<id>.vseg, data/masks/<id>.vseg
    runs/<method>/n<split>/seed<seed>/   (runs-paper/ with --paper-scale)
    compare/table.csv, compare/table.txt, compare/*.png
    report/preview_n<split>.png
"""
import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from config import ExperimentSpec
from core import CemtError, HashMismatch, IoError
from modules.data import (
    MANIFEST_NAME, Manifest, ManifestEntry, encode_volume, generate_synthetic, load_dataset, split_roles,
)
from modules.metrics import METRICS, write_case_csv, write_summary_json
from modules.report import overlay, plot_training_dice, plot_weights, save_png, tile
from modules.trainer import (
    RunReport, evaluate_run, load_predictor, predict_cases, read_trace_csv, train,
)
from utils import load_json, sha256_bytes, sha256_file

log = logging.getLogger(__name__)

METHOD_LABELS = {"supervised": "Supervised", "mt": "MT", "ce-mt-u": "CE-MT(u)", "ce-mt-b": "CE-MT(b)"}
TABLE_HEADER = ("Method", "Label/Unlabel", "Dice[%]", "Jaccard[%]", "ASD", "95HD")


# ── Paths ──

def data_dir(out: str) -> str:
    return os.path.join(out, "data")


def manifest_path(out: str) -> str:
    return os.path.join(data_dir(out), MANIFEST_NAME)


def run_dir(out: str, method: str, split: int, seed: int, paper_scale: bool = False) -> str:
    runs = "runs-paper" if paper_scale else "runs"
    return os.path.join(out, runs, method, f"n{split}", f"seed{seed}")


# ── generate-data ──

def _write_or_verify(root: str, rel: str, raw: bytes) -> tuple[str, bool]:
    path = os.path.join(root, rel)
    digest = sha256_bytes(raw)
    if os.path.exists(path):
        if sha256_file(path) != digest:
            raise HashMismatch(f"{path} does not match the volume generated from this spec")
        return digest, False
    try:
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as f:
            f.write(raw)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return digest, True


def cmd_generate(spec: ExperimentSpec, out: str) -> tuple[str, int]:
    """Write VSEG1 volumes and the manifest; a re-run only verifies hashes.

    Returns the manifest path and the number of files written.
    """
    ds = spec.dataset
    root = data_dir(out)
    path = manifest_path(out)
    if os.path.exists(path):
        existing = Manifest.load(path)
        if existing.dataset != ds.echo():
            raise HashMismatch(f"{path} was generated from a different dataset block")

    pool = generate_synthetic(ds.seed, ds.count, ds.shape, ds.dims, spacing=ds.spacing, style=ds.style())
    n_train = ds.count - ds.n_test
    entries, written = [], 0
    for i, sample in enumerate(pool.samples):
        image_rel = f"images/{sample.sample_id}.vseg"
        mask_rel = f"masks/{sample.sample_id}.vseg"
        image_hash, w1 = _write_or_verify(root, image_rel, encode_volume(sample.image))
        mask_hash, w2 = _write_or_verify(root, mask_rel, encode_volume(sample.mask))
        written += w1 + w2
        entries.append(ManifestEntry(sample.sample_id, "train" if i < n_train else "test",
                                     image_rel, mask_rel, image_hash, mask_hash))

    train_ids = [e.sample_id for e in entries if e.role == "train"]
    splits = {str(n): split_roles(train_ids, n, spec.split_seed) for n in spec.splits}
    manifest = Manifest(ds.echo(), entries, splits)
    if os.path.exists(path):
        if load_json(path) != manifest.to_dict():
            raise HashMismatch(f"{path} disagrees with the regenerated dataset")
    else:
        manifest.save(path)
        written += 1
    if written:
        log.info("Dataset: %d files written under %s", written, root)
    else:
        log.info("Dataset under %s verified, nothing written", root)
    return path, written


# ── train / evaluate ──

def _dataset(spec: ExperimentSpec, out: str, split: int):
    path = manifest_path(out)
    if not os.path.isfile(path):
        raise IoError(f"manifest not found: {path} (run generate-data first)")
    return load_dataset(path, split, spec.split_seed)


def cmd_train(spec: ExperimentSpec, method: str, split: int, seed: int, out: str,
              paper_scale: bool = False) -> RunReport:
    config = spec.train_config(method, split, seed, paper_scale)
    dataset = _dataset(spec, out, split)
    return train(config, dataset, run_dir(out, method, split, seed, paper_scale))


def cmd_evaluate(spec: ExperimentSpec, method: str, split: int, seed: int, out: str,
                 paper_scale: bool = False) -> dict:
    """Re-evaluate a run from its predictor checkpoint; writes eval_cases.csv and eval_metrics.json."""
    rdir = run_dir(out, method, split, seed, paper_scale)
    if not os.path.isdir(rdir):
        raise IoError(f"run directory not found: {rdir}")
    dataset = _dataset(spec, out, split)
    cases = evaluate_run(rdir, dataset.test)
    write_case_csv(os.path.join(rdir, "eval_cases.csv"), cases)
    return write_summary_json(os.path.join(rdir, "eval_metrics.json"), cases, extra={"method": method})


# ── compare ──

@dataclass(slots=True)
class CompareRow:
    method: str
    split: int
    n_unlabeled: int
    seeds: list[int]
    stats: dict[str, tuple[float, float]]  # metric -> (mean, std) over seeds


@dataclass(slots=True)
class CompareResult:
    rows: list[CompareRow]
    missing: list[tuple[str, int, int]] = field(default_factory=list)
    table_path: str = ""
    text_path: str = ""
    plots: list[str] = field(default_factory=list)


def _train_cell(spec: ExperimentSpec, method: str, split: int, seed: int, out: str,
                paper_scale: bool) -> str:
    cmd_train(spec, method, split, seed, out, paper_scale)
    return run_dir(out, method, split, seed, paper_scale)


def _metrics_of(rdir: str) -> dict | None:
    path = os.path.join(rdir, "metrics.json")
    if not os.path.isfile(path):
        return None
    return load_json(path)


def _run_cells(spec: ExperimentSpec, cells, out: str, paper_scale: bool, jobs: int) -> set:
    """Train every cell without results; returns the cells that failed."""
    failed = set()
    if jobs <= 1:
        for cell in cells:
            try:
                _train_cell(spec, *cell, out, paper_scale)
            except (CemtError, OSError) as e:
                log.error("Cell %s n%d seed%d failed: %s", *cell, e)
                failed.add(cell)
            except Exception:
                log.exception("Cell %s n%d seed%d crashed", *cell)
                failed.add(cell)
        return failed
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = {cell: pool.submit(_train_cell, spec, *cell, out, paper_scale) for cell in cells}
        for cell, fut in futures.items():
            try:
                fut.result()
            except (CemtError, OSError) as e:
                log.error("Cell %s n%d seed%d failed: %s", *cell, e)
                failed.add(cell)
            except Exception:
                log.exception("Cell %s n%d seed%d crashed", *cell)
                failed.add(cell)
    return failed


def _fmt(mean: float, std: float, percent: bool) -> str:
    scale = 100.0 if percent else 1.0
    return f"{mean * scale:.2f} ± {std * scale:.2f}"


def format_table(rows: list[CompareRow], missing=()) -> str:
    body = [TABLE_HEADER]
    for r in rows:
        body.append((METHOD_LABELS[r.method], f"{r.split}/{r.n_unlabeled}",
                     _fmt(*r.stats["dice"], True), _fmt(*r.stats["jaccard"], True),
                     _fmt(*r.stats["asd"], False), _fmt(*r.stats["hd95"], False)))
    widths = [max(len(line[i]) for line in body) for i in range(len(TABLE_HEADER))]
    lines = [" | ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in body]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    if missing:
        lines.append("")
        lines.append("Missing cells:")
        lines.extend(f"  {m} n{s} seed{seed}" for m, s, seed in missing)
    return "\n".join(lines) + "\n"


def _write_table_csv(path: str, rows: list[CompareRow]):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["method", "labeled", "unlabeled", "seeds"]
                        + [f"{m}_{s}" for m in METRICS for s in ("mean", "std")])
        for r in rows:
            writer.writerow([r.method, r.split, r.n_unlabeled, len(r.seeds)]
                            + [repr(v) for m in METRICS for v in r.stats[m]])


def _compare_plots(spec: ExperimentSpec, out: str, paper_scale: bool, present: set) -> list[str]:
    plots = []
    cdir = os.path.join(out, "compare")
    for split in spec.splits:
        series = {}
        for method in spec.methods:
            seeds = [s for s in spec.seeds if (method, split, s) in present]
            if not seeds:
                continue
            rows = read_trace_csv(os.path.join(run_dir(out, method, split, seeds[0], paper_scale), "trace.csv"))
            if not rows:
                continue
            series[METHOD_LABELS[method]] = rows
            if method in ("ce-mt-u", "ce-mt-b"):
                plots.append(plot_weights(rows, os.path.join(cdir, f"weights_{method}_n{split}.png"),
                                          f"{METHOD_LABELS[method]} {split} labeled"))
        if series:
            plots.append(plot_training_dice(series, os.path.join(cdir, f"train_dice_n{split}.png"),
                                            f"{split} labeled"))
    return plots


def cmd_compare(spec: ExperimentSpec, out: str, paper_scale: bool = False, jobs: int = 1,
                run: bool = True) -> CompareResult:
    """Mean ± std over seeds for every (method, split); missing cells are listed, not fatal."""
    cells = [(m, n, s) for m in spec.methods for n in spec.splits for s in spec.seeds]
    todo = [c for c in cells if _metrics_of(run_dir(out, *c, paper_scale)) is None]
    if todo and run:
        log.info("Compare: %d of %d cells need training", len(todo), len(cells))
        _run_cells(spec, todo, out, paper_scale, jobs)

    n_train = spec.dataset.count - spec.dataset.n_test
    rows, missing, present = [], [], set()
    for method in spec.methods:
        for split in spec.splits:
            per_seed, seeds = {m: [] for m in METRICS}, []
            for seed in spec.seeds:
                metrics = _metrics_of(run_dir(out, method, split, seed, paper_scale))
                if metrics is None:
                    missing.append((method, split, seed))
                    continue
                present.add((method, split, seed))
                seeds.append(seed)
                for m in METRICS:
                    per_seed[m].append(metrics[m]["mean"])
            if not seeds:
                continue
            stats = {m: (float(np.mean(v)), float(np.std(v))) for m, v in per_seed.items()}
            n_unlabeled = 0 if method == "supervised" else n_train - split
            rows.append(CompareRow(method, split, n_unlabeled, seeds, stats))

    cdir = os.path.join(out, "compare")
    os.makedirs(cdir, exist_ok=True)
    result = CompareResult(rows, missing)
    result.table_path = os.path.join(cdir, "table.csv")
    _write_table_csv(result.table_path, rows)
    result.text_path = os.path.join(cdir, "table.txt")
    text = format_table(rows, missing)
    with open(result.text_path, "w", encoding="utf-8") as f:
        f.write(text)
    result.plots = _compare_plots(spec, out, paper_scale, present)
    if missing:
        log.warning("Compare: %d cells missing, table is partial", len(missing))
    log.info("Comparison table:\n%s", text)
    return result


# ── report ──

def cmd_report(spec: ExperimentSpec, out: str, split: int, n_cases: int = 4,
               paper_scale: bool = False) -> str | None:
    """Overlay grid of the first test cases, one column per method (first seed)."""
    dataset = _dataset(spec, out, split)
    cases = dataset.test[:n_cases]
    if not cases:
        raise IoError("dataset has no test cases to preview")
    seed = spec.seeds[0]
    columns = []
    for method in spec.methods:
        rdir = run_dir(out, method, split, seed, paper_scale)
        if not os.path.isfile(os.path.join(rdir, "report.json")):
            log.warning("No run for %s n%d seed%d, column skipped", method, split, seed)
            continue
        net, report = load_predictor(rdir)
        cfg = report["config"]
        preds = predict_cases(net, cases, cfg["patch_shape"], cfg["eval_stride"])
        columns.append([overlay(c.image, c.mask, p) for c, p in zip(cases, preds)])
    if not columns:
        log.warning("No finished runs for split %d, nothing to preview", split)
        return None
    return save_png(os.path.join(out, "report", f"preview_n{split}.png"), tile(columns))
