"""Training loop for the supervised baseline, MT, CE-MT-U and CE-MT-B.

Students: M1 trains its segmentation head, M2 (competitive methods only)
trains its SDF regression head. The teacher never receives gradients; its
master parameters are a float64 ParamVector moved only by EMA updates.
"""
import logging
import os
import queue
import sys
import tempfile
import threading
import time

import numpy as np
import torch
from tqdm import tqdm

from config import TrainConfig
from core import NonFiniteLoss, SplitError
from modules.data import BatchSampler, PatchBatch, SemiDataset
from modules.ensembling import (
    WeightTrace, competitive_weights, ema_update_classic, ema_update_competitive, weights_classic,
)
from modules.losses import consistency_loss, dice_loss, supervised_sdf_loss, supervised_seg_loss
from modules.model import DualHeadNetwork, build_network, get_params, save_checkpoint, set_params
from .evaluate import evaluate_model
from .inference import infer_sliding_window
from .report import RunReport, TraceRow, WEIGHTS_FILE
from .schedule import consistency_weight, lr_at

log = logging.getLogger(__name__)

NONFINITE_DUMP = "nonfinite_batch.npz"
_DTYPES = {"float32": torch.float32, "float64": torch.float64}


class _Prefetcher:
    """Samples batches on a worker thread into a bounded queue, in order."""

    def __init__(self, sampler: BatchSampler, count: int, depth: int):
        self._queue: queue.Queue = queue.Queue(maxsize=depth)
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, args=(sampler, count), daemon=True)
        self._thread.start()

    def _run(self, sampler: BatchSampler, count: int):
        for _ in range(count):
            try:
                item = sampler.sample()
            except Exception as e:
                item = e
            while not self._stop.is_set():
                try:
                    self._queue.put(item, timeout=0.1)
                    break
                except queue.Full:
                    continue
            if self._stop.is_set() or isinstance(item, Exception):
                return

    def get(self) -> PatchBatch:
        item = self._queue.get()
        if isinstance(item, Exception):
            raise item
        return item

    def close(self):
        self._stop.set()
        self._thread.join(timeout=1.0)


def _clip_unit(v: float) -> float:
    return min(1.0, max(0.0, v))


class Trainer:
    def __init__(self, config: TrainConfig, dataset: SemiDataset, out_dir: str | None = None):
        self.config = config.validate()
        if dataset.split_spec.n_labeled != config.n_labeled:
            raise SplitError(f"dataset has {dataset.split_spec.n_labeled} labeled samples, "
                             f"config expects {config.n_labeled}")
        self.dataset = dataset
        self.out_dir = out_dir
        self.dtype = _DTYPES[config.dtype]

        net_cfg = config.network
        self.m1 = build_network(net_cfg, config.init_seed, self.dtype).set_active_head("seg")
        self.m2: DualHeadNetwork | None = None
        self.teacher: DualHeadNetwork | None = None
        self.teacher_params = None
        if config.competitive:
            # starts from M1's weights; the teacher mixes both backbones
            self.m2 = build_network(net_cfg, config.init_seed, self.dtype).set_active_head("reg")
        if config.semi_supervised:
            self.teacher = build_network(net_cfg, config.init_seed, self.dtype).freeze()
            self.teacher_params = get_params(self.m1)
            set_params(self.teacher, self.teacher_params)
            self.teacher.eval()

        self.optimizers = [
            torch.optim.SGD(m.trainable_parameters(), lr=config.base_lr,
                            momentum=config.momentum, weight_decay=config.weight_decay)
            for m in self.students
        ]
        self.sampler = BatchSampler(
            dataset, config.patch_shape,
            n_labeled=config.labeled_per_batch,
            n_unlabeled=config.unlabeled_per_batch if config.semi_supervised else 0,
            seed=config.sampler_seed, stream=0, augment=config.augment,
            sdf_from_full_volume=config.sdf_from_full_volume,
        )
        noise_seed = int(np.random.default_rng([config.sampler_seed, 1]).integers(2 ** 62))
        self._noise = torch.Generator().manual_seed(noise_seed)
        self._full_set: tuple[float, float] | None = None
        self._weights_trace: WeightTrace | None = None
        self.step_index = 0
        self.trace: list[TraceRow] = []

    @property
    def students(self) -> list[DualHeadNetwork]:
        return [m for m in (self.m1, self.m2) if m is not None]

    @property
    def predictor(self) -> DualHeadNetwork:
        """Teacher for semi-supervised methods, M1 for the baseline."""
        return self.teacher if self.teacher is not None else self.m1

    @property
    def predictor_name(self) -> str:
        return "teacher" if self.teacher is not None else "m1"

    # ── One iteration ──

    def _tensor(self, array: np.ndarray) -> torch.Tensor:
        return torch.from_numpy(np.ascontiguousarray(array)).to(self.dtype)

    @torch.no_grad()
    def _teacher_forward(self, x: torch.Tensor) -> dict[str, torch.Tensor]:
        cfg = self.config
        if cfg.teacher_noise:
            noise = torch.randn(x.shape, generator=self._noise, dtype=x.dtype) * cfg.noise_std
            x = x + torch.clamp(noise, -cfg.noise_clip, cfg.noise_clip)
        return self.teacher(x, heads="both" if self.m2 is not None else "seg")

    def _abort(self, batch: PatchBatch, what: str):
        dump_dir = self.out_dir or tempfile.mkdtemp(prefix="cemt-")
        os.makedirs(dump_dir, exist_ok=True)
        path = os.path.join(dump_dir, NONFINITE_DUMP)
        batch.to_npz(path)
        log.error("Non-finite %s at step %d, batch dumped to %s", what, self.step_index, path)
        raise NonFiniteLoss(f"non-finite {what} at step {self.step_index}", dump_path=path)

    @torch.no_grad()
    def labeled_set_losses(self) -> tuple[float, float]:
        """Mean dice loss of M1 (seg head) and M2 (SDF head through the inverse transform)
        over every labeled volume, predicted with sliding windows."""
        cfg = self.config
        l1, l2 = [], []
        for case in self.dataset.labeled:
            target = torch.from_numpy(case.mask.data.astype(np.float64))
            p1 = infer_sliding_window(self.m1, case.image, cfg.patch_shape, cfg.stride, "seg")
            l1.append(float(dice_loss(torch.from_numpy(p1.data), target)))
            if self.m2 is not None:
                p2 = infer_sliding_window(self.m2, case.image, cfg.patch_shape, cfg.stride, "sdf", cfg.k)
                l2.append(float(dice_loss(torch.from_numpy(p2.data), target)))
        return float(np.mean(l1)), float(np.mean(l2)) if l2 else float("nan")

    def step(self, batch: PatchBatch | None = None) -> TraceRow:
        cfg = self.config
        t = self.step_index
        batch = batch if batch is not None else self.sampler.sample()
        lr = lr_at(t, cfg)
        lam = consistency_weight(t, cfg)
        for opt in self.optimizers:
            for group in opt.param_groups:
                group["lr"] = lr

        n_l = batch.n_labeled
        x = self._tensor(batch.images())[:, None]
        masks = torch.from_numpy(batch.labeled_masks.astype(np.int64))
        teacher_out = self._teacher_forward(x) if self.teacher is not None else None

        self.m1.train()
        seg = self.m1(x, heads="seg")["seg"]
        sup1 = supervised_seg_loss(seg[:n_l], masks)
        loss1 = sup1.value
        if teacher_out is not None:
            loss1 = loss1 + lam * consistency_loss(seg, teacher_out["seg"])
        losses = [loss1]

        sup2 = None
        if self.m2 is not None:
            self.m2.train()
            sdf = self.m2(x, heads="reg")["sdf"]
            sup2 = supervised_sdf_loss(sdf[:n_l, 0], self._tensor(batch.labeled_sdfs), cfg.k)
            losses.append(sup2.value + lam * consistency_loss(sdf, teacher_out["sdf"]))

        for loss in losses:
            if not torch.isfinite(loss).all():
                self._abort(batch, "loss")
        for opt, loss in zip(self.optimizers, losses):
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()

        l1 = sup1.components["dice"]
        l2 = sup2.components["dice"] if sup2 is not None else None
        if cfg.full_set_every and self.m2 is not None:
            if self._full_set is None or t % cfg.full_set_every == 0:
                self._full_set = self.labeled_set_losses()
            l1, l2 = self._full_set
        if cfg.pin_l2 is not None and self.m2 is not None:
            l2 = cfg.pin_l2
        if not np.isfinite(l1) or (l2 is not None and not np.isfinite(l2)):
            self._abort(batch, "dice loss")

        r1 = r2 = None
        if self.teacher is not None:
            w = self._update_teacher(t, l1, l2)
            r1, r2 = w.r1, w.r2
            if self._weights_trace is not None:
                self._weights_trace.append(t, l1, l2 if l2 is not None else float("nan"), w)

        row = TraceRow(t, lr, lam, float(loss1.detach()),
                       float(losses[1].detach()) if len(losses) > 1 else None,
                       l1, l2, r1, r2)
        self.trace.append(row)
        self.step_index += 1
        if log.isEnabledFor(logging.DEBUG):
            log.debug("step %d lr=%.2e lam=%.4f loss_m1=%.4f loss_m2=%s r=(%s, %s)",
                      t, lr, lam, row.loss_m1, row.loss_m2, r1, r2)
        return row

    def _update_teacher(self, t: int, l1: float, l2: float | None):
        cfg = self.config
        alpha = cfg.ema.alpha_at(t)
        s1 = get_params(self.m1)
        if self.m2 is None:
            w = weights_classic()
            self.teacher_params = ema_update_classic(self.teacher_params, s1, alpha)
        else:
            w = competitive_weights(cfg.strategy, _clip_unit(l1), _clip_unit(l2))
            self.teacher_params = ema_update_competitive(
                self.teacher_params, s1, get_params(self.m2), w, cfg.ema, alpha=alpha)
        set_params(self.teacher, self.teacher_params)
        return w

    # ── Whole run ──

    def run(self, callback=None) -> list[TraceRow]:
        """Runs the remaining iterations; callback(trainer, row) follows every step."""
        cfg = self.config
        remaining = cfg.iterations - self.step_index
        if remaining <= 0:
            return self.trace
        if self.out_dir and self.teacher is not None:
            self._weights_trace = WeightTrace(os.path.join(self.out_dir, WEIGHTS_FILE))
        prefetch = _Prefetcher(self.sampler, remaining, cfg.prefetch) if cfg.prefetch else None
        bar = tqdm(total=remaining, desc=cfg.method, ncols=70,
                   disable=not (cfg.progress and sys.stderr.isatty()))
        log.info("Training %s: %d iterations, %d/%d labeled/unlabeled volumes",
                 cfg.method, cfg.iterations, len(self.dataset.labeled), len(self.dataset.unlabeled))
        try:
            for _ in range(remaining):
                row = self.step(prefetch.get() if prefetch else None)
                bar.update(1)
                if (row.step + 1) % cfg.log_every == 0:
                    log.info("iter %d/%d lr=%.2e lam=%.4f loss_m1=%.4f dice_l1=%.4f r1=%s",
                             row.step + 1, cfg.iterations, row.lr, row.lambda_con,
                             row.loss_m1, row.dice_l1, row.r1)
                if callback is not None:
                    callback(self, row)
        finally:
            bar.close()
            if prefetch:
                prefetch.close()
            if self._weights_trace is not None:
                self._weights_trace.close()
                self._weights_trace = None
        return self.trace

    def save_checkpoints(self, run_dir: str) -> dict[str, str]:
        nets = {"m1": self.m1, "m2": self.m2, "teacher": self.teacher}
        extra = {"method": self.config.method, "step": self.step_index}
        return {name: save_checkpoint(os.path.join(run_dir, f"{name}.ckpt"), net, extra)
                for name, net in nets.items() if net is not None}


def train(config: TrainConfig, dataset: SemiDataset, out_dir: str | None = None,
          callback=None) -> RunReport:
    """Train, evaluate the predictor on the test set and (with out_dir) write the run files."""
    torch.use_deterministic_algorithms(True, warn_only=True)
    start = time.perf_counter()
    trainer = Trainer(config, dataset, out_dir)
    trainer.run(callback)
    predictor = trainer.predictor
    predictor.eval()
    cases = evaluate_model(predictor, dataset.test, config.patch_shape, config.stride)
    report = RunReport(config.method, config.echo(), list(trainer.trace), cases,
                       predictor=trainer.predictor_name)
    if out_dir:
        report.checkpoints = trainer.save_checkpoints(out_dir)
        report.wall_clock = time.perf_counter() - start
        report.save(out_dir)
        log.info("Run written to %s (%.1fs)", out_dir, report.wall_clock)
    return report
