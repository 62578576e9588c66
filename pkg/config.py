"""Run configuration: TrainConfig, DatasetSpec, ExperimentSpec and the YAML spec file.

Layering, lowest to highest: dataclass defaults, the spec file's `train`
block, the spec file's per-method `overrides`, CLI flags, CEMT_OUT.
"""
import copy
import logging
import os
from dataclasses import dataclass, field, fields, asdict

import yaml

from core import ConfigError, IoError
from modules.model.network import NetworkConfig
from modules.ensembling.ema import EmaConfig
from modules.data.synthetic import ImageStyle

log = logging.getLogger(__name__)

METHODS = ("supervised", "mt", "ce-mt-u", "ce-mt-b")
STRATEGY_OF = {"mt": "classic", "ce-mt-u": "unidirectional", "ce-mt-b": "bidirectional"}
DTYPES = ("float32", "float64")

# iterations, schedule_step, ramp_steps
PAPER_SCALE = (6000, 2500, 1500)


@dataclass(slots=True)
class TrainConfig:
    method: str = "ce-mt-b"
    iterations: int = 1500
    base_lr: float = 0.01
    lr_gamma: float = 0.1
    schedule_step: int = 625
    momentum: float = 0.0
    weight_decay: float = 0.0
    labeled_per_batch: int = 2
    unlabeled_per_batch: int = 2
    patch_shape: tuple[int, ...] = (64, 64)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    ema: EmaConfig = field(default_factory=EmaConfig)
    w_max: float = 0.1
    ramp_steps: int | None = None  # None: 25% of iterations
    teacher_noise: bool = True
    noise_std: float = 0.1
    noise_clip: float = 0.2
    k: float = 1500.0
    split_seed: int = 0
    sampler_seed: int = 0
    init_seed: int = 0
    n_labeled: int = 16
    augment: bool = True
    sdf_from_full_volume: bool = False
    full_set_every: int = 0
    eval_stride: tuple[int, ...] | None = None  # None: half the patch
    log_every: int = 50
    progress: bool = True
    prefetch: int = 0
    pin_l2: float | None = None  # test hook: fixed dice loss for student 2
    dtype: str = "float32"

    def __post_init__(self):
        self.patch_shape = tuple(int(p) for p in self.patch_shape)
        if self.eval_stride is not None:
            self.eval_stride = tuple(int(s) for s in self.eval_stride)
        if isinstance(self.network, dict):
            self.network = _build(NetworkConfig, self.network, "network")
        if isinstance(self.ema, dict):
            self.ema = _build(EmaConfig, self.ema, "ema")

    @property
    def semi_supervised(self) -> bool:
        return self.method != "supervised"

    @property
    def competitive(self) -> bool:
        return self.method in ("ce-mt-u", "ce-mt-b")

    @property
    def strategy(self) -> str | None:
        return STRATEGY_OF.get(self.method)

    @property
    def ramp_length(self) -> int:
        if self.ramp_steps is not None:
            return self.ramp_steps
        return max(1, self.iterations // 4)

    @property
    def stride(self) -> tuple[int, ...]:
        if self.eval_stride is not None:
            return self.eval_stride
        return tuple(max(1, p // 2) for p in self.patch_shape)

    def validate(self) -> "TrainConfig":
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.base_lr <= 0 or not 0 < self.lr_gamma <= 1 or self.schedule_step < 1:
            raise ConfigError("learning-rate schedule needs base_lr > 0, gamma in (0, 1], schedule_step >= 1")
        if self.momentum < 0 or self.weight_decay < 0:
            raise ConfigError("momentum and weight_decay must be >= 0")
        if self.labeled_per_batch < 1 or self.unlabeled_per_batch < 0:
            raise ConfigError("a batch needs >= 1 labeled and >= 0 unlabeled samples")
        if self.semi_supervised and self.unlabeled_per_batch < 1:
            raise ConfigError(f"method {self.method} needs unlabeled samples in the batch")
        if self.w_max < 0 or (self.ramp_steps is not None and self.ramp_steps < 1):
            raise ConfigError("w_max must be >= 0 and ramp_steps >= 1")
        if self.noise_std < 0 or self.noise_clip < 0:
            raise ConfigError("noise_std and noise_clip must be >= 0")
        if self.k <= 0:
            raise ConfigError(f"k must be positive, got {self.k}")
        if self.n_labeled < 1:
            raise ConfigError("n_labeled must be >= 1")
        if self.full_set_every < 0 or self.log_every < 1 or self.prefetch < 0:
            raise ConfigError("full_set_every and prefetch must be >= 0, log_every >= 1")
        if self.pin_l2 is not None and not 0.0 <= self.pin_l2 <= 1.0:
            raise ConfigError("pin_l2 must lie in [0, 1]")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {DTYPES}")
        self.network.validate()
        self.network.check_patch_shape(self.patch_shape, error=ConfigError)
        if len(self.stride) != len(self.patch_shape) or any(
                s < 1 or s > p for s, p in zip(self.stride, self.patch_shape)):
            raise ConfigError(f"eval_stride {self.stride} must lie in [1, patch] per axis")
        if self.semi_supervised:
            self.ema.validate()
        return self

    def echo(self) -> dict:
        data = asdict(self)
        data["patch_shape"] = list(self.patch_shape)
        data["eval_stride"] = list(self.stride)
        return data


@dataclass(slots=True)
class DatasetSpec:
    seed: int = 1337
    count: int = 100
    shape: tuple[int, ...] = (64, 64)
    dims: int = 2
    n_test: int = 20
    snr: float = 4.0
    contrast: float = 1.0
    bias: float = 0.0
    blur: float = 1.0
    distractors: int = 0
    irregular: bool = False
    spacing: tuple[float, ...] | None = None

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        if self.spacing is not None:
            self.spacing = tuple(float(s) for s in self.spacing)

    def validate(self) -> "DatasetSpec":
        if self.dims not in (2, 3) or len(self.shape) != self.dims:
            raise ConfigError(f"dataset shape {self.shape} does not match dims={self.dims}")
        if self.count < 2 or not 0 < self.n_test < self.count:
            raise ConfigError("dataset needs count >= 2 and 0 < n_test < count")
        self.style().validate()
        return self

    def style(self) -> ImageStyle:
        return ImageStyle(self.snr, self.contrast, self.bias, self.blur, self.distractors, self.irregular)

    def echo(self) -> dict:
        data = asdict(self)
        data["shape"] = list(self.shape)
        if self.spacing is not None:
            data["spacing"] = list(self.spacing)
        return data


@dataclass(slots=True)
class ExperimentSpec:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    splits: list[int] = field(default_factory=lambda: [8, 16])
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    split_seed: int = 0
    train: dict = field(default_factory=dict)
    overrides: dict[str, dict] = field(default_factory=dict)
    out_dir: str = "out"
    source: str | None = None

    def validate(self) -> "ExperimentSpec":
        self.dataset.validate()
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
        for name in self.overrides:
            if name not in METHODS:
                raise ConfigError(f"overrides for unknown method {name!r}")
        n_train = self.dataset.count - self.dataset.n_test
        for n in self.splits:
            if not 1 <= n <= n_train:
                raise ConfigError(f"split {n} is outside [1, {n_train}]")
        if not self.splits or not self.seeds:
            raise ConfigError("spec needs at least one split and one seed")
        for method in self.methods:
            self.train_config(method, self.splits[0], self.seeds[0])
        return self

    def train_config(self, method: str, split: int, seed: int, paper_scale: bool = False) -> TrainConfig:
        """Resolved TrainConfig for one (method, split, seed) cell."""
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
        data = _merge(copy.deepcopy(self.train), self.overrides.get(method, {}))
        data.update(method=method, n_labeled=int(split), split_seed=self.split_seed,
                    sampler_seed=int(seed), init_seed=int(seed))
        if paper_scale:
            data["iterations"], data["schedule_step"], data["ramp_steps"] = PAPER_SCALE
        data.setdefault("patch_shape", list(self.dataset.shape))
        return _build(TrainConfig, data, "train").validate()


# ── YAML spec files ──

def _merge(base: dict, top: dict) -> dict:
    for key, value in top.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = copy.deepcopy(value)
    return base


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def spec_from_dict(data: dict, source: str | None = None) -> ExperimentSpec:
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"spec: expected a mapping, got {type(data).__name__}")
    data = dict(data or {})
    known = {f.name for f in fields(ExperimentSpec)} - {"source"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"spec: unknown keys {unknown}")
    if "dataset" in data:
        data["dataset"] = _build(DatasetSpec, data["dataset"], "dataset")
    for key in ("splits", "seeds"):
        if key in data:
            data[key] = [int(v) for v in data[key]]
    if "methods" in data:
        data["methods"] = [str(m) for m in data["methods"]]
    train = data["train"] = data.get("train") or {}
    _build(TrainConfig, train, "train")  # unknown keys fail early
    overrides = data.get("overrides") or {}
    if not isinstance(overrides, dict) or not all(isinstance(b or {}, dict) for b in overrides.values()):
        raise ConfigError("overrides: expected a mapping of method -> mapping")
    overrides = data["overrides"] = {m: dict(b or {}) for m, b in overrides.items()}
    for method, block in overrides.items():
        _build(TrainConfig, _merge(copy.deepcopy(train), block), f"overrides.{method}")
    return ExperimentSpec(**data, source=source).validate()


def load_spec(path: str) -> ExperimentSpec:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise IoError(f"cannot read spec {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML ({e})") from e
    spec = spec_from_dict(data, source=path)
    log.info("Loaded spec %s: %d methods × %d splits × %d seeds",
             path, len(spec.methods), len(spec.splits), len(spec.seeds))
    return spec


def default_spec_path() -> str:
    from utils import resource_path
    return resource_path(os.path.join("configs", "desk.yaml"))
