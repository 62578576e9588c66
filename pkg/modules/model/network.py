"""Dual-head encoder–decoder: shared backbone, segmentation head, tanh regression head.

The backbone is a scaled-down V-Net: residual PReLU stages, strided-conv
downsampling, transposed-conv upsampling and additive skip connections.
"""
import logging
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from core import ConfigError, ShapeError, Volume

log = logging.getLogger(__name__)

HEADS = ("seg", "reg", "both")
NORMALIZATIONS = ("none", "instance")

_CONV = {2: nn.Conv2d, 3: nn.Conv3d}
_UP = {2: nn.ConvTranspose2d, 3: nn.ConvTranspose3d}
_NORM = {2: nn.InstanceNorm2d, 3: nn.InstanceNorm3d}


@dataclass(slots=True)
class NetworkConfig:
    dims: int = 2
    in_channels: int = 1
    base_channels: int = 8
    depth: int = 3
    num_classes: int = 2
    convs_per_stage: int = 2
    normalization: str = "none"

    def validate(self):
        if self.dims not in (2, 3):
            raise ConfigError(f"dims must be 2 or 3, got {self.dims}")
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.base_channels < 1 or self.in_channels < 1 or self.convs_per_stage < 1:
            raise ConfigError("channel and conv counts must be >= 1")
        if self.num_classes != 2:
            raise ConfigError("only foreground/background segmentation (num_classes=2) is supported")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"normalization must be one of {NORMALIZATIONS}")

    @property
    def divisor(self) -> int:
        return 2 ** (self.depth - 1)

    def check_patch_shape(self, shape, error=ShapeError):
        """Patch sides must be divisible by 2^(depth-1)."""
        shape = tuple(int(s) for s in shape)
        if len(shape) != self.dims:
            raise error(f"patch {shape} does not have {self.dims} spatial axes")
        bad = [s for s in shape if s < 1 or s % self.divisor]
        if bad:
            raise error(f"patch {shape}: every side must be divisible by {self.divisor}")


# ── Building blocks ──

class _ResidualStage(nn.Module):
    def __init__(self, dims, in_ch, out_ch, n_convs, normalization):
        super().__init__()
        layers = []
        for i in range(n_convs):
            layers.append(_CONV[dims](in_ch if i == 0 else out_ch, out_ch, 3, padding=1))
            if normalization == "instance":
                layers.append(_NORM[dims](out_ch, affine=True))
            if i != n_convs - 1:
                layers.append(nn.PReLU(out_ch))
        self.body = nn.Sequential(*layers)
        self.skip = _CONV[dims](in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()
        self.act = nn.PReLU(out_ch)

    def forward(self, x):
        return self.act(self.body(x) + self.skip(x))


class Backbone(nn.Module):
    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        d = cfg.dims
        ch = [cfg.base_channels * 2 ** i for i in range(cfg.depth)]
        self.encoders = nn.ModuleList()
        self.downs = nn.ModuleList()
        for i in range(cfg.depth):
            in_ch = cfg.in_channels if i == 0 else ch[i]
            self.encoders.append(_ResidualStage(d, in_ch, ch[i], cfg.convs_per_stage, cfg.normalization))
            if i < cfg.depth - 1:
                self.downs.append(_CONV[d](ch[i], ch[i + 1], 2, stride=2))
        self.ups = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for i in range(cfg.depth - 1, 0, -1):
            self.ups.append(_UP[d](ch[i], ch[i - 1], 2, stride=2))
            self.decoders.append(_ResidualStage(d, ch[i - 1], ch[i - 1], cfg.convs_per_stage, cfg.normalization))

    def forward(self, x):
        skips = []
        for i, enc in enumerate(self.encoders):
            x = enc(x)
            if i < len(self.downs):
                skips.append(x)
                x = self.downs[i](x)
        for up, dec, skip in zip(self.ups, self.decoders, reversed(skips)):
            x = dec(up(x) + skip)
        return x


class DualHeadNetwork(nn.Module):
    """Backbone + seg head (1×1 conv, softmax) + reg head (3×3 conv, tanh).

    Every instance owns both heads so students and teacher share one
    parameter layout; the inactive head is frozen.
    """

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        d = config.dims
        self.backbone = Backbone(config)
        self.seg_head = _CONV[d](config.base_channels, config.num_classes, 1)
        self.reg_head = _CONV[d](config.base_channels, 1, 3, padding=1)
        self._active_head = "both"

    @property
    def active_head(self) -> str:
        return self._active_head

    def set_active_head(self, head: str) -> "DualHeadNetwork":
        if head not in HEADS:
            raise ConfigError(f"active_head must be one of {HEADS}, got {head!r}")
        self._active_head = head
        self.backbone.requires_grad_(True)
        self.seg_head.requires_grad_(head in ("seg", "both"))
        self.reg_head.requires_grad_(head in ("reg", "both"))
        return self

    def freeze(self) -> "DualHeadNetwork":
        """No parameter receives gradients (teacher)."""
        self.requires_grad_(False)
        return self

    def trainable_parameters(self) -> list[nn.Parameter]:
        return [p for p in self.parameters() if p.requires_grad]

    def _check_input(self, x: torch.Tensor):
        cfg = self.config
        if x.dim() != cfg.dims + 2 or x.shape[1] != cfg.in_channels:
            raise ShapeError(
                f"expected input (B, {cfg.in_channels}, {cfg.dims} spatial axes), got {tuple(x.shape)}")
        cfg.check_patch_shape(x.shape[2:])

    def forward(self, x: torch.Tensor, heads: str | None = None) -> dict[str, torch.Tensor]:
        """Returns {"seg": class probabilities (B,C,...), "sdf": (B,1,...)} for the selected heads."""
        self._check_input(x)
        heads = heads or self._active_head
        feat = self.backbone(x)
        out = {}
        if heads in ("seg", "both"):
            out["seg"] = torch.softmax(self.seg_head(feat), dim=1)
        if heads in ("reg", "both"):
            out["sdf"] = torch.tanh(self.reg_head(feat))
        return out


def _init_weights(module: nn.Module):
    if isinstance(module, (nn.Conv2d, nn.Conv3d, nn.ConvTranspose2d, nn.ConvTranspose3d)):
        nn.init.kaiming_normal_(module.weight, a=0.25, mode="fan_in", nonlinearity="leaky_relu")
        if module.bias is not None:
            nn.init.zeros_(module.bias)


def build_network(config: NetworkConfig, seed: int, dtype: torch.dtype = torch.float32) -> DualHeadNetwork:
    """Deterministic given (config, seed); the global RNG is left untouched."""
    config.validate()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        net = DualHeadNetwork(config)
        net.apply(_init_weights)
    net = net.to(dtype)
    log.debug("Built %dD network depth=%d base=%d seed=%d",
              config.dims, config.depth, config.base_channels, seed)
    return net


def param_dtype(net: nn.Module) -> torch.dtype:
    for p in net.parameters():
        return p.dtype
    return torch.float32


@torch.no_grad()
def forward(net: DualHeadNetwork, patch: Volume) -> dict:
    """Volume-level forward: {"seg": [Volume per class], "sdf": Volume}."""
    x = torch.from_numpy(np.ascontiguousarray(patch.data)).to(param_dtype(net))
    out = net(x[None, None])
    result = {}
    if "seg" in out:
        probs = out["seg"][0].cpu().numpy().astype(np.float64)
        result["seg"] = [patch.like(np.clip(p, 0.0, 1.0), "probability") for p in probs]
    if "sdf" in out:
        result["sdf"] = patch.like(out["sdf"][0, 0].cpu().numpy().astype(np.float64), "sdf")
    return result
