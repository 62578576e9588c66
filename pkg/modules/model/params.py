"""Flat parameter vectors: the unit of EMA arithmetic."""
from dataclasses import dataclass

import torch
from torch import nn

from core import LayoutMismatch

SEGMENTS = ("backbone", "seg_head", "reg_head")


@dataclass(frozen=True, slots=True)
class Segment:
    name: str
    offset: int
    length: int

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.length)


@dataclass(frozen=True, slots=True)
class ParamLayout:
    entries: tuple[tuple[str, tuple[int, ...]], ...]
    segments: tuple[Segment, ...]

    @property
    def size(self) -> int:
        return sum(s.length for s in self.segments)

    def segment(self, name: str) -> slice:
        for s in self.segments:
            if s.name == name:
                return s.slice
        raise LayoutMismatch(f"layout has no segment {name!r}")

    def to_dict(self) -> dict:
        return {
            "entries": [[name, list(shape)] for name, shape in self.entries],
            "segments": [[s.name, s.offset, s.length] for s in self.segments],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ParamLayout":
        return cls(
            entries=tuple((name, tuple(shape)) for name, shape in data["entries"]),
            segments=tuple(Segment(n, o, l) for n, o, l in data["segments"]),
        )


@dataclass(slots=True)
class ParamVector:
    values: torch.Tensor  # 1-D float64
    layout: ParamLayout

    def __post_init__(self):
        if self.values.dim() != 1 or self.values.numel() != self.layout.size:
            raise LayoutMismatch(
                f"vector of {self.values.numel()} values does not fit layout of {self.layout.size}")

    def __len__(self) -> int:
        return self.values.numel()

    def check_layout(self, other: "ParamVector"):
        if self.layout != other.layout:
            raise LayoutMismatch("parameter layouts differ")

    def segment(self, name: str) -> torch.Tensor:
        return self.values[self.layout.segment(name)]

    def clone(self) -> "ParamVector":
        return ParamVector(self.values.clone(), self.layout)

    def with_values(self, values: torch.Tensor) -> "ParamVector":
        return ParamVector(values, self.layout)


def layout_of(net: nn.Module) -> ParamLayout:
    entries = []
    counts = dict.fromkeys(SEGMENTS, 0)
    for name, p in net.named_parameters():
        prefix = name.split(".", 1)[0]
        if prefix not in counts:
            raise LayoutMismatch(f"parameter {name} is outside the known segments")
        entries.append((name, tuple(p.shape)))
        counts[prefix] += p.numel()
    segments, offset = [], 0
    for name in SEGMENTS:
        segments.append(Segment(name, offset, counts[name]))
        offset += counts[name]
    return ParamLayout(tuple(entries), tuple(segments))


def get_params(net: nn.Module) -> ParamVector:
    flat = [p.detach().reshape(-1).to(torch.float64) for p in net.parameters()]
    values = torch.cat(flat) if flat else torch.zeros(0, dtype=torch.float64)
    return ParamVector(values.clone(), layout_of(net))


@torch.no_grad()
def set_params(net: nn.Module, p: ParamVector):
    if layout_of(net) != p.layout:
        raise LayoutMismatch("parameter vector layout does not match network")
    offset = 0
    for param in net.parameters():
        n = param.numel()
        param.copy_(p.values[offset:offset + n].view_as(param).to(param.dtype))
        offset += n
