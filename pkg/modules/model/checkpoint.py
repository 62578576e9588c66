"""Checkpoint file: magic line, JSON header line, raw little-endian float64 payload."""
import json
import logging
import os
from dataclasses import asdict

import numpy as np
import torch

from core import FormatError, IoError
from .network import DualHeadNetwork, NetworkConfig, build_network
from .params import ParamLayout, ParamVector, get_params, set_params

log = logging.getLogger(__name__)

MAGIC = b"CEMTCKPT1"


def save_checkpoint(path: str, net: DualHeadNetwork, extra: dict | None = None) -> str:
    p = get_params(net)
    header = {
        "config": asdict(net.config),
        "layout": p.layout.to_dict(),
        "active_head": net.active_head,
        "dtype": "float64",
        "endianness": "little",
        "count": len(p),
        "extra": extra or {},
    }
    payload = p.values.numpy().astype("<f8").tobytes()
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    try:
        with open(path, "wb") as f:
            f.write(MAGIC + b"\n")
            f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
            f.write(payload)
    except OSError as e:
        raise IoError(f"cannot write checkpoint {path}: {e}") from e
    log.info("Checkpoint saved: %s (%d params)", path, len(p))
    return path


def read_checkpoint(path: str) -> tuple[dict, ParamVector]:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise IoError(f"cannot read checkpoint {path}: {e}") from e
    magic, sep, rest = raw.partition(b"\n")
    if magic != MAGIC or not sep:
        raise FormatError(f"{path}: not a checkpoint file")
    header_line, sep, payload = rest.partition(b"\n")
    try:
        header = json.loads(header_line.decode("utf-8"))
        layout = ParamLayout.from_dict(header["layout"])
        count = int(header["count"])
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(f"{path}: bad header ({e})") from e
    if not sep or len(payload) != count * 8 or count != layout.size:
        raise FormatError(f"{path}: payload size does not match header")
    values = torch.from_numpy(np.frombuffer(payload, dtype="<f8").astype(np.float64))
    return header, ParamVector(values, layout)


def load_checkpoint(path: str, dtype: torch.dtype = torch.float32) -> DualHeadNetwork:
    header, params = read_checkpoint(path)
    try:
        config = NetworkConfig(**header["config"])
    except TypeError as e:
        raise FormatError(f"{path}: bad network config ({e})") from e
    net = build_network(config, seed=0, dtype=dtype)
    set_params(net, params)
    net.set_active_head(header.get("active_head", "both"))
    return net
