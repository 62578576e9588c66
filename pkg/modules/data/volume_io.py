"""VSEG1 volume files: magic line, JSON header line, raw little-endian array."""
import json
import os

import numpy as np

from core import CemtError, Volume, FormatError, IoError

MAGIC = b"VSEG1"
_DTYPES = {"uint8": "<u1", "float32": "<f4", "float64": "<f8"}


def _dtype_name(v: Volume) -> str:
    if v.kind == "binary-mask":
        return "uint8"
    if v.data.dtype == np.float64:
        return "float64"
    return "float32"


def encode_volume(v: Volume) -> bytes:
    dtype = _dtype_name(v)
    header = {
        "shape": list(v.shape),
        "spacing": list(v.spacing),
        "kind": v.kind,
        "dtype": dtype,
        "endianness": "little",
    }
    body = np.ascontiguousarray(v.data).astype(_DTYPES[dtype]).tobytes()
    return MAGIC + b"\n" + json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + body


def decode_volume(raw: bytes, source: str = "<bytes>") -> Volume:
    magic, sep, rest = raw.partition(b"\n")
    if magic != MAGIC or not sep:
        raise FormatError(f"{source}: bad magic")
    header_line, sep, body = rest.partition(b"\n")
    if not sep:
        raise FormatError(f"{source}: truncated header")
    try:
        header = json.loads(header_line.decode("utf-8"))
        shape = tuple(int(n) for n in header["shape"])
        dtype = _DTYPES[header["dtype"]]
        spacing = tuple(float(s) for s in header["spacing"])
        kind = header["kind"]
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(f"{source}: bad header ({e})") from e
    if header.get("endianness", "little") != "little":
        raise FormatError(f"{source}: only little-endian payloads are supported")
    expected = int(np.prod(shape)) * np.dtype(dtype).itemsize
    if len(body) != expected:
        raise FormatError(f"{source}: payload has {len(body)} bytes, header implies {expected}")
    data = np.frombuffer(body, dtype=dtype).reshape(shape).astype(np.dtype(dtype).newbyteorder("="))
    try:
        return Volume(data, spacing, kind)
    except CemtError as e:
        raise FormatError(f"{source}: header does not describe a valid volume ({e})") from e


def save_volume(path: str, v: Volume) -> bytes:
    raw = encode_volume(v)
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "wb") as f:
            f.write(raw)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
    return raw


def load_volume(path: str) -> Volume:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    return decode_volume(raw, path)
