import hashlib
import json
import os

from core import IoError

OUT_ENV = "CEMT_OUT"


def project_dir() -> str:
    """Directory holding main.py and the committed configs."""
    return os.path.dirname(os.path.abspath(__file__))


def resource_path(relative: str) -> str:
    return os.path.join(project_dir(), relative)


def output_dir(cli_value: str | None, spec_value: str | None = None) -> str:
    """Resolve the output root: CEMT_OUT beats --out beats the spec file."""
    env = os.environ.get(OUT_ENV)
    if env:
        return env
    return cli_value or spec_value or "out"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(64 * 1024), b""):
                h.update(chunk)
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    return h.hexdigest()


def load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e


def save_json(path: str, data) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")
