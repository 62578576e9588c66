"""Dataset manifest: sample ids, roles, file paths and hashes."""
import logging
import os
from dataclasses import dataclass, field, asdict

from core import FormatError, IoError, SplitError
from utils import load_json, save_json
from .dataset import LabeledCase, SemiDataset, split, split_order
from .synthetic import Sample
from .volume_io import load_volume

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass(slots=True)
class ManifestEntry:
    sample_id: str
    role: str  # train | test
    image_path: str
    mask_path: str
    image_sha256: str
    mask_sha256: str


@dataclass(slots=True)
class Manifest:
    dataset: dict
    entries: list[ManifestEntry]
    splits: dict[str, dict[str, list[str]]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"dataset": self.dataset,
                "entries": [asdict(e) for e in self.entries],
                "splits": self.splits}

    @classmethod
    def from_dict(cls, data: dict) -> "Manifest":
        try:
            return cls(dict(data["dataset"]),
                       [ManifestEntry(**e) for e in data["entries"]],
                       dict(data.get("splits", {})))
        except (KeyError, TypeError) as e:
            raise FormatError(f"bad manifest ({e})") from e

    def save(self, path: str):
        save_json(path, self.to_dict())

    @classmethod
    def load(cls, path: str) -> "Manifest":
        if not os.path.isfile(path):
            raise IoError(f"manifest not found: {path}")
        return cls.from_dict(load_json(path))

    def roles(self, role: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.role == role]


def split_roles(train_ids: list[str], n_labeled: int, seed: int) -> dict[str, list[str]]:
    """Same order as dataset.split, recorded for the manifest."""
    order = split_order(len(train_ids), seed)
    chosen = [train_ids[i] for i in order]
    return {"labeled": chosen[:n_labeled], "unlabeled": chosen[n_labeled:]}


def _load_sample(root: str, entry: ManifestEntry) -> Sample:
    image = load_volume(os.path.join(root, entry.image_path))
    mask = load_volume(os.path.join(root, entry.mask_path))
    return Sample(entry.sample_id, image, mask)


def load_dataset(manifest_path: str, n_labeled: int, split_seed: int) -> SemiDataset:
    """Read volumes listed in the manifest and split the train role."""
    manifest = Manifest.load(manifest_path)
    root = os.path.dirname(os.path.abspath(manifest_path))
    train = [_load_sample(root, e) for e in manifest.roles("train")]
    test_samples = [_load_sample(root, e) for e in manifest.roles("test")]
    if not train:
        raise SplitError(f"{manifest_path}: no training samples")
    test = [LabeledCase(s.sample_id, s.image, s.mask) for s in test_samples]
    log.info("Loaded %d train / %d test volumes from %s", len(train), len(test), manifest_path)
    return split(train, n_labeled, split_seed, test=test)
