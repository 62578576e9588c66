from .synthetic import ImageStyle, Sample, SyntheticPool, generate_synthetic, generate_sample, sample_id
from .dataset import SemiDataset, LabeledCase, UnlabeledCase, SplitSpec, split, holdout
from .sampler import PatchBatch, BatchSampler, sample_batch, flip, crop, apply_augmentation
from .volume_io import save_volume, load_volume, encode_volume, decode_volume
from .manifest import Manifest, ManifestEntry, load_dataset, split_roles, MANIFEST_NAME
