"""Synthetic knee-like phantoms with plantable small lesions.

A phantom is a min-max normalized sum of soft-edged ellipses plus optional
Gaussian noise.  Lesions are small 4-connected contrast blobs; planting one
returns the modified image and the tight bounding box around its pixels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import blobs, gridio
from .errors import ConfigError, PlacementError
from .seeding import derive_rng, derive_seed

LESION_LABELS = ("bml", "cartilage", "meniscus", "cyst")

DATASET_FORMAT = "FNAFLAB-DATASET v1"
ANNOT_FORMAT = "ANNOT v1"


@dataclass(frozen=True)
class PhantomSpec:
    size: int = 128
    n_ellipses: int = 12
    intensity_range: tuple[float, float] = (0.25, 1.0)
    noise_sigma: float = 0.002
    seed: int = 0

    def __post_init__(self):
        if self.size < 64:
            raise ConfigError(f"phantom size must be >= 64, got {self.size}")
        if self.n_ellipses < 1:
            raise ConfigError(f"need at least one ellipse, got {self.n_ellipses}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        lo, hi = self.intensity_range
        if not 0 < lo <= hi:
            raise ConfigError(f"bad intensity_range {self.intensity_range}")


class PixelBox(NamedTuple):
    """Tight pixel bounding box, x/y are the top-left column/row."""

    x: int
    y: int
    w: int
    h: int


@dataclass(frozen=True)
class Lesion:
    """A small connected contrast blob at a fixed image location."""

    center: tuple[int, int]  # (row, col)
    contrast: float
    label: str
    offsets: tuple[tuple[int, int], ...] = ((0, 0),)

    def __post_init__(self):
        if self.label not in LESION_LABELS:
            raise ConfigError(f"unknown lesion label {self.label!r}")
        if not blobs.is_4_connected(self.offsets):
            raise ConfigError("lesion pixels must form one 4-connected blob")

    @property
    def pixel_count(self) -> int:
        return len(self.offsets)

    def pixel_indices(self) -> tuple[np.ndarray, np.ndarray]:
        rows = np.array([self.center[0] + dr for dr, _ in self.offsets])
        cols = np.array([self.center[1] + dc for _, dc in self.offsets])
        return rows, cols


def _render_structure(spec: PhantomSpec, rng: np.random.Generator) -> np.ndarray:
    size = spec.size
    rr, cc = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.zeros((size, size))
    lo, hi = spec.intensity_range
    edge = 0.25  # soft-edge width as a fraction of the ellipse radius
    for _ in range(spec.n_ellipses):
        cy, cx = rng.uniform(0.15 * size, 0.85 * size, 2)
        a = rng.uniform(size / 16.0, size / 3.2)
        b = rng.uniform(size / 16.0, size / 3.2)
        theta = rng.uniform(0.0, np.pi)
        amp = rng.uniform(lo, hi)
        dy, dx = rr - cy, cc - cx
        u = (dx * np.cos(theta) + dy * np.sin(theta)) / a
        v = (-dx * np.sin(theta) + dy * np.cos(theta)) / b
        r = np.sqrt(u * u + v * v)
        t = np.clip((1.0 - r) / edge, 0.0, 1.0)
        img += amp * t * t * (3.0 - 2.0 * t)
    return img


def generate_phantom(spec: PhantomSpec) -> np.ndarray:
    """Deterministic phantom in [0, 1]; structure then noise, then min-max."""
    rng = np.random.default_rng(spec.seed)
    img = _render_structure(spec, rng)
    if spec.noise_sigma > 0:
        img = img + rng.normal(0.0, spec.noise_sigma, img.shape)
    return _normalize(img)


def generate_phantom_with_noise(
    spec: PhantomSpec, noise_rng: np.random.Generator
) -> np.ndarray:
    """Same structure as ``generate_phantom(spec)`` but noise from a
    caller-supplied stream; used for noise-floor calibration."""
    rng = np.random.default_rng(spec.seed)
    img = _render_structure(spec, rng)
    if spec.noise_sigma > 0:
        img = img + noise_rng.normal(0.0, spec.noise_sigma, img.shape)
    return _normalize(img)


def _normalize(img: np.ndarray) -> np.ndarray:
    lo, hi = float(img.min()), float(img.max())
    if hi == lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def random_lesion(
    rng: np.random.Generator,
    image_size: int,
    pixel_count_range: tuple[int, int] = (5, 50),
    contrast_range: tuple[float, float] = (0.2, 0.4),
    margin: int = 8,
) -> Lesion:
    """Sample a lesion that fits inside an ``image_size`` square image."""
    k_min, k_max = pixel_count_range
    n = int(rng.integers(k_min, k_max + 1))
    center = (
        int(rng.integers(margin, image_size - margin)),
        int(rng.integers(margin, image_size - margin)),
    )

    def inside(offset: tuple[int, int]) -> bool:
        r, c = center[0] + offset[0], center[1] + offset[1]
        return 0 <= r < image_size and 0 <= c < image_size

    offsets = blobs.grow_blob(rng, n, allowed=inside)
    contrast = float(rng.uniform(*contrast_range))
    if rng.random() < 0.5:
        contrast = -contrast
    label = LESION_LABELS[int(rng.integers(len(LESION_LABELS)))]
    return Lesion(center=center, contrast=contrast, label=label, offsets=offsets)


def plant_lesion(image, lesion: Lesion) -> tuple[np.ndarray, PixelBox]:
    """Apply the lesion contrast and return (image, tight bounding box)."""
    img = np.asarray(image, dtype=np.float64)
    rows, cols = lesion.pixel_indices()
    if (
        rows.min() < 0
        or cols.min() < 0
        or rows.max() >= img.shape[0]
        or cols.max() >= img.shape[1]
    ):
        raise PlacementError(
            f"lesion at {lesion.center} with {lesion.pixel_count} pixels "
            f"does not fit inside image of shape {img.shape}"
        )
    out = img.copy()
    out[rows, cols] += lesion.contrast
    box = PixelBox(
        x=int(cols.min()),
        y=int(rows.min()),
        w=int(cols.max() - cols.min() + 1),
        h=int(rows.max() - rows.min() + 1),
    )
    return out, box


@dataclass(frozen=True)
class DatasetManifest:
    """Index of a generated dataset; enough to regenerate it bit-exactly."""

    root: Path
    seed: int
    spec: PhantomSpec
    lesion_rate: float
    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]
    annotations_file: str = "annotations.jsonl"
    images_dir: str = "images"

    def image_stem(self, image_id: str) -> Path:
        return self.root / self.images_dir / image_id

    def load_image(self, image_id: str) -> np.ndarray:
        return gridio.load_fgrid(self.image_stem(image_id)).astype(np.float64)

    def ids(self, split: str) -> tuple[str, ...]:
        if split == "train":
            return self.train_ids
        if split == "val":
            return self.val_ids
        raise ConfigError(f"unknown split {split!r}")

    def to_json(self) -> str:
        payload = {
            "format": DATASET_FORMAT,
            "seed": self.seed,
            "spec": {
                "size": self.spec.size,
                "n_ellipses": self.spec.n_ellipses,
                "intensity_range": list(self.spec.intensity_range),
                "noise_sigma": self.spec.noise_sigma,
                "seed": self.spec.seed,
            },
            "lesion_rate": self.lesion_rate,
            "train": list(self.train_ids),
            "val": list(self.val_ids),
            "annotations_file": self.annotations_file,
            "images_dir": self.images_dir,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def load(cls, root) -> "DatasetManifest":
        root = Path(root)
        payload = json.loads((root / "manifest.json").read_text())
        spec = payload["spec"]
        return cls(
            root=root,
            seed=int(payload["seed"]),
            spec=PhantomSpec(
                size=int(spec["size"]),
                n_ellipses=int(spec["n_ellipses"]),
                intensity_range=tuple(spec["intensity_range"]),
                noise_sigma=float(spec["noise_sigma"]),
                seed=int(spec["seed"]),
            ),
            lesion_rate=float(payload["lesion_rate"]),
            train_ids=tuple(payload["train"]),
            val_ids=tuple(payload["val"]),
            annotations_file=payload["annotations_file"],
            images_dir=payload["images_dir"],
        )


def build_dataset(
    out_dir,
    n_train: int,
    n_val: int,
    lesion_rate: float,
    spec: PhantomSpec,
) -> DatasetManifest:
    """Generate and write a split dataset of phantoms with optional lesions.

    Images go out as FGRID pairs under ``images/``, lesion boxes as ANNOT v1
    JSON lines, and the manifest records everything needed to regenerate the
    same bytes.
    """
    if n_train < 1 or n_val < 1:
        raise ConfigError("need at least one image per split")
    if not 0.0 <= lesion_rate <= 1.0:
        raise ConfigError(f"lesion_rate must be in [0, 1], got {lesion_rate}")
    root = Path(out_dir)
    images = root / "images"
    images.mkdir(parents=True, exist_ok=True)

    split_ids: dict[str, list[str]] = {"train": [], "val": []}
    annotation_lines: list[str] = []
    for split, count in (("train", n_train), ("val", n_val)):
        for i in range(count):
            image_id = f"{split}_{i:04d}"
            phantom_seed = derive_seed(spec.seed, "phantom", split, i)
            img = generate_phantom(
                PhantomSpec(
                    size=spec.size,
                    n_ellipses=spec.n_ellipses,
                    intensity_range=spec.intensity_range,
                    noise_sigma=spec.noise_sigma,
                    seed=phantom_seed,
                )
            )
            lesion_rng = derive_rng(spec.seed, "lesion", split, i)
            if lesion_rng.random() < lesion_rate:
                lesion = random_lesion(lesion_rng, spec.size)
                img, box = plant_lesion(img, lesion)
                annotation_lines.append(
                    json.dumps(
                        {
                            "volume_id": image_id,
                            "slice": 0,
                            "label": lesion.label,
                            "x": box.x,
                            "y": box.y,
                            "w": box.w,
                            "h": box.h,
                        },
                        sort_keys=True,
                    )
                )
            gridio.save_fgrid(images / image_id, img.astype(np.float32))
            split_ids[split].append(image_id)

    (root / "annotations.jsonl").write_text(
        "".join(line + "\n" for line in annotation_lines)
    )
    manifest = DatasetManifest(
        root=root,
        seed=spec.seed,
        spec=spec,
        lesion_rate=lesion_rate,
        train_ids=tuple(split_ids["train"]),
        val_ids=tuple(split_ids["val"]),
    )
    (root / "manifest.json").write_text(manifest.to_json() + "\n")
    return manifest
