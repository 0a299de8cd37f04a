"""Grayscale volumes and aligned label volumes, with raw on-disk storage.

Centralizes all file format handling so that other modules never touch
raw bytes directly.

On-disk layout (all little-endian, x-fastest, then y, then z):

    <name>.vol.json   header {"width", "height", "depth", "spacing", "dtype"}
    <name>.vol.raw    int16 voxel blob, exactly 2*width*height*depth bytes
    <name>.lab.json   same header schema plus "class_names"
    <name>.lab.raw    uint8 label blob, one class id per voxel (0 = unlabeled)

Intensity normalization for model input also lives here so every consumer
sees identical floats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BadClassId,
    BadHeader,
    DimensionMismatch,
    MissingFile,
    SliceOutOfRange,
)

DEFAULT_CLASS_NAMES = (
    "normal parenchyma",
    "reticular pattern",
    "non-pulmonary tissue",
)

# Fixed affine mapping of the stored int16 range onto [0, 1].
INTENSITY_LOW = -1024.0
INTENSITY_HIGH = 3071.0

VOLUME_DTYPE = np.dtype("<i2")
LABEL_DTYPE = np.dtype("u1")


@dataclass(frozen=True)
class Volume:
    """A 3D grayscale scan. Voxels are immutable after construction."""

    voxels: np.ndarray  # int16, shape (depth, height, width)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    volume_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.voxels, dtype=np.int16)
        if v.ndim != 3 or min(v.shape) < 1:
            raise DimensionMismatch(f"expected 3-D voxel array, got shape {v.shape}")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise BadHeader(f"spacing must be three positive reals, got {self.spacing}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "voxels", v)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def depth(self) -> int:
        return self.voxels.shape[0]

    @property
    def height(self) -> int:
        return self.voxels.shape[1]

    @property
    def width(self) -> int:
        return self.voxels.shape[2]

    @property
    def dims(self) -> tuple[int, int, int]:
        """(width, height, depth)"""
        return (self.width, self.height, self.depth)


@dataclass
class LabelMap:
    """Per-voxel class ids aligned with a Volume.

    0 means unlabeled; values 1..C map to ``class_names``.
    """

    labels: np.ndarray  # uint8, shape (depth, height, width)
    class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.uint8)
        if lab.ndim != 3 or min(lab.shape) < 1:
            raise DimensionMismatch(f"expected 3-D label array, got shape {lab.shape}")
        self.labels = lab
        self.class_names = tuple(self.class_names)
        bad = int(lab.max(initial=0))
        if bad > self.num_classes:
            raise BadClassId(f"label value {bad} exceeds class count {self.num_classes}")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def depth(self) -> int:
        return self.labels.shape[0]

    @property
    def height(self) -> int:
        return self.labels.shape[1]

    @property
    def width(self) -> int:
        return self.labels.shape[2]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.width, self.height, self.depth)

    def copy(self) -> "LabelMap":
        return LabelMap(self.labels.copy(), self.class_names)


@dataclass(frozen=True)
class SliceView:
    """Snapshot of one axial plane; mutating it never touches the source."""

    volume_id: str
    index: int
    pixels: np.ndarray  # (height, width)


def empty_label_map(volume: Volume, class_names: Sequence[str] = DEFAULT_CLASS_NAMES) -> LabelMap:
    """All-unlabeled LabelMap dimensioned to match ``volume``."""
    return LabelMap(
        np.zeros(volume.voxels.shape, dtype=np.uint8),
        tuple(class_names),
    )


def check_paired(volume: Volume, label_map: LabelMap) -> None:
    """Raise DimensionMismatch unless the pair shares extents."""
    if volume.voxels.shape != label_map.labels.shape:
        raise DimensionMismatch(
            f"volume {volume.voxels.shape} vs labels {label_map.labels.shape}"
        )


def normalize_intensity(values: np.ndarray, dtype=np.float64) -> np.ndarray:
    """Map stored intensities onto [0, 1] by the fixed affine transform.

    Values outside [INTENSITY_LOW, INTENSITY_HIGH] are clipped so the
    result always stays inside the unit interval.
    """
    x = np.asarray(values, dtype=dtype)
    x = (x - INTENSITY_LOW) / (INTENSITY_HIGH - INTENSITY_LOW)
    return np.clip(x, 0.0, 1.0)


def _base_path(path, kind: str) -> Path:
    p = Path(path)
    name = p.name
    for suffix in (f".{kind}.json", f".{kind}.raw"):
        if name.endswith(suffix):
            return p.with_name(name[: -len(suffix)])
    return p


def _read_header(json_path: Path, expected_dtype: str) -> dict:
    if not json_path.exists():
        raise MissingFile(str(json_path))
    try:
        header = json.loads(json_path.read_text())
    except (ValueError, OSError) as exc:
        raise BadHeader(f"{json_path}: {exc}") from exc
    for key in ("width", "height", "depth", "dtype"):
        if key not in header:
            raise BadHeader(f"{json_path}: missing field {key!r}")
    w, h, d = header["width"], header["height"], header["depth"]
    if not all(isinstance(n, int) and n >= 1 for n in (w, h, d)):
        raise BadHeader(f"{json_path}: extents must be integers >= 1")
    if header["dtype"] != expected_dtype:
        raise BadHeader(f"{json_path}: dtype {header['dtype']!r}, expected {expected_dtype!r}")
    return header


def save_volume(volume: Volume, path) -> None:
    base = _base_path(path, "vol")
    header = {
        "width": volume.width,
        "height": volume.height,
        "depth": volume.depth,
        "spacing": list(volume.spacing),
        "dtype": "int16",
    }
    base.with_name(base.name + ".vol.json").write_text(json.dumps(header, indent=2) + "\n")
    blob = volume.voxels.astype(VOLUME_DTYPE, copy=False)
    base.with_name(base.name + ".vol.raw").write_bytes(blob.tobytes(order="C"))


def load_volume(path) -> Volume:
    base = _base_path(path, "vol")
    header = _read_header(base.with_name(base.name + ".vol.json"), "int16")
    raw_path = base.with_name(base.name + ".vol.raw")
    if not raw_path.exists():
        raise MissingFile(str(raw_path))
    raw = raw_path.read_bytes()
    w, h, d = header["width"], header["height"], header["depth"]
    expected = 2 * w * h * d
    if len(raw) != expected:
        raise DimensionMismatch(f"{raw_path}: {len(raw)} bytes, expected {expected}")
    voxels = np.frombuffer(raw, dtype=VOLUME_DTYPE).reshape(d, h, w)
    spacing = tuple(header.get("spacing", (1.0, 1.0, 1.0)))
    return Volume(voxels, spacing=spacing, volume_id=base.name)


def save_label_map(label_map: LabelMap, path) -> None:
    base = _base_path(path, "lab")
    header = {
        "width": label_map.width,
        "height": label_map.height,
        "depth": label_map.depth,
        "dtype": "uint8",
        "class_names": list(label_map.class_names),
    }
    base.with_name(base.name + ".lab.json").write_text(json.dumps(header, indent=2) + "\n")
    base.with_name(base.name + ".lab.raw").write_bytes(
        label_map.labels.astype(LABEL_DTYPE, copy=False).tobytes(order="C")
    )


def load_label_map(path) -> LabelMap:
    base = _base_path(path, "lab")
    header = _read_header(base.with_name(base.name + ".lab.json"), "uint8")
    raw_path = base.with_name(base.name + ".lab.raw")
    if not raw_path.exists():
        raise MissingFile(str(raw_path))
    raw = raw_path.read_bytes()
    w, h, d = header["width"], header["height"], header["depth"]
    if len(raw) != w * h * d:
        raise DimensionMismatch(f"{raw_path}: {len(raw)} bytes, expected {w * h * d}")
    labels = np.frombuffer(raw, dtype=LABEL_DTYPE).reshape(d, h, w).copy()
    class_names = tuple(header.get("class_names", DEFAULT_CLASS_NAMES))
    worst = int(labels.max(initial=0))
    if worst > len(class_names):
        raise BadClassId(f"{raw_path}: label value {worst} with only {len(class_names)} classes")
    return LabelMap(labels, class_names)


def get_slice(volume: Volume, k: int) -> SliceView:
    """The k-th width x height plane, copied out of the volume."""
    if not 0 <= k < volume.depth:
        raise SliceOutOfRange(f"slice {k} outside [0, {volume.depth})")
    return SliceView(volume.volume_id, k, volume.voxels[k].copy())
