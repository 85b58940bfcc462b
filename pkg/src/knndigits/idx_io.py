"""IDX binary format parsing and dataset assembly.

The IDX container used by the canonical handwritten-digit distribution is
big-endian with this layout:

    images:  u32 magic = 0x00000803, u32 count, u32 rows, u32 cols,
             then count*rows*cols unsigned bytes, row-major
    labels:  u32 magic = 0x00000801, u32 count,
             then count unsigned bytes, each in 0..9

Files shipped gzipped (first two bytes 0x1f 0x8b) are decompressed
transparently; everything else is treated as a raw IDX stream. Parsers are
pure functions of their input bytes: any input either parses completely or
raises exactly one of the errors declared in `errors`.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import BadLabel, BadMagic, BadShape, CountMismatch, TruncatedFile

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
IMAGE_SIDE = 28
IMAGE_PIXELS = IMAGE_SIDE * IMAGE_SIDE  # flat 784-byte pixel vector
NUM_CLASSES = 10


class Split(Enum):
    """Provenance tag for a dataset."""

    TRAIN = "train"
    TEST = "test"
    FOLD = "fold-derived"


@dataclass(frozen=True)
class Dataset:
    """Paired image/label collection.

    images: (n, 784) uint8, one row per digit, row-major 28x28 pixels
    labels: (n,) uint8 class ids in 0..9
    """

    images: np.ndarray
    labels: np.ndarray
    split: Split

    def __post_init__(self):
        if self.images.ndim != 2 or self.images.shape[1] != IMAGE_PIXELS:
            raise BadShape(f"images must be (n, {IMAGE_PIXELS}), got {self.images.shape}")
        if self.images.dtype != np.uint8 or self.labels.dtype != np.uint8:
            raise BadShape("images and labels must be uint8")
        if self.labels.ndim != 1 or len(self.images) != len(self.labels):
            raise CountMismatch(
                f"{len(self.images)} images vs {len(self.labels)} labels"
            )
        if self.labels.size and int(self.labels.max()) > 9:
            raise BadLabel(f"label {int(self.labels.max())} outside 0..9")

    def __len__(self) -> int:
        return len(self.labels)

    def take(self, n: int) -> "Dataset":
        """First n examples in file order (reproducible subsetting)."""
        if n >= len(self):
            return self
        return Dataset(self.images[:n], self.labels[:n], self.split)


def _maybe_gunzip(data: bytes) -> bytes:
    if data[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(data)
        except (OSError, EOFError) as exc:
            raise TruncatedFile(f"bad gzip stream: {exc}") from exc
    return data


def parse_idx_images(data: bytes) -> np.ndarray:
    """Parse an IDX image file into a (n, 784) uint8 array."""
    data = _maybe_gunzip(data)
    if len(data) < 4:
        raise TruncatedFile(f"{len(data)} bytes is too short for an IDX header")
    magic = int.from_bytes(data[:4], "big")
    if magic != IMAGE_MAGIC:
        raise BadMagic(f"expected image magic 0x{IMAGE_MAGIC:08x}, got 0x{magic:08x}")
    if len(data) < 16:
        raise TruncatedFile("image header needs 16 bytes (magic + 3 dims)")
    count, rows, cols = struct.unpack(">III", data[4:16])
    if rows != IMAGE_SIDE or cols != IMAGE_SIDE:
        raise BadShape(f"expected 28x28 images, file declares {rows}x{cols}")
    expected = 16 + count * IMAGE_PIXELS
    if len(data) != expected:
        raise TruncatedFile(
            f"file is {len(data)} bytes, header declares {expected}"
        )
    return np.frombuffer(data, np.uint8, offset=16).reshape(count, IMAGE_PIXELS)


def parse_idx_labels(data: bytes) -> np.ndarray:
    """Parse an IDX label file into a (n,) uint8 array of class ids."""
    data = _maybe_gunzip(data)
    if len(data) < 4:
        raise TruncatedFile(f"{len(data)} bytes is too short for an IDX header")
    magic = int.from_bytes(data[:4], "big")
    if magic != LABEL_MAGIC:
        raise BadMagic(f"expected label magic 0x{LABEL_MAGIC:08x}, got 0x{magic:08x}")
    if len(data) < 8:
        raise TruncatedFile("label header needs 8 bytes (magic + 1 dim)")
    (count,) = struct.unpack(">I", data[4:8])
    expected = 8 + count
    if len(data) != expected:
        raise TruncatedFile(
            f"file is {len(data)} bytes, header declares {expected}"
        )
    labels = np.frombuffer(data, np.uint8, offset=8)
    if labels.size and int(labels.max()) > 9:
        bad = int(labels[labels > 9][0])
        raise BadLabel(f"label byte {bad} outside 0..9")
    return labels


def load_dataset(image_path, label_path, split: Split) -> Dataset:
    """Load and pair an image file and a label file.

    Both may be raw IDX or gzipped IDX; pairing requires equal counts.
    """
    images = parse_idx_images(Path(image_path).read_bytes())
    labels = parse_idx_labels(Path(label_path).read_bytes())
    if len(images) != len(labels):
        raise CountMismatch(
            f"{image_path} has {len(images)} images but "
            f"{label_path} has {len(labels)} labels"
        )
    return Dataset(images, labels, split)
