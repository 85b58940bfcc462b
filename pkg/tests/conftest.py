"""Shared fixtures: synthetic IDX files, cluster datasets, and discovery of
the canonical digit files for the data-dependent tests.

The canonical dataset is looked up under $KNN_MNIST_DIR (default: ./data),
accepting both raw and gzipped file names. Tests that need it skip with a
pointer to scripts/fetch_mnist.sh when it is absent, so the suite stays
green on machines without the data while still exercising everything that
does not depend on it.
"""

import os
import struct
from pathlib import Path

import numpy as np
import pytest

from knndigits.idx_io import Dataset, Split

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

CANONICAL_NAMES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def make_idx_images(images: np.ndarray, rows: int = 28, cols: int = 28) -> bytes:
    """Serialize (n, rows*cols) uint8 images into IDX byte layout."""
    header = struct.pack(">IIII", IMAGE_MAGIC, images.shape[0], rows, cols)
    return header + np.ascontiguousarray(images, dtype=np.uint8).tobytes()


def make_idx_labels(labels) -> bytes:
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    return struct.pack(">II", LABEL_MAGIC, labels.shape[0]) + labels.tobytes()


def cluster_images(rng: np.random.Generator, per_class: int, noise: int = 6):
    """Ten tight, well-separated clusters of 784-pixel images.

    Random prototypes sit far apart in squared-L2, so any small k
    classifies members perfectly; handy as a fully separable toy set.
    Classes are interleaved (0..9, 0..9, ...) so that contiguous fold
    slices of any multiple of 10 still contain every class.
    """
    prototypes = rng.integers(0, 256, size=(10, 784))
    labels = np.tile(np.arange(10, dtype=np.uint8), per_class)
    wobble = rng.integers(-noise, noise + 1, size=(labels.size, 784))
    images = np.clip(prototypes[labels] + wobble, 0, 255).astype(np.uint8)
    return images, labels


def cluster_dataset(seed: int, per_class: int, split=Split.TRAIN) -> Dataset:
    images, labels = cluster_images(np.random.default_rng(seed), per_class)
    return Dataset(images, labels, split)


def write_idx_pair(directory: Path, stem: str, images, labels):
    img_path = directory / f"{stem}-images-idx3-ubyte"
    lbl_path = directory / f"{stem}-labels-idx1-ubyte"
    img_path.write_bytes(make_idx_images(images))
    lbl_path.write_bytes(make_idx_labels(labels))
    return img_path, lbl_path


@pytest.fixture(scope="session")
def idx_dir(tmp_path_factory):
    """Directory with small synthetic train/test IDX pairs for CLI runs."""
    directory = tmp_path_factory.mktemp("idx")
    rng = np.random.default_rng(1234)
    train_images, train_labels = cluster_images(rng, per_class=8)
    test_images, test_labels = cluster_images(np.random.default_rng(1234), per_class=2)
    write_idx_pair(directory, "train", train_images, train_labels)
    write_idx_pair(directory, "test", test_images, test_labels)
    return directory


def dataset_args(directory: Path, need_test: bool = True) -> list:
    args = [
        "--train-images", str(directory / "train-images-idx3-ubyte"),
        "--train-labels", str(directory / "train-labels-idx1-ubyte"),
    ]
    if need_test:
        args += [
            "--test-images", str(directory / "test-images-idx3-ubyte"),
            "--test-labels", str(directory / "test-labels-idx1-ubyte"),
        ]
    return args


def find_canonical() -> dict | None:
    """Locate the canonical digit files, raw or gzipped, or return None."""
    root = Path(os.environ.get("KNN_MNIST_DIR", "data"))
    found = {}
    for key, name in CANONICAL_NAMES.items():
        for candidate in (root / name, root / f"{name}.gz"):
            if candidate.exists():
                found[key] = candidate
                break
        else:
            return None
    return found


requires_canonical = pytest.mark.skipif(
    find_canonical() is None,
    reason="canonical digit files not found; set KNN_MNIST_DIR or run scripts/fetch_mnist.sh",
)


@pytest.fixture(scope="session")
def canonical_paths():
    paths = find_canonical()
    if paths is None:
        pytest.skip("canonical digit files not found; run scripts/fetch_mnist.sh")
    return paths
