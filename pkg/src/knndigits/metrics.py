"""Distance kernels.

Both metrics work on exact integer squared distances and never take a
square root on the classification path: the root is strictly increasing,
so neighbor orderings under the squared form are identical to orderings
under the rooted Euclidean distance, and integers make results bit-exact
and cheap to compare against independent reference implementations.

The sliding variant is deliberately asymmetric: only the training image is
padded and windowed, the test image is compared as-is against each of the
nine crops and the minimum is kept. A one-pixel translation of interior
content is therefore absorbed exactly (distance 0).
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

from .dataset_ops import extract_windows, pad_image
from .errors import MissingClass
from .idx_io import IMAGE_PIXELS, NUM_CLASSES, Dataset

# 784 * 255^2: any squared distance fits comfortably in 32 bits
MAX_SQUARED_DISTANCE = IMAGE_PIXELS * 255 * 255


class MetricId(IntEnum):
    """Stable numeric codes; these bytes go into the cache-file header."""

    PLAIN_L2 = 0
    SLIDING_L2 = 1

    @property
    def cli_name(self) -> str:
        return "plain" if self is MetricId.PLAIN_L2 else "sliding"

    @classmethod
    def from_cli_name(cls, name: str) -> "MetricId":
        return {"plain": cls.PLAIN_L2, "sliding": cls.SLIDING_L2}[name]


def squared_l2(a: np.ndarray, b: np.ndarray) -> int:
    """Exact integer sum of squared pixel differences between two images.

    Subtraction happens in signed 16-bit so 0 - 255 cannot wrap around.
    """
    diff = a.astype(np.int16) - b.astype(np.int16)
    return int((diff.astype(np.int64) ** 2).sum())


def sliding_squared_l2(train_img: np.ndarray, test_img: np.ndarray) -> int:
    """Minimum squared distance over the 9 crops of the padded train image.

    Not symmetric in general: only the first argument is windowed.
    """
    windows = extract_windows(pad_image(train_img))
    diff = windows.astype(np.int16) - test_img.astype(np.int16)[None, :]
    return int((diff.astype(np.int64) ** 2).sum(axis=1).min())


def mean_distance_by_class(probe: np.ndarray, dataset: Dataset) -> np.ndarray:
    """Mean rooted Euclidean distance from a probe image to each class.

    This diagnostic is the one place the square root is applied; it exists
    for human inspection (a probe digit should sit closest to its own
    class on average), not for classification.
    """
    sq = (dataset.images.astype(np.int64) - probe.astype(np.int64)) ** 2
    dist = np.sqrt(sq.sum(axis=1).astype(np.float64))
    means = np.empty(NUM_CLASSES, dtype=np.float64)
    for c in range(NUM_CLASSES):
        members = dist[dataset.labels == c]
        if members.size == 0:
            raise MissingClass(f"dataset has no examples of class {c}")
        means[c] = members.mean()
    return means
