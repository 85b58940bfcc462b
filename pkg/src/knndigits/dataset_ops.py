"""Geometric image operations and dataset slicing.

Padding and window extraction implement the translation-tolerant metric's
building blocks: a 28x28 digit is zero-padded to 30x30 and the nine 28x28
crops of the padded square are enumerated in row-major offset order
(dr, dc) in {0,1,2}^2, so the crop at offset (1,1) is the original image.

Fold slicing is contiguous and in file order, with no shuffling, so that a
cross-validation run is exactly reproducible from the input files alone.
"""

from __future__ import annotations

import numpy as np

from .errors import FoldOutOfRange, IndivisibleFold
from .idx_io import IMAGE_PIXELS, IMAGE_SIDE, Dataset, Split

PAD_SIDE = IMAGE_SIDE + 2  # one-pixel zero ring on each side
PAD_PIXELS = PAD_SIDE * PAD_SIDE
WINDOW_OFFSETS = tuple((dr, dc) for dr in range(3) for dc in range(3))
CENTER_WINDOW = WINDOW_OFFSETS.index((1, 1))
NUM_WINDOWS = len(WINDOW_OFFSETS)

GLYPH_RAMP = " .:#@"
_BIN_WIDTH = 51  # 5 equal-width intensity bins over 0..255


def pad_image(img: np.ndarray) -> np.ndarray:
    """Zero-pad one flat 784-pixel image to a flat 900-pixel 30x30 image."""
    return pad_images(img.reshape(1, IMAGE_PIXELS))[0]


def pad_images(images: np.ndarray) -> np.ndarray:
    """Vectorized pad: (n, 784) uint8 -> (n, 900) uint8."""
    n = images.shape[0]
    padded = np.zeros((n, PAD_SIDE, PAD_SIDE), dtype=np.uint8)
    padded[:, 1:-1, 1:-1] = images.reshape(n, IMAGE_SIDE, IMAGE_SIDE)
    return padded.reshape(n, PAD_PIXELS)


def extract_windows(padded: np.ndarray) -> np.ndarray:
    """All nine 28x28 crops of one padded image, as a (9, 784) array.

    Row i corresponds to WINDOW_OFFSETS[i]; row CENTER_WINDOW is
    bit-identical to the unpadded original.
    """
    return extract_windows_batch(padded.reshape(1, PAD_PIXELS))[0]


def extract_windows_batch(padded: np.ndarray) -> np.ndarray:
    """Vectorized crop extraction: (n, 900) uint8 -> (n, 9, 784) uint8."""
    n = padded.shape[0]
    squares = padded.reshape(n, PAD_SIDE, PAD_SIDE)
    windows = np.empty((n, NUM_WINDOWS, IMAGE_PIXELS), dtype=np.uint8)
    for i, (dr, dc) in enumerate(WINDOW_OFFSETS):
        crop = squares[:, dr:dr + IMAGE_SIDE, dc:dc + IMAGE_SIDE]
        windows[:, i, :] = crop.reshape(n, IMAGE_PIXELS)
    return windows


def fold_split(dataset: Dataset, num_folds: int, fold_index: int):
    """Split into (train_part, val_part) for one cross-validation fold.

    The validation part is the contiguous slice
    [fold_index * n/num_folds, (fold_index + 1) * n/num_folds) and the
    training part is everything else in original order, so concatenating
    the validation parts over all folds reproduces the dataset exactly.
    """
    n = len(dataset)
    if num_folds < 1 or n % num_folds != 0:
        raise IndivisibleFold(f"{n} examples cannot be split into {num_folds} equal folds")
    if not 0 <= fold_index < num_folds:
        raise FoldOutOfRange(f"fold {fold_index} not in 0..{num_folds - 1}")
    size = n // num_folds
    lo, hi = fold_index * size, (fold_index + 1) * size
    val = Dataset(dataset.images[lo:hi], dataset.labels[lo:hi], Split.FOLD)
    train = Dataset(
        np.concatenate([dataset.images[:lo], dataset.images[hi:]]),
        np.concatenate([dataset.labels[:lo], dataset.labels[hi:]]),
        Split.FOLD,
    )
    return train, val


def render_ascii(img: np.ndarray) -> str:
    """Text-art rendering of one digit: 28 lines of 28 glyphs.

    Intensity maps onto the fixed ramp " .:#@" by equal-width bins of 51
    (255 joins the top bin), so e.g. pixel 128 renders as ':'.
    """
    bins = np.minimum(img // _BIN_WIDTH, len(GLYPH_RAMP) - 1)
    grid = bins.reshape(IMAGE_SIDE, IMAGE_SIDE)
    return "\n".join("".join(GLYPH_RAMP[v] for v in row) for row in grid)
