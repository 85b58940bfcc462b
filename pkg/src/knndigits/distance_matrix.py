"""Dense test-by-train distance matrix construction, streaming and caching.

Row i of a matrix holds the distances from test image i to every training
image, so a full run at canonical scale is a 10,000 x 60,000 table of
uint32 squared distances (~2.4 GB). Three ways to consume it:

  * build_matrix        -- one contiguous array, simplest
  * iter_matrix_blocks  -- ordered blocks of rows, bounded memory
  * build_matrix_cached -- persistent cache file, reload is bit-identical

The arithmetic trick: sum((x-y)^2) = x.x + y.y - 2*x.y, evaluated in
float64 via BLAS. Every intermediate value is an integer no larger than
2 * 784 * 255^2 < 2^53, so each float64 operation is exact regardless of
summation order, FMA, or thread scheduling; results are therefore
bit-identical for any worker count and equal to a naive integer loop.

The sliding metric materializes each training image's 9 windows once per
build (memory-for-throughput) and reduces with an elementwise minimum.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset_ops import NUM_WINDOWS, extract_windows_batch, pad_images
from .errors import BadMagic, MetricMismatch, TruncatedFile
from .idx_io import Dataset
from .metrics import MetricId

CACHE_MAGIC = b"KNNDMAT1"
_CACHE_HEADER = struct.Struct("<8sBII")  # magic, metric_id, n_test, n_train

# rows per block: ~32 MB of uint32 output per block at full train width
_BLOCK_CELLS = 8_000_000
# training images converted to float64 per sliding-metric slab
_TRAIN_CHUNK = 2048

# cells evaluated by kernels since import; cache hits must not move this
_kernel_evals = 0


def kernel_eval_count() -> int:
    return _kernel_evals


@dataclass(frozen=True)
class DistanceMatrix:
    """Immutable result matrix; values[i, j] = d(test i, train j)."""

    metric: MetricId
    values: np.ndarray  # (n_test, n_train) uint32, row-major

    @property
    def n_test(self) -> int:
        return self.values.shape[0]

    @property
    def n_train(self) -> int:
        return self.values.shape[1]


def _sum_of_squares(images: np.ndarray) -> np.ndarray:
    """Row-wise sum of squared pixel values, in bounded memory."""
    out = np.empty(images.shape[0], dtype=np.float64)
    step = 16384
    for lo in range(0, images.shape[0], step):
        chunk = images[lo:lo + step].astype(np.int64)
        out[lo:lo + step] = (chunk * chunk).sum(axis=1)
    return out


class _PlainKernel:
    def __init__(self, train_images: np.ndarray):
        self.train_f64 = train_images.astype(np.float64)
        self.sq_train = _sum_of_squares(train_images)

    def __call__(self, test_block: np.ndarray) -> np.ndarray:
        t = test_block.astype(np.float64)
        sq_test = _sum_of_squares(test_block)
        d = sq_test[:, None] + self.sq_train[None, :] - 2.0 * (t @ self.train_f64.T)
        return d.astype(np.uint32)


class _SlidingKernel:
    def __init__(self, train_images: np.ndarray):
        windows = extract_windows_batch(pad_images(train_images))
        self.n_train = train_images.shape[0]
        self.windows = windows.reshape(self.n_train * NUM_WINDOWS, -1)
        self.sq_win = _sum_of_squares(self.windows)

    def __call__(self, test_block: np.ndarray) -> np.ndarray:
        b = test_block.shape[0]
        t = test_block.astype(np.float64)
        sq_test = _sum_of_squares(test_block)
        out = np.empty((b, self.n_train), dtype=np.uint32)
        for lo in range(0, self.n_train, _TRAIN_CHUNK):
            hi = min(lo + _TRAIN_CHUNK, self.n_train)
            w = self.windows[lo * NUM_WINDOWS:hi * NUM_WINDOWS].astype(np.float64)
            d = sq_test[:, None] + self.sq_win[lo * NUM_WINDOWS:hi * NUM_WINDOWS][None, :]
            d -= 2.0 * (t @ w.T)
            out[:, lo:hi] = d.reshape(b, hi - lo, NUM_WINDOWS).min(axis=2).astype(np.uint32)
        return out


def _make_kernel(train: Dataset, metric: MetricId):
    if metric is MetricId.SLIDING_L2:
        return _SlidingKernel(train.images)
    return _PlainKernel(train.images)


def _block_starts(n_test: int, n_train: int, block_rows=None):
    if block_rows is None:
        block_rows = max(1, _BLOCK_CELLS // max(1, n_train))
    return [(lo, min(lo + block_rows, n_test)) for lo in range(0, n_test, block_rows)]


def iter_matrix_blocks(train: Dataset, test: Dataset, metric: MetricId,
                       workers: int = 1, block_rows=None, progress=None):
    """Yield (row_start, block_values) in row order.

    Blocks are computed by up to `workers` threads but always yielded in
    ascending row order, with a bounded number in flight, so streaming
    consumers see a deterministic sequence and memory stays flat. The
    optional `progress` callback gets (rows_done, rows_total) after each
    block; passing None costs nothing.
    """
    global _kernel_evals
    kernel = _make_kernel(train, metric)
    spans = _block_starts(len(test), len(train), block_rows)
    total = len(test)

    def run(span):
        lo, hi = span
        return lo, kernel(test.images[lo:hi])

    if workers <= 1:
        results = map(run, spans)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        results = _in_order(pool, run, spans, in_flight=workers * 2)

    done = 0
    for lo, block in results:
        _kernel_evals += block.shape[0] * block.shape[1]
        done += block.shape[0]
        if progress is not None:
            progress(done, total)
        yield lo, block


def _in_order(pool, fn, items, in_flight):
    """Map fn over items on a pool, yielding results in submission order."""
    from collections import deque

    it = iter(items)
    pending = deque()
    try:
        for item in it:
            pending.append(pool.submit(fn, item))
            if len(pending) >= in_flight:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()
    finally:
        pool.shutdown(wait=False, cancel_futures=True)


def build_matrix(train: Dataset, test: Dataset, metric: MetricId,
                 workers: int = 1, progress=None) -> DistanceMatrix:
    """Compute the full matrix in one contiguous uint32 allocation."""
    values = np.empty((len(test), len(train)), dtype=np.uint32)
    for lo, block in iter_matrix_blocks(train, test, metric, workers, progress=progress):
        values[lo:lo + block.shape[0]] = block
    values.flags.writeable = False
    return DistanceMatrix(metric, values)


def save_cache(matrix: DistanceMatrix, path) -> None:
    """Persist a matrix; two saves of the same matrix are byte-identical.

    Layout (little-endian, in contrast to the big-endian IDX inputs):
    8-byte magic "KNNDMAT1", u8 metric id, u32 n_test, u32 n_train, then
    n_test * n_train u32 squared distances, row-major.
    """
    header = _CACHE_HEADER.pack(
        CACHE_MAGIC, int(matrix.metric), matrix.n_test, matrix.n_train
    )
    payload = np.ascontiguousarray(matrix.values, dtype="<u4")
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload.tobytes())


def load_cache(path, expect_metric: MetricId | None = None) -> DistanceMatrix:
    """Reload a cached matrix, bit-identical to the one saved."""
    data = Path(path).read_bytes()
    if len(data) < _CACHE_HEADER.size:
        raise TruncatedFile(f"cache file is only {len(data)} bytes")
    magic, metric_byte, n_test, n_train = _CACHE_HEADER.unpack_from(data)
    if magic != CACHE_MAGIC:
        raise BadMagic(f"expected cache magic {CACHE_MAGIC!r}, got {magic!r}")
    try:
        metric = MetricId(metric_byte)
    except ValueError:
        raise BadMagic(f"unknown metric id byte {metric_byte} in cache header")
    if expect_metric is not None and metric is not expect_metric:
        raise MetricMismatch(
            f"cache was built with metric {metric.cli_name}, "
            f"caller requested {expect_metric.cli_name}"
        )
    expected = _CACHE_HEADER.size + n_test * n_train * 4
    if len(data) != expected:
        raise TruncatedFile(f"cache file is {len(data)} bytes, header declares {expected}")
    values = np.frombuffer(data, dtype="<u4", offset=_CACHE_HEADER.size)
    return DistanceMatrix(metric, values.reshape(n_test, n_train))


def build_matrix_cached(train: Dataset, test: Dataset, metric: MetricId,
                        cache_path, workers: int = 1, progress=None) -> DistanceMatrix:
    """Load the matrix from cache_path if valid, else build and save it.

    A cache built under a different metric raises MetricMismatch rather
    than silently rebuilding; a cache whose shape does not match the
    datasets is treated as absent and overwritten.
    """
    cache_path = Path(cache_path)
    if cache_path.exists():
        cached = load_cache(cache_path, expect_metric=metric)
        if cached.n_test == len(test) and cached.n_train == len(train):
            return cached
    matrix = build_matrix(train, test, metric, workers, progress=progress)
    cache_path.parent.mkdir(parents=True, exist_ok=True)
    save_cache(matrix, cache_path)
    return matrix
