"""Exception types shared across the package.

Every error raised on purpose by this package derives from KnnError, so
callers can catch one base class. The CLI maps these onto exit codes;
nothing here is ever swallowed silently.
"""


class KnnError(Exception):
    """Base class for all errors raised by knndigits."""


# --- binary file problems (IDX inputs and distance caches) ---

class BadMagic(KnnError):
    """File does not start with the expected magic value."""


class TruncatedFile(KnnError):
    """Declared byte length does not match the actual byte length."""


class BadShape(KnnError):
    """Image dimensions are not the expected 28x28."""


class BadLabel(KnnError):
    """A class label is outside 0..9."""


class CountMismatch(KnnError):
    """Image file and label file disagree on the number of examples."""


class MetricMismatch(KnnError):
    """A cached distance matrix was built under a different metric."""


# --- argument / configuration problems ---

class BadK(KnnError):
    """k is outside 1..n_train."""


class IndivisibleFold(KnnError):
    """Dataset size is not divisible by the requested fold count."""


class FoldOutOfRange(KnnError):
    """Fold index is >= the fold count."""


class LengthMismatch(KnnError):
    """Two paired sequences have different lengths."""


class EmptyInput(KnnError):
    """An operation that needs at least one element got none."""


class BadProportion(KnnError):
    """A proportion argument is outside [0, 1]."""


class MissingClass(KnnError):
    """A per-class statistic was requested but some class has no members."""


class IndexOutOfRange(KnnError):
    """A dataset index is outside the dataset."""
