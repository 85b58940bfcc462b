"""Exact k-NN digit classification with a plain and a translation-tolerant
sliding-window squared-L2 metric, plus the statistics to compare them."""

from .classifier import (
    NeighborList, Prediction, classify_all, classify_streaming, k_nearest,
    predict_labels, vote,
)
from .crossval import CrossValTable, cross_validate, select_k, write_crossval_csv
from .dataset_ops import extract_windows, fold_split, pad_image, render_ascii
from .distance_matrix import (
    DistanceMatrix, build_matrix, build_matrix_cached, iter_matrix_blocks,
    kernel_eval_count, load_cache, save_cache,
)
from .idx_io import Dataset, Split, load_dataset, parse_idx_images, parse_idx_labels
from .metrics import (
    MetricId, mean_distance_by_class, sliding_squared_l2, squared_l2,
)
from .stats import (
    EvalReport, HypothesisResult, accuracy, binomial_std, confidence_interval,
    confusion_matrix, evaluate, two_proportion_test,
)

__version__ = "0.1.0"
