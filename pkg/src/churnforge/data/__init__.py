from churnforge.data.schema import AGGREGATION_RULES, FeatureSchema, FeatureSpec, default_schema
from churnforge.data.ingest import TransactionRecord, ingest_transactions, write_transactions
from churnforge.data.level01 import (
    DailyFeatureRow,
    aggregate_level01,
    date_to_day,
    day_to_date,
    read_level01_csv,
    write_level01_csv,
)
from churnforge.data.windows import (
    HORIZON_WEEKS,
    TAU,
    WindowSample,
    aggregate_level02,
    build_windows,
    labels_matrix,
    level02_matrix,
)
from churnforge.data.split import (
    DatasetSplit,
    NormStats,
    apply_normalization,
    fit_norm_stats,
    normalize_features,
    split_dataset,
)
from churnforge.data.dataset_io import read_window_dataset, write_window_dataset

__all__ = [
    "AGGREGATION_RULES", "FeatureSchema", "FeatureSpec", "default_schema",
    "TransactionRecord", "ingest_transactions", "write_transactions",
    "DailyFeatureRow", "aggregate_level01", "date_to_day", "day_to_date",
    "read_level01_csv", "write_level01_csv",
    "HORIZON_WEEKS", "TAU", "WindowSample", "aggregate_level02",
    "build_windows", "labels_matrix", "level02_matrix",
    "DatasetSplit", "NormStats", "apply_normalization", "fit_norm_stats",
    "normalize_features", "split_dataset",
    "read_window_dataset", "write_window_dataset",
]
