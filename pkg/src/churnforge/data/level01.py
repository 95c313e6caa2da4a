"""Level-01 aggregation: transactions -> one feature row per active (user, day).

Workers partition users by hash; each partition is aggregated independently
and the merge re-sorts by (user_id, day), so output is identical for any
worker count.
"""

import csv
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from churnforge.errors import DataError, SchemaError

_EPOCH = date(1970, 1, 1)


def day_to_date(day):
    return _EPOCH + timedelta(days=int(day))


def date_to_day(text):
    return (date.fromisoformat(text) - _EPOCH).days


@dataclass
class DailyFeatureRow:
    user_id: int
    day: int  # days since epoch, UTC
    features: np.ndarray
    n_txn: int


def _aggregate_partition(user, day, values, schema):
    """Aggregates pre-sorted arrays; returns per-group arrays."""
    # group boundaries over rows sorted by (user, day, ts)
    new_group = np.r_[True, (np.diff(user) != 0) | (np.diff(day) != 0)]
    starts = np.flatnonzero(new_group)
    counts = np.diff(np.r_[starts, user.size])
    ends = starts + counts

    n_groups = starts.size
    feats = np.zeros((n_groups, schema.n_features))
    for j, spec in enumerate(schema.features):
        col = values[:, schema.raw_index(spec.source)]
        if spec.rule == "sum":
            feats[:, j] = np.add.reduceat(col, starts)
        elif spec.rule == "count":
            feats[:, j] = np.add.reduceat((col != 0).astype(np.float64), starts)
        elif spec.rule == "mean":
            feats[:, j] = np.add.reduceat(col, starts) / counts
        elif spec.rule == "max":
            feats[:, j] = np.maximum.reduceat(col, starts)
        elif spec.rule == "last":
            feats[:, j] = col[ends - 1]
        else:  # distinct_count
            for g in range(n_groups):
                seg = col[starts[g] : ends[g]]
                feats[:, j][g] = np.unique(seg[seg != 0]).size
    return user[starts], day[starts], feats, counts


def aggregate_level01(records, schema, workers=1):
    """Returns DailyFeatureRows sorted by (user_id, day)."""
    if workers < 1:
        raise DataError(f"workers must be >= 1, got {workers}")
    if not records:
        return []
    user = np.array([r.user_id for r in records], dtype=np.int64)
    ts = np.array([r.ts for r in records], dtype=np.int64)
    day = ts // 86400
    values = np.stack([r.values for r in records])
    if values.shape[1] != len(schema.raw_fields):
        raise SchemaError(
            f"records carry {values.shape[1]} raw fields, schema has "
            f"{len(schema.raw_fields)}"
        )

    parts = []
    for w in range(workers):
        mask = (user % workers) == w
        if not mask.any():
            continue
        # stable sort by (user, ts); equal timestamps keep file order, so
        # the ``last`` rule sees the final transaction of the day
        order = np.lexsort((ts[mask], user[mask]))
        parts.append(
            _aggregate_partition(
                user[mask][order], day[mask][order], values[mask][order], schema
            )
        )

    g_user = np.concatenate([p[0] for p in parts])
    g_day = np.concatenate([p[1] for p in parts])
    g_feat = np.concatenate([p[2] for p in parts])
    g_n = np.concatenate([p[3] for p in parts])
    order = np.lexsort((g_day, g_user))
    return [
        DailyFeatureRow(int(g_user[i]), int(g_day[i]), g_feat[i], int(g_n[i]))
        for i in order
    ]


def write_level01_csv(path, rows, schema):
    """CSV ``user_id,date,<f1..fN>,n_txn`` with ISO dates."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user_id", "date", *schema.feature_names, "n_txn"])
        for row in rows:
            writer.writerow(
                [
                    row.user_id,
                    day_to_date(row.day).isoformat(),
                    *[repr(float(v)) for v in row.features],
                    row.n_txn,
                ]
            )


def read_level01_csv(path, schema):
    expected = ["user_id", "date", *schema.feature_names, "n_txn"]
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise SchemaError(f"{path}: header {header} != expected {expected}")
        for rec in reader:
            if len(rec) != len(expected):
                raise DataError(f"{path}: row has {len(rec)} columns")
            rows.append(
                DailyFeatureRow(
                    int(rec[0]),
                    date_to_day(rec[1]),
                    np.array([float(v) for v in rec[2:-1]]),
                    int(rec[-1]),
                )
            )
    return rows
