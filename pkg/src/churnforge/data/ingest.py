"""Transaction CSV ingestion and emission.

File format: header ``txn_id,user_id,ts,<raw field names>``, one transaction
per row; ts is integer epoch seconds UTC, decimals use ``.``. Malformed rows
are skipped and counted; ingestion aborts when they exceed a fraction of the
file (default 1%).
"""

import csv
from dataclasses import dataclass

import numpy as np

from churnforge.errors import DataError, SchemaError


@dataclass
class TransactionRecord:
    txn_id: int
    user_id: int
    ts: int
    values: np.ndarray  # raw field values, schema order

    @property
    def day(self):
        return self.ts // 86400


def ingest_transactions(path, schema, max_malformed_frac=0.01):
    """Parses a transactions CSV. Returns (records, n_malformed).

    Row order is preserved. A row is malformed if its column count is wrong,
    its ids/timestamp fail integer parsing (ids must also be non-negative),
    a value fails decimal parsing or is non-finite, or its txn_id repeats.
    """
    expected = schema.header()
    nf = len(schema.raw_fields)
    records = []
    seen_ids = set()
    n_malformed = 0
    n_rows = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise SchemaError(
                f"{path}: header {header} does not match schema {expected}"
            )
        for row in reader:
            n_rows += 1
            try:
                if len(row) != 3 + nf:
                    raise ValueError("column count")
                txn_id, user_id, ts = int(row[0]), int(row[1]), int(row[2])
                if txn_id < 0 or user_id < 0 or txn_id in seen_ids:
                    raise ValueError("bad id")
                values = np.array([float(v) for v in row[3:]])
                if not np.isfinite(values).all():
                    raise ValueError("non-finite value")
            except ValueError:
                n_malformed += 1
                continue
            seen_ids.add(txn_id)
            records.append(TransactionRecord(txn_id, user_id, ts, values))
    if n_rows and n_malformed / n_rows > max_malformed_frac:
        raise DataError(
            f"{path}: {n_malformed} of {n_rows} rows malformed, "
            f"above the {max_malformed_frac:.0%} threshold"
        )
    return records, n_malformed


def write_transactions(path, records, schema):
    """Writes records in order using the schema's header."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema.header())
        for rec in records:
            writer.writerow(
                [rec.txn_id, rec.user_id, rec.ts, *[repr(float(v)) for v in rec.values]]
            )
