"""Shared fixtures: one small generated corpus reused across test modules.

The corpus is deliberately tiny (150 users, 75 days) so the full pipeline
runs in about a second; tests that need scale build their own data.
"""

import os
from types import SimpleNamespace

import pytest

from churnforge.data import (
    aggregate_level01,
    build_windows,
    default_schema,
    ingest_transactions,
    split_dataset,
)
from churnforge.synth import default_config, generate


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Generated transactions plus every derived pipeline stage."""
    root = tmp_path_factory.mktemp("corpus")
    txn_path = os.path.join(root, "transactions.csv")
    gt_path = os.path.join(root, "ground_truth.csv")
    config = default_config(n_users=150, seed=11)
    generate(config, txn_path, gt_path)

    schema = default_schema()
    records, n_malformed = ingest_transactions(txn_path, schema)
    rows = aggregate_level01(records, schema)
    samples, n_skipped = build_windows(rows)
    split = split_dataset(samples, seed=11)
    return SimpleNamespace(
        root=root,
        txn_path=txn_path,
        gt_path=gt_path,
        config=config,
        schema=schema,
        records=records,
        n_malformed=n_malformed,
        rows=rows,
        samples=samples,
        n_skipped=n_skipped,
        split=split,
    )
