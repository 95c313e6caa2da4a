"""Ingestion feature schema.

A FeatureSchema names the raw transaction fields (the CSV columns after
txn_id, user_id, ts) and describes how each daily feature is aggregated
from one of them. All pipeline logic is schema-driven; the default schema
below just supplies plausible fantasy-sports names.
"""

import json
from dataclasses import dataclass, field

from churnforge.errors import SchemaError

AGGREGATION_RULES = ("sum", "count", "mean", "max", "last", "distinct_count")


@dataclass(frozen=True)
class FeatureSpec:
    """One daily feature: ``rule`` applied to raw field ``source``.

    count counts transactions with a nonzero source value; distinct_count
    counts distinct nonzero values; last takes the value in the day's final
    transaction (timestamp order, file order breaking ties).
    """

    name: str
    rule: str
    source: str
    units: str = ""


@dataclass(frozen=True)
class FeatureSchema:
    raw_fields: tuple
    features: tuple

    def __post_init__(self):
        object.__setattr__(self, "raw_fields", tuple(self.raw_fields))
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise SchemaError("schema needs at least one feature")
        if len(set(self.raw_fields)) != len(self.raw_fields):
            raise SchemaError("raw field names must be unique")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError(f"feature names must be unique, got {names}")
        for f in self.features:
            if f.rule not in AGGREGATION_RULES:
                raise SchemaError(
                    f"feature {f.name!r}: unknown rule {f.rule!r}; "
                    f"expected one of {AGGREGATION_RULES}"
                )
            if f.source not in self.raw_fields:
                raise SchemaError(
                    f"feature {f.name!r}: source {f.source!r} is not a raw field"
                )

    @property
    def n_features(self):
        return len(self.features)

    @property
    def feature_names(self):
        return [f.name for f in self.features]

    def raw_index(self, name):
        return self.raw_fields.index(name)

    def header(self):
        """Transactions CSV header."""
        return ["txn_id", "user_id", "ts", *self.raw_fields]

    def to_dict(self):
        return {
            "raw_fields": list(self.raw_fields),
            "features": [
                {"name": f.name, "rule": f.rule, "source": f.source, "units": f.units}
                for f in self.features
            ],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            feats = tuple(FeatureSpec(**f) for f in d["features"])
            return cls(raw_fields=tuple(d["raw_fields"]), features=feats)
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"bad schema document: {exc}") from exc

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_schema():
    """The default 11-feature schema over 11 raw transaction fields."""
    raw = (
        "deposit",
        "entry_fee",
        "winnings",
        "withdrawal",
        "contest_entry",
        "match_id",
        "session_id",
        "balance_delta",
        "is_win",
        "is_promo",
        "active",
    )
    feats = (
        FeatureSpec("deposit_sum", "sum", "deposit", "currency"),
        FeatureSpec("entry_fee_sum", "sum", "entry_fee", "currency"),
        FeatureSpec("winnings_sum", "sum", "winnings", "currency"),
        FeatureSpec("withdrawal_sum", "sum", "withdrawal", "currency"),
        FeatureSpec("contest_entry_count", "count", "contest_entry", "contests"),
        FeatureSpec("distinct_match_count", "distinct_count", "match_id", "matches"),
        FeatureSpec("session_count", "distinct_count", "session_id", "sessions"),
        FeatureSpec("net_balance_delta", "sum", "balance_delta", "currency"),
        FeatureSpec("win_rate", "mean", "is_win", "fraction"),
        FeatureSpec("promo_txn_count", "count", "is_promo", "transactions"),
        FeatureSpec("active_flag", "max", "active", "indicator"),
    )
    return FeatureSchema(raw_fields=raw, features=feats)
