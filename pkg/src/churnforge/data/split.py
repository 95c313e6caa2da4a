"""User-level train/validation/test splitting and feature normalization.

Assignment hashes (user_id, seed) with blake2b, so it is stable across
processes and platforms; every window of a user lands in one part.
"""

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from churnforge.errors import DataError

FRACTIONS = (0.75, 0.05, 0.20)  # train, validation, test
NORM_EPS = 1e-8


@dataclass
class DatasetSplit:
    train: list
    validation: list
    test: list
    seed: int


def _user_fraction(user_id, seed):
    digest = hashlib.blake2b(
        f"{user_id}:{seed}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little") / 2**64


def split_dataset(samples, seed):
    users = {s.user_id for s in samples}
    if len(users) < 3:
        raise DataError(f"need at least 3 distinct users to split, got {len(users)}")
    parts = ([], [], [])
    t_cut, v_cut = FRACTIONS[0], FRACTIONS[0] + FRACTIONS[1]
    for s in samples:
        frac = _user_fraction(s.user_id, seed)
        idx = 0 if frac < t_cut else (1 if frac < v_cut else 2)
        parts[idx].append(s)
    return DatasetSplit(train=parts[0], validation=parts[1], test=parts[2], seed=seed)


@dataclass
class NormStats:
    mean: np.ndarray  # (n_features,)
    std: np.ndarray  # (n_features,)
    eps: float = NORM_EPS

    def transform(self, X):
        return (X - self.mean) / (self.std + self.eps)

    def to_dict(self, feature_names=None):
        names = feature_names or [f"f{i + 1}" for i in range(self.mean.size)]
        return {
            "eps": self.eps,
            "features": [
                {"name": n, "mean": float(m), "std": float(s)}
                for n, m, s in zip(names, self.mean, self.std)
            ],
        }

    @classmethod
    def from_dict(cls, d):
        feats = d["features"]
        return cls(
            mean=np.array([f["mean"] for f in feats]),
            std=np.array([f["std"] for f in feats]),
            eps=float(d.get("eps", NORM_EPS)),
        )

    def save(self, path, feature_names=None):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(feature_names), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit_norm_stats(samples):
    """Per-feature mean and population std over every day of every window."""
    if not samples:
        raise DataError("cannot fit normalization stats on an empty part")
    stacked = np.concatenate([s.X for s in samples], axis=0)
    return NormStats(mean=stacked.mean(axis=0), std=stacked.std(axis=0))


def apply_normalization(samples, stats):
    return [replace(s, X=stats.transform(s.X)) for s in samples]


def normalize_features(split):
    """Fits stats on the train part only; transforms all three parts.

    Returns (stats, transformed DatasetSplit). Inputs are not mutated.
    """
    stats = fit_norm_stats(split.train)
    return stats, DatasetSplit(
        train=apply_normalization(split.train, stats),
        validation=apply_normalization(split.validation, stats),
        test=apply_normalization(split.test, stats),
        seed=split.seed,
    )
