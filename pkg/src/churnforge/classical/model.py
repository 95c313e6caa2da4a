"""Four-head classical models over Level-02 vectors, with JSON persistence."""

import json
from dataclasses import asdict, dataclass

import numpy as np

from churnforge.errors import ConfigError, DataError, ShapeError
from churnforge.data.windows import HORIZON_WEEKS
from churnforge.classical.forest import ForestConfig, ForestHead, fit_random_forest
from churnforge.classical.gbt import GBTConfig, GBTHead, fit_gbt
from churnforge.classical.logreg import LogRegConfig, LogRegHead, fit_logreg

CLASSICAL_KINDS = ("lr", "rf", "gbt")
PROB_CLIP = 1e-7

_CONFIG_TYPES = {"lr": LogRegConfig, "rf": ForestConfig, "gbt": GBTConfig}
_HEAD_TYPES = {"lr": LogRegHead, "rf": ForestHead, "gbt": GBTHead}

FORMAT_TAG = "churnforge-classical"
FORMAT_VERSION = 1


@dataclass
class ClassicalModel:
    kind: str
    heads: list  # one per horizon week
    n_features: int
    seed: int
    config: object

    def predict(self, G):
        """Per-week probabilities, clamped to [1e-7, 1 - 1e-7]; (n, 4)."""
        G = np.asarray(G, dtype=np.float64)
        if G.ndim != 2 or G.shape[1] != self.n_features:
            raise ShapeError(
                f"expected (n, {self.n_features}) features, got {G.shape}"
            )
        probs = np.column_stack([h.predict_proba(G) for h in self.heads])
        return np.clip(probs, PROB_CLIP, 1.0 - PROB_CLIP)


def fit_classical(kind, G, Y, seed=0, config=None):
    """Trains 4 independent weekly heads of the given kind on (G, Y)."""
    if kind not in CLASSICAL_KINDS:
        raise ConfigError(f"unknown classical kind {kind!r}; expected {CLASSICAL_KINDS}")
    G = np.asarray(G, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if G.ndim != 2 or Y.shape != (G.shape[0], HORIZON_WEEKS):
        raise DataError(f"bad training shapes {G.shape} / {Y.shape}")
    config = config or _CONFIG_TYPES[kind]()
    if not isinstance(config, _CONFIG_TYPES[kind]):
        raise ConfigError(f"{kind} model needs a {_CONFIG_TYPES[kind].__name__}")
    heads = []
    for w in range(HORIZON_WEEKS):
        y = Y[:, w]
        if kind == "lr":
            heads.append(fit_logreg(G, y, config))
        elif kind == "rf":
            heads.append(fit_random_forest(G, y, config, seed=_head_seed(seed, w)))
        else:
            heads.append(fit_gbt(G, y, config, seed=_head_seed(seed, w)))
    return ClassicalModel(
        kind=kind, heads=heads, n_features=G.shape[1], seed=seed, config=config
    )


def _head_seed(seed, week):
    return int(np.random.SeedSequence((seed, week)).generate_state(1)[0])


def save_classical(path, model):
    doc = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "n_features": model.n_features,
        "seed": model.seed,
        "config": asdict(model.config),
        "heads": [h.to_dict() for h in model.heads],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_classical(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT_TAG:
        raise DataError(f"{path}: not a classical model file")
    if doc.get("version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model version {doc.get('version')}")
    kind = doc["kind"]
    if kind not in CLASSICAL_KINDS:
        raise DataError(f"{path}: unknown model kind {kind!r}")
    heads = [_HEAD_TYPES[kind].from_dict(h) for h in doc["heads"]]
    if len(heads) != HORIZON_WEEKS:
        raise DataError(f"{path}: expected {HORIZON_WEEKS} heads")
    return ClassicalModel(
        kind=kind,
        heads=heads,
        n_features=int(doc["n_features"]),
        seed=int(doc["seed"]),
        config=_CONFIG_TYPES[kind](**doc["config"]),
    )
