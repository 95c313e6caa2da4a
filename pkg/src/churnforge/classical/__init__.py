from churnforge.classical.tree import Tree, fit_tree
from churnforge.classical.logreg import LogRegConfig, LogRegHead, fit_logreg
from churnforge.classical.forest import ForestConfig, ForestHead, fit_random_forest
from churnforge.classical.gbt import GBTConfig, GBTHead, fit_gbt
from churnforge.classical.model import (
    CLASSICAL_KINDS,
    PROB_CLIP,
    ClassicalModel,
    fit_classical,
    load_classical,
    save_classical,
)

__all__ = [
    "Tree", "fit_tree",
    "LogRegConfig", "LogRegHead", "fit_logreg",
    "ForestConfig", "ForestHead", "fit_random_forest",
    "GBTConfig", "GBTHead", "fit_gbt",
    "CLASSICAL_KINDS", "PROB_CLIP", "ClassicalModel",
    "fit_classical", "load_classical", "save_classical",
]
