from churnforge.training.evaluate import (
    EvalReport,
    WeekEval,
    evaluate,
    evaluate_scores,
    render_curves_svg,
    save_report,
)
from churnforge.training.loop import (
    LOSSES,
    EpochRecord,
    TrainConfig,
    TrainHistory,
    predict_logits,
    restore_state,
    snapshot_state,
    sync_gradient_average,
    train,
)
from churnforge.training.metrics import (
    auc,
    average_precision,
    pr_auc,
    pr_curve,
    roc_auc,
    roc_curve,
)

__all__ = [
    "LOSSES",
    "EpochRecord",
    "EvalReport",
    "TrainConfig",
    "TrainHistory",
    "WeekEval",
    "auc",
    "average_precision",
    "evaluate",
    "evaluate_scores",
    "pr_auc",
    "pr_curve",
    "predict_logits",
    "render_curves_svg",
    "restore_state",
    "roc_auc",
    "roc_curve",
    "save_report",
    "snapshot_state",
    "sync_gradient_average",
    "train",
]
