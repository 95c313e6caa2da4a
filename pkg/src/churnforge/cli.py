"""churnforge command-line interface.

Subcommands cover the full pipeline: synth -> features -> train ->
evaluate / predict, plus gradcheck (tensor-core verification) and report
(re-render SVG plots from curve CSVs). Config precedence is built-in
defaults < --config JSON file < explicit flags; every subcommand persists
its resolved configuration next to its outputs. Exit codes: 0 success,
1 runtime failure, 2 invalid configuration or usage.
"""

import argparse
import json
import os
import sys

import numpy as np

from churnforge.classical import (
    CLASSICAL_KINDS,
    ForestConfig,
    GBTConfig,
    LogRegConfig,
    fit_classical,
    load_classical,
    save_classical,
)
from churnforge.data import (
    aggregate_level01,
    build_windows,
    day_to_date,
    default_schema,
    fit_norm_stats,
    ingest_transactions,
    labels_matrix,
    level02_matrix,
    read_window_dataset,
    split_dataset,
    write_level01_csv,
    write_window_dataset,
)
from churnforge.data.schema import FeatureSchema
from churnforge.data.split import NormStats
from churnforge.deep import ARCHITECTURES, ArchitectureConfig, build_model
from churnforge.deep.checkpoint import load_checkpoint, save_checkpoint
from churnforge.errors import ConfigError, DataError, SchemaError, ShapeError, TrainingDiverged
from churnforge.fileio import atomic_output, atomic_write_text
from churnforge.synth import (
    BehaviorConfig,
    default_config,
    generate,
    nonlinear_temporal_config,
    skewed_config,
)
from churnforge.training import (
    TrainConfig,
    evaluate,
    evaluate_scores,
    predict_logits,
    render_curves_svg,
    restore_state,
    save_report,
    snapshot_state,
    train,
)
from churnforge.training.evaluate import _sigmoid
from churnforge.training.metrics import auc as curve_auc
from churnforge.training.metrics import pr_auc as curve_pr_auc

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

CHECKPOINT_MAGIC = b"CKPT"

_CLASSICAL_CONFIGS = {"lr": LogRegConfig, "rf": ForestConfig, "gbt": GBTConfig}


def _resolve(defaults, config_path, flag_values):
    """defaults < JSON config file < explicitly passed flags."""
    resolved = dict(defaults)
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"{config_path}: config file must hold a JSON object")
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise ConfigError(f"{config_path}: unknown config keys {unknown}")
        resolved.update(file_cfg)
    for key, value in flag_values.items():
        if value is not None:
            resolved[key] = value
    return resolved


def _persist_config(out_dir, name, resolved):
    atomic_write_text(
        os.path.join(out_dir, name),
        json.dumps(resolved, indent=2, sort_keys=True) + "\n",
    )


def _cmd_synth(args):
    base = (
        nonlinear_temporal_config()
        if args.behavior == "nonlinear_temporal"
        else default_config()
    )
    defaults = base.to_dict()
    resolved = _resolve(
        defaults,
        args.config,
        {
            "n_users": args.users,
            "n_days": args.days,
            "seed": args.seed,
            "signal_strength": args.signal,
        },
    )
    if args.skew is not None:
        overrides = {
            k: v
            for k, v in resolved.items()
            if k not in ("churn_hazard", "transition_matrix")
        }
        config = skewed_config(args.skew, **overrides)
    else:
        config = BehaviorConfig.from_dict(resolved)

    os.makedirs(args.out, exist_ok=True)
    txn_path = os.path.join(args.out, "transactions.csv")
    gt_path = os.path.join(args.out, "ground_truth.csv")
    with atomic_output(txn_path) as txn_tmp, atomic_output(gt_path) as gt_tmp:
        summary = generate(config, txn_tmp, gt_tmp)
    _persist_config(args.out, "synth_config.json", config.to_dict())
    _persist_config(
        args.out,
        "synth_summary.json",
        {
            "n_users": summary.n_users,
            "n_transactions": summary.n_transactions,
            "transactions_path": txn_path,
            "ground_truth_path": gt_path,
        },
    )
    print(f"wrote {summary.n_transactions} transactions for {summary.n_users} users to {args.out}")
    return EXIT_OK


def _cmd_features(args):
    defaults = {
        "tau": 30,
        "horizon_weeks": 4,
        "stride": 7,
        "max_malformed_frac": 0.01,
        "active_within": None,
        "seed": 0,
        "workers": 1,
    }
    resolved = _resolve(
        defaults,
        args.config,
        {
            "seed": args.seed,
            "workers": args.workers,
            "active_within": args.active_within,
        },
    )
    schema = FeatureSchema.load(args.schema) if args.schema else default_schema()
    records, n_malformed = ingest_transactions(
        args.data, schema, max_malformed_frac=resolved["max_malformed_frac"]
    )
    rows = aggregate_level01(records, schema, workers=resolved["workers"])
    samples, n_skipped = build_windows(
        rows,
        tau=resolved["tau"],
        horizon_weeks=resolved["horizon_weeks"],
        stride=resolved["stride"],
        active_within=resolved["active_within"],
    )
    split = split_dataset(samples, seed=resolved["seed"])
    stats = fit_norm_stats(split.train)

    os.makedirs(args.out, exist_ok=True)
    level01_path = os.path.join(args.out, "level01.csv")
    with atomic_output(level01_path) as tmp:
        write_level01_csv(tmp, rows, schema)
    tau, nf = resolved["tau"], schema.n_features
    part_sizes = {}
    for part_name in ("train", "validation", "test"):
        part = getattr(split, part_name)
        part_sizes[part_name] = len(part)
        path = os.path.join(args.out, f"{part_name}.chrn")
        with atomic_output(path) as tmp:
            write_window_dataset(tmp, part, tau=tau, n_features=nf)
    with atomic_output(os.path.join(args.out, "norm_stats.json")) as tmp:
        stats.save(tmp, feature_names=schema.feature_names)
    with atomic_output(os.path.join(args.out, "schema.json")) as tmp:
        schema.save(tmp)
    _persist_config(args.out, "features_config.json", resolved)

    pos = labels_matrix(samples).mean(axis=0) if samples else np.zeros(4)
    _persist_config(
        args.out,
        "features_summary.json",
        {
            "n_records": len(records),
            "n_malformed": n_malformed,
            "n_daily_rows": len(rows),
            "n_windows": len(samples),
            "n_windows_skipped": n_skipped,
            "part_sizes": part_sizes,
            "positive_rates": [float(p) for p in pos],
        },
    )
    print(
        f"ingested {len(records)} records -> {len(rows)} daily rows -> "
        f"{len(samples)} windows (train/val/test = "
        f"{part_sizes['train']}/{part_sizes['validation']}/{part_sizes['test']})"
    )
    return EXIT_OK


def _load_part(data_dir, part):
    stats_path = os.path.join(data_dir, "norm_stats.json")
    if not os.path.exists(stats_path):
        raise ConfigError(f"normalization stats not found: {stats_path}")
    stats = NormStats.load(stats_path)
    path = os.path.join(data_dir, f"{part}.chrn")
    if not os.path.exists(path):
        raise ConfigError(f"window dataset not found: {path}")
    return read_window_dataset(path, stats=stats)


def _train_deep(args, split_parts):
    defaults = {
        "preset": "desk",
        "loss": "bce",
        "epochs": 50,
        "batch": 256,
        "lr": 1e-4,
        "seed": 0,
        "workers": 1,
        "dropout": None,
        "report_every": 1,
        "pos_weight": 1.0,
        "freeze_norm_stats": False,
    }
    resolved = _resolve(
        defaults,
        args.config,
        {
            "preset": args.preset,
            "loss": args.loss,
            "epochs": args.epochs,
            "batch": args.batch,
            "seed": args.seed,
            "workers": args.workers,
        },
    )
    train_part, val_part = split_parts
    if not train_part:
        raise DataError("training part is empty")
    tau, nf = train_part[0].X.shape
    arch = ArchitectureConfig(
        args.model,
        resolved["preset"],
        window=tau,
        n_features=nf,
        dropout=resolved["dropout"],
    )
    model = build_model(arch, seed=resolved["seed"])
    config = TrainConfig(
        loss=resolved["loss"],
        epochs=resolved["epochs"],
        batch_size=resolved["batch"],
        lr=resolved["lr"],
        seed=resolved["seed"],
        n_workers=resolved["workers"],
        report_every=resolved["report_every"],
        pos_weight=resolved["pos_weight"],
        freeze_norm_stats=resolved["freeze_norm_stats"],
    )

    class _Split:
        train = train_part
        validation = val_part
        test = []

    history = train(model, _Split(), config)

    os.makedirs(args.out, exist_ok=True)
    with atomic_output(os.path.join(args.out, "history.csv")) as tmp:
        history.save(tmp)
    final_state = snapshot_state(model)
    with atomic_output(os.path.join(args.out, "final.ckpt")) as tmp:
        save_checkpoint(tmp, model)
    restore_state(model, history.best_state)
    with atomic_output(os.path.join(args.out, "best.ckpt")) as tmp:
        save_checkpoint(tmp, model)
    restore_state(model, final_state)
    _persist_config(
        args.out, "train_config.json", {**resolved, "model": args.model}
    )
    last = history.records[-1]
    aucs = ",".join("nan" if np.isnan(a) else f"{a:.4f}" for a in last.val_auc)
    print(
        f"trained {args.model} ({resolved['preset']}) for {config.epochs} epochs; "
        f"final train loss {last.train_loss:.4f}, val AUC [{aucs}], "
        f"best epoch {history.best_epoch}"
    )
    return EXIT_OK


def _train_classical(args, split_parts):
    for flag, value in (
        ("--preset", args.preset),
        ("--loss", args.loss),
        ("--epochs", args.epochs),
        ("--batch", args.batch),
    ):
        if value is not None:
            raise ConfigError(f"{flag} does not apply to classical model {args.model!r}")
    config_cls = _CLASSICAL_CONFIGS[args.model]
    base = config_cls()
    defaults = {"seed": 0}
    defaults.update(vars(base))
    resolved = _resolve(defaults, args.config, {"seed": args.seed})
    seed = resolved.pop("seed")
    model_config = config_cls(**resolved)

    train_part, _ = split_parts
    if not train_part:
        raise DataError("training part is empty")
    G = level02_matrix(train_part)
    Y = labels_matrix(train_part)
    model = fit_classical(args.model, G, Y, seed=seed, config=model_config)

    os.makedirs(args.out, exist_ok=True)
    with atomic_output(os.path.join(args.out, "model.json")) as tmp:
        save_classical(tmp, model)
    _persist_config(
        args.out,
        "train_config.json",
        {**resolved, "seed": seed, "model": args.model},
    )
    print(f"trained {args.model} on {G.shape[0]} windows ({G.shape[1]} level-2 features)")
    return EXIT_OK


def _cmd_train(args):
    train_part = _load_part(args.data, "train")
    try:
        val_part = _load_part(args.data, "validation")
    except ConfigError:
        val_part = []
    if args.model in CLASSICAL_KINDS:
        return _train_classical(args, (train_part, val_part))
    return _train_deep(args, (train_part, val_part))


def _is_checkpoint(path):
    with open(path, "rb") as fh:
        return fh.read(4) == CHECKPOINT_MAGIC


def _model_scores(model_path, samples):
    """(n, 4) churn probabilities from either model family."""
    if _is_checkpoint(model_path):
        model = load_checkpoint(model_path)
        X = np.stack([s.X for s in samples]).astype(np.float64)
        return _sigmoid(predict_logits(model, X))
    model = load_classical(model_path)
    return model.predict(level02_matrix(samples))


def _cmd_evaluate(args):
    samples = _load_part(args.data, args.part)
    if not samples:
        raise DataError(f"{args.part} part is empty")
    scores = _model_scores(args.model, samples)
    report = evaluate_scores(labels_matrix(samples).astype(np.float64), scores)
    os.makedirs(args.out, exist_ok=True)
    save_report(report, args.out, svg=not args.no_svg)
    _persist_config(
        args.out,
        "evaluate_config.json",
        {"data": args.data, "model": args.model, "part": args.part},
    )
    for week in report.weeks:
        if week.skipped:
            print(f"week {week.week}: skipped ({week.reason})")
        else:
            print(
                f"week {week.week}: AUC {week.auc:.4f}, PR area {week.pr_area:.4f}, "
                f"positive rate {week.positive_rate:.4f}"
            )
    return EXIT_OK


def _cmd_predict(args):
    stats_path = args.stats or os.path.join(os.path.dirname(args.data), "norm_stats.json")
    if not os.path.exists(stats_path):
        raise ConfigError(f"normalization stats not found: {stats_path}")
    samples = read_window_dataset(args.data, stats=NormStats.load(stats_path))
    header = "user_id,anchor_date,p_w1,p_w2,p_w3,p_w4"
    lines = [header]
    if samples:
        probs = _model_scores(args.model, samples)
        for sample, row in zip(samples, probs):
            date = day_to_date(sample.anchor_day).isoformat()
            lines.append(
                f"{sample.user_id},{date}," + ",".join(repr(float(p)) for p in row)
            )
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 1} predictions to {args.out}")
    return EXIT_OK


def _cmd_gradcheck(args):
    from churnforge.selfcheck import architecture_checks, op_checks

    results = op_checks(seed=args.seed if args.seed is not None else 0)
    if args.full:
        results += architecture_checks()
    n_pass = 0
    for name, rep in results:
        state = "PASS" if rep.passed else "FAIL"
        print(f"{name:<24} {state}  max rel err {rep.max_rel_error:.2e}")
        n_pass += rep.passed
    print(f"{n_pass}/{len(results)} gradient checks passed")
    return EXIT_OK if n_pass == len(results) else EXIT_RUNTIME


def _read_curve_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        cols = [[] for _ in header]
        for line in fh:
            for col, cell in zip(cols, line.strip().split(",")):
                col.append(float(cell))
    return header, [np.asarray(c) for c in cols]


def _cmd_report(args):
    roc_curves, pr_curves = [], []
    for week in range(1, 5):
        roc_path = os.path.join(args.curves, f"roc_w{week}.csv")
        if os.path.exists(roc_path):
            _, (thr, fpr, tpr) = _read_curve_csv(roc_path)
            roc_curves.append((f"week {week} (AUC {curve_auc(fpr, tpr):.3f})", fpr, tpr))
        pr_path = os.path.join(args.curves, f"pr_w{week}.csv")
        if os.path.exists(pr_path):
            _, (thr, recall, precision) = _read_curve_csv(pr_path)
            pr_curves.append(
                (f"week {week} (area {curve_pr_auc(precision, recall):.3f})",
                 recall, precision)
            )
    if not roc_curves and not pr_curves:
        raise ConfigError(f"no roc_w*.csv or pr_w*.csv files under {args.curves}")
    os.makedirs(args.out, exist_ok=True)
    if roc_curves:
        atomic_write_text(
            os.path.join(args.out, "roc.svg"),
            render_curves_svg(roc_curves, "ROC by label week",
                              "false positive rate", "true positive rate",
                              diagonal=True),
        )
    if pr_curves:
        atomic_write_text(
            os.path.join(args.out, "pr.svg"),
            render_curves_svg(pr_curves, "Precision-recall by label week",
                              "recall", "precision"),
        )
    print(f"rendered {len(roc_curves)} ROC and {len(pr_curves)} PR curves to {args.out}")
    return EXIT_OK


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="churnforge",
        description="Churn prediction over transactional time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, out=True):
        sp.add_argument("--config", help="JSON file of config overrides")
        sp.add_argument("--seed", type=int, help="global random seed")
        sp.add_argument("--workers", type=int, help="parallelism bound")
        if out:
            sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("synth", help="generate a synthetic transaction log")
    common(sp)
    sp.add_argument("--users", type=int, help="number of users")
    sp.add_argument("--days", type=int, help="number of simulated days")
    sp.add_argument("--signal", type=float, help="signal strength in [0, 1]")
    sp.add_argument("--skew", type=float, help="calibrate week-1 negative:positive ratio")
    sp.add_argument(
        "--behavior",
        choices=("default", "nonlinear_temporal"),
        default="default",
        help="behavior preset to start from",
    )
    sp.set_defaults(func=_cmd_synth)

    sp = sub.add_parser("features", help="ingest transactions and build window datasets")
    common(sp)
    sp.add_argument("--data", required=True, help="transactions CSV path")
    sp.add_argument("--schema", help="feature schema JSON (default: built-in)")
    sp.add_argument(
        "--active-within",
        type=int,
        dest="active_within",
        help="keep only windows with an active day in the last N lookback days",
    )
    sp.set_defaults(func=_cmd_features)

    sp = sub.add_parser("train", help="train a model on a features directory")
    common(sp)
    sp.add_argument("--data", required=True, help="features directory")
    sp.add_argument(
        "--model",
        required=True,
        choices=tuple(ARCHITECTURES) + tuple(CLASSICAL_KINDS),
        help="model kind",
    )
    sp.add_argument("--preset", choices=("desk", "paper"), help="architecture size preset")
    sp.add_argument("--loss", choices=("bce", "squared_error"), help="training loss")
    sp.add_argument("--epochs", type=int, help="training epochs (max 100)")
    sp.add_argument("--batch", type=int, help="global batch size")
    sp.set_defaults(func=_cmd_train)

    sp = sub.add_parser("evaluate", help="write per-week ROC/PR report for a model")
    common(sp)
    sp.add_argument("--data", required=True, help="features directory")
    sp.add_argument("--model", required=True, help="checkpoint (.ckpt) or classical model (.json)")
    sp.add_argument("--part", choices=("train", "validation", "test"), default="test")
    sp.add_argument("--no-svg", action="store_true", help="skip SVG plots")
    sp.set_defaults(func=_cmd_evaluate)

    sp = sub.add_parser("predict", help="score a window dataset with a trained model")
    common(sp, out=False)
    sp.add_argument("--data", required=True, help="window dataset (.chrn)")
    sp.add_argument("--model", required=True, help="checkpoint (.ckpt) or classical model (.json)")
    sp.add_argument("--stats", help="norm stats JSON (default: next to --data)")
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.set_defaults(func=_cmd_predict)

    sp = sub.add_parser("gradcheck", help="finite-difference verification of the tensor core")
    sp.add_argument("--config", help=argparse.SUPPRESS)
    sp.add_argument("--seed", type=int, help="probe seed")
    sp.add_argument("--workers", type=int, help=argparse.SUPPRESS)
    sp.add_argument("--full", action="store_true", help="also check every desk architecture")
    sp.set_defaults(func=_cmd_gradcheck)

    sp = sub.add_parser("report", help="re-render SVG plots from curve CSV files")
    common(sp)
    sp.add_argument("--curves", required=True, help="directory holding roc_w*.csv / pr_w*.csv")
    sp.set_defaults(func=_cmd_report)

    return parser


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, SchemaError, ShapeError, FileNotFoundError,
            NotADirectoryError, IsADirectoryError, json.JSONDecodeError) as exc:
        print(f"churnforge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, TrainingDiverged, OSError, ValueError) as exc:
        print(f"churnforge: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
