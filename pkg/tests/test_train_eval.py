"""Training loop, gradient synchronization, and evaluation reports."""

import json
import xml.etree.ElementTree as ET
from types import SimpleNamespace

import numpy as np
import pytest

from churnforge.deep import ArchitectureConfig, build_model
from churnforge.errors import ConfigError, DataError, ShapeError, TrainingDiverged
from churnforge.training.evaluate import (
    evaluate,
    evaluate_scores,
    render_curves_svg,
    save_report,
)
from churnforge.training.loop import (
    HISTORY_HEADER,
    TrainConfig,
    predict_logits,
    restore_state,
    snapshot_state,
    sync_gradient_average,
    train,
)

WINDOW, FEATS = 8, 3


def tiny_model(seed=0, dropout=0.0, kind="transformer"):
    overrides = {
        "transformer": dict(d_model=8, n_heads=2, d_ff=16, n_blocks=1),
        "cnn_full_width": dict(channels=(4, 4, 4), head_hidden=8),
    }[kind]
    cfg = ArchitectureConfig(
        kind, preset="desk", window=WINDOW, n_features=FEATS,
        dropout=dropout, overrides=overrides,
    )
    return build_model(cfg, seed=seed)


def tiny_split(n=96, seed=0):
    """Learnable toy data: labels follow the sign of the first feature's mean."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, WINDOW, FEATS))
    y = (X[:, :, 0].mean(axis=1) > 0).astype(np.uint8)
    samples = [
        SimpleNamespace(X=X[i], Y=np.repeat(y[i], 4).astype(np.uint8))
        for i in range(n)
    ]
    return SimpleNamespace(
        train=samples[: n - 32], validation=samples[n - 32 :], test=[]
    )


class TestTrainConfig:
    """Config validation bounds."""

    @pytest.mark.parametrize("bad", [
        dict(loss="hinge"),
        dict(epochs=0),
        dict(epochs=101),
        dict(lr=-1e-3),
        dict(n_workers=0),
        dict(batch_size=2, n_workers=4),
        dict(report_every=0),
        dict(pos_weight=0.0),
    ])
    def test_invalid_configs_rejected(self, bad):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)

    def test_zero_lr_is_legal(self):
        assert TrainConfig(lr=0.0).lr == 0.0

    def test_dict_round_trip(self):
        cfg = TrainConfig(epochs=7, lr=0.01, n_workers=2, freeze_norm_stats=True)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg


class TestTrainLoop:
    """Parameter updates, history records, and divergence handling."""

    def test_zero_lr_leaves_parameters_unchanged(self):
        model = tiny_model(seed=1)
        before = [p.data.copy() for p in model.parameters()]
        train(model, tiny_split(seed=1), TrainConfig(epochs=3, lr=0.0, batch_size=32))
        for p, b in zip(model.parameters(), before):
            np.testing.assert_array_equal(p.data, b)

    @pytest.mark.parametrize("loss", ["bce", "squared_error"])
    def test_loss_decreases_on_learnable_data(self, loss):
        model = tiny_model(seed=2)
        hist = train(
            model, tiny_split(seed=2),
            TrainConfig(loss=loss, epochs=15, lr=3e-3, batch_size=32, seed=0),
        )
        assert hist.records[-1].train_loss < 0.7 * hist.records[0].train_loss

    def test_training_is_deterministic(self):
        outs = []
        for _ in range(2):
            model = tiny_model(seed=3)
            train(model, tiny_split(seed=3),
                  TrainConfig(epochs=2, lr=1e-3, batch_size=32, seed=5))
            outs.append(np.concatenate([p.data.ravel() for p in model.parameters()]))
        np.testing.assert_array_equal(outs[0], outs[1])

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_aborts_with_context(self):
        model = tiny_model(seed=4)
        for p in model.parameters():
            p.data[...] = 1e200
        with pytest.raises(TrainingDiverged):
            train(model, tiny_split(seed=4), TrainConfig(epochs=1, batch_size=32))

    def test_empty_train_part_rejected(self):
        model = tiny_model(seed=5)
        split = SimpleNamespace(train=[], validation=[], test=[])
        with pytest.raises(DataError):
            train(model, split, TrainConfig(epochs=1))

    def test_history_validation_cadence(self):
        model = tiny_model(seed=6)
        hist = train(model, tiny_split(seed=6),
                     TrainConfig(epochs=5, lr=1e-3, batch_size=32, report_every=2))
        assert [r.epoch for r in hist.records] == [1, 2, 3, 4, 5]
        validated = [r.epoch for r in hist.records if not np.isnan(r.val_loss)]
        assert validated == [2, 4, 5]  # cadence plus the forced final epoch

    def test_best_state_matches_best_val_auc(self):
        model = tiny_model(seed=7)
        split = tiny_split(seed=7)
        hist = train(model, split,
                     TrainConfig(epochs=6, lr=3e-3, batch_size=32, seed=1))
        assert hist.best_epoch >= 1
        restore_state(model, hist.best_state)
        Xv = np.stack([s.X for s in split.validation])
        Yv = np.stack([s.Y for s in split.validation])
        from churnforge.training.metrics import roc_auc

        logits = predict_logits(model, Xv)
        aucs = [roc_auc(Yv[:, w], logits[:, w]) for w in range(4)]
        np.testing.assert_allclose(np.mean(aucs), hist.best_val_auc, atol=1e-12)

    def test_history_csv_format(self, tmp_path):
        model = tiny_model(seed=8)
        hist = train(model, tiny_split(seed=8),
                     TrainConfig(epochs=3, lr=1e-3, batch_size=32, report_every=2))
        path = tmp_path / "history.csv"
        hist.save(path)
        lines = path.read_text().splitlines()
        assert lines[0] == HISTORY_HEADER
        assert len(lines) == 4
        row1 = lines[1].split(",")
        assert row1[0] == "1" and row1[2:] == [""] * 5  # epoch 1 not validated
        row2 = lines[2].split(",")
        assert float(row2[2]) == hist.records[1].val_loss

    def test_snapshot_restore_round_trip(self):
        model = tiny_model(seed=9)
        state = snapshot_state(model)
        train(model, tiny_split(seed=9), TrainConfig(epochs=1, lr=0.1, batch_size=32))
        restore_state(model, state)
        for p, arr in zip(model.parameters(), state[0]):
            np.testing.assert_array_equal(p.data, arr)

    def test_restore_rejects_mismatched_state(self):
        model = tiny_model(seed=10)
        params, buffers = snapshot_state(model)
        with pytest.raises(ShapeError):
            restore_state(model, (params[:-1], buffers))


class TestSync:
    """Synchronous gradient averaging."""

    def test_mean_of_three_sets(self):
        rng = np.random.default_rng(11)
        sets = [[rng.normal(size=(3, 2)), rng.normal(size=4)] for _ in range(3)]
        avg = sync_gradient_average(sets)
        for i in range(2):
            np.testing.assert_allclose(
                avg[i], sum(s[i] for s in sets) / 3.0, atol=1e-15
            )

    def test_single_set_is_identity(self):
        g = [np.arange(6.0).reshape(2, 3)]
        np.testing.assert_allclose(sync_gradient_average([g])[0], g[0], atol=0)

    def test_shape_mismatch_rejected(self):
        a = [np.zeros((2, 2))]
        b = [np.zeros((2, 3))]
        with pytest.raises(ShapeError):
            sync_gradient_average([a, b])
        with pytest.raises(ShapeError):
            sync_gradient_average([a, a + [np.zeros(1)]])
        with pytest.raises(ShapeError):
            sync_gradient_average([])

    def test_two_workers_match_one_with_frozen_norm(self):
        """With frozen batch-norm stats and no dropout, sharding a batch over
        workers changes only the summation order of the gradient average."""
        finals = []
        for workers in (1, 2):
            model = tiny_model(seed=12, kind="cnn_full_width")
            cfg = TrainConfig(epochs=2, lr=1e-3, batch_size=64, seed=3,
                              n_workers=workers, freeze_norm_stats=True)
            train(model, tiny_split(n=64, seed=12), cfg)
            finals.append(np.concatenate([p.data.ravel() for p in model.parameters()]))
        assert np.linalg.norm(finals[0] - finals[1]) < 1e-7


class TestEvaluate:
    """Per-week reports from scores and from models."""

    def test_shape_and_empty_validation(self):
        with pytest.raises(ShapeError):
            evaluate_scores(np.zeros((4, 2)), np.zeros((4, 3)))
        with pytest.raises(ShapeError):
            evaluate_scores(np.zeros(4), np.zeros(4))
        with pytest.raises(DataError):
            evaluate_scores(np.zeros((0, 4)), np.zeros((0, 4)))

    def test_constant_scores_give_chance_auc_and_base_rate_pr(self):
        rng = np.random.default_rng(13)
        y = (rng.random((400, 2)) < 0.3).astype(float)
        s = np.full((400, 2), 0.5)
        report = evaluate_scores(y, s)
        for w, week in enumerate(report.weeks):
            assert not week.skipped
            np.testing.assert_allclose(week.auc, 0.5, atol=1e-12)
            np.testing.assert_allclose(week.pr_area, y[:, w].mean(), atol=1e-12)

    def test_perfect_scores_give_unit_auc(self):
        y = np.array([[0.0], [0.0], [1.0], [1.0]])
        s = np.array([[0.1], [0.2], [0.8], [0.9]])
        report = evaluate_scores(y, s)
        assert report.weeks[0].auc == 1.0
        assert report.weeks[0].n_positive == 2

    def test_single_class_week_is_skipped_with_reason(self):
        y = np.c_[np.zeros(10), np.r_[np.zeros(5), np.ones(5)]]
        s = np.tile(np.linspace(0, 1, 10)[:, None], (1, 2))
        report = evaluate_scores(y, s)
        assert report.weeks[0].skipped and "single-class" in report.weeks[0].reason
        assert report.weeks[0].auc is None
        assert not report.weeks[1].skipped
        assert report.aucs()[0] is None

    def test_evaluate_model_matches_manual_scores(self):
        model = tiny_model(seed=14)
        split = tiny_split(n=48, seed=14)
        report = evaluate(model, split.validation)
        Xv = np.stack([s.X for s in split.validation])
        Yv = np.stack([s.Y for s in split.validation])
        probs = 1 / (1 + np.exp(-predict_logits(model, Xv)))
        manual = evaluate_scores(Yv, probs)
        assert report.n_samples == len(split.validation)
        np.testing.assert_allclose(report.aucs(), manual.aucs(), atol=1e-15)

    def test_evaluate_empty_samples_rejected(self):
        with pytest.raises(DataError):
            evaluate(tiny_model(seed=15), [])


class TestSaveReport:
    """Report files: JSON, curve CSVs, and SVG plots."""

    def _report(self, skip_week=None):
        rng = np.random.default_rng(16)
        y = (rng.random((60, 4)) < 0.4).astype(float)
        if skip_week is not None:
            y[:, skip_week] = 0.0
        s = np.clip(0.6 * y + 0.4 * rng.random((60, 4)), 0, 1)
        return evaluate_scores(y, s)

    def test_file_set_and_json_contents(self, tmp_path):
        report = self._report()
        written = save_report(report, tmp_path)
        names = sorted(p.split("/")[-1] for p in written)
        assert names == sorted(
            ["report.json"]
            + [f"roc_w{w}.csv" for w in (1, 2, 3, 4)]
            + [f"pr_w{w}.csv" for w in (1, 2, 3, 4)]
            + ["roc.svg", "pr.svg"]
        )
        blob = json.loads((tmp_path / "report.json").read_text())
        assert blob["n_samples"] == 60
        np.testing.assert_allclose(
            [w["auc"] for w in blob["weeks"]], report.aucs(), atol=0
        )

    def test_skipped_week_writes_no_curves(self, tmp_path):
        report = self._report(skip_week=2)
        written = save_report(report, tmp_path)
        assert not any("w3" in p for p in written)
        blob = json.loads((tmp_path / "report.json").read_text())
        assert blob["weeks"][2]["skipped"] is True

    def test_curve_csv_matches_curve_arrays(self, tmp_path):
        report = self._report()
        save_report(report, tmp_path)
        week = report.weeks[0]
        lines = (tmp_path / "roc_w1.csv").read_text().splitlines()
        assert lines[0] == "threshold,fpr,tpr"
        fpr = np.array([float(l.split(",")[1]) for l in lines[1:]])
        np.testing.assert_array_equal(fpr, week.roc[0])

    def test_writes_are_deterministic(self, tmp_path):
        report = self._report()
        save_report(report, tmp_path / "a")
        save_report(report, tmp_path / "b")
        for name in ("report.json", "roc_w1.csv", "roc.svg"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_svg_is_well_formed_xml(self, tmp_path):
        save_report(self._report(), tmp_path)
        for name in ("roc.svg", "pr.svg"):
            root = ET.fromstring((tmp_path / name).read_text())
            assert root.tag.endswith("svg")

    def test_render_svg_directly(self):
        x = np.linspace(0, 1, 20)
        svg = render_curves_svg(
            [("demo", x, x**2)], "t", "x", "y", diagonal=True
        )
        root = ET.fromstring(svg)
        assert root.tag.endswith("svg")
