import copy

import numpy as np
import pytest

from conftest import small_run_config
from transrppg.evaluation import (
    AXES,
    AblationRow,
    LosoResult,
    ScoredSet,
    ablation_sweep,
    cross_run,
    evaluate,
    fold_summary,
    loso_run,
    variant_config,
    write_ablation_csv,
)
from transrppg.evaluation.protocols import FALLBACK_THRESHOLD, FoldResult, pooled_hter, run_fold, training_threshold
from transrppg.exceptions import ProtocolError
from transrppg.mstmap.pipeline import prepare_dataset
from transrppg.synth import generate_dataset
from transrppg.training import TrainLog


@pytest.fixture(scope="module")
def quick_config():
    return small_run_config(max_epochs=2, lr_halve_epoch=2)


@pytest.fixture(scope="module")
def quick_dataset(quick_config):
    return generate_dataset(quick_config.synth)


@pytest.fixture(scope="module")
def quick_pairs(quick_dataset, quick_config):
    return prepare_dataset(quick_dataset, quick_config.color, quick_config.model)


@pytest.fixture(scope="module")
def loso(quick_pairs, quick_config):
    return loso_run(quick_pairs, quick_config)


def fold(scores, labels, threshold, subject="S01"):
    return FoldResult(
        subject_id=subject,
        train_subjects=(),
        scores=ScoredSet(scores=scores, labels=labels),
        threshold=threshold,
        report=None,
        log=TrainLog(),
    )


class TestLoso:
    def test_one_fold_per_subject(self, loso):
        assert [f.subject_id for f in loso.folds] == ["S01", "S02", "S03"]

    def test_held_out_subject_never_trained_on(self, loso):
        for f in loso.folds:
            assert f.subject_id not in f.train_subjects
            assert set(f.scores.subject_ids) == {f.subject_id}

    def test_pooled_scores_cover_the_dataset(self, loso, quick_pairs):
        assert len(loso.pooled_scores) == len(quick_pairs)
        assert 0.0 <= loso.pooled.auc <= 1.0
        assert loso.pooled.hter is not None

    def test_each_fold_trains_its_full_schedule(self, loso, quick_config):
        for f in loso.folds:
            assert [r.epoch for r in f.log.records] == list(range(1, quick_config.train.max_epochs + 1))

    def test_result_lines(self, loso, tmp_path):
        lines = loso.lines()
        assert len(lines) == 4
        assert lines[0].startswith("auc=")
        assert lines[1].startswith("subject=S01 threshold=")
        path = loso.write(tmp_path / "loso.txt")
        assert path.read_text().splitlines() == lines

    def test_fold_summary(self, loso):
        summary = fold_summary(loso)
        assert set(summary) == {"auc", "eer", "hter", "ffr_at_flr"}

    def test_parallel_folds_match_sequential(self, loso, quick_pairs, quick_config):
        cfg = copy.deepcopy(quick_config)
        cfg.eval.max_workers = 3
        parallel = loso_run(quick_pairs, cfg)
        np.testing.assert_array_equal(parallel.pooled_scores.scores, loso.pooled_scores.scores)

    def test_needs_two_subjects(self, quick_pairs, quick_config):
        with pytest.raises(ProtocolError):
            loso_run([p for p in quick_pairs if p.subject_id == "S01"], quick_config)

    def test_run_fold_for_unknown_subject(self, quick_pairs, quick_config):
        with pytest.raises(ProtocolError):
            run_fold(quick_pairs, "S99", quick_config, fold=0)

    def test_background_only_maps(self, quick_pairs, quick_config):
        result = loso_run(quick_pairs, quick_config, background_only_maps=True)
        assert len(result.pooled_scores) == len(quick_pairs)
        assert quick_config.model.bg_mode != "none"


class TestThresholds:
    def test_training_threshold_is_the_eer_threshold(self):
        s = ScoredSet(scores=[0.9, 0.4, 0.5, 0.1], labels=[1, 1, 0, 0])
        assert training_threshold(s) == pytest.approx(0.475)

    def test_single_class_falls_back(self):
        s = ScoredSet(scores=[0.9, 0.4], labels=[1, 1])
        assert training_threshold(s) == FALLBACK_THRESHOLD

    def test_pooled_hter_counts_samples_not_folds(self):
        folds = [
            fold([0.9, 0.6], [1, 0], threshold=0.5),
            fold([0.3, 0.1, 0.2], [1, 0, 0], threshold=0.35, subject="S02"),
        ]
        # One of three masks accepted, one of two bonafide rejected.
        assert pooled_hter(folds) == pytest.approx((1 / 3 + 1 / 2) / 2)


class TestCrossPopulation:
    def test_train_on_two_subjects_test_on_third(self, quick_pairs, quick_config):
        train_pairs = [p for p in quick_pairs if p.subject_id != "S03"]
        test_pairs = [p for p in quick_pairs if p.subject_id == "S03"]
        result = cross_run(train_pairs, test_pairs, quick_config)
        assert len(result.scores) == len(test_pairs)
        assert result.report.hter is not None
        assert len(result.log.records) == quick_config.train.max_epochs


class TestAblations:
    @pytest.mark.parametrize("seconds,frames", [("3", 90), ("5", 150), ("7", 210), ("10", 300)])
    def test_video_length(self, quick_config, seconds, frames):
        assert variant_config(quick_config, "video_length", seconds).model.W == frames

    def test_depth_and_color(self, quick_config):
        assert variant_config(quick_config, "depth", "6").model.layers == 6
        green = variant_config(quick_config, "color_space", "g")
        assert green.color.space == "G" and green.model.C == 1

    def test_variant_leaves_base_untouched(self, quick_config):
        variant_config(quick_config, "patch_size", "3x15")
        assert (quick_config.model.P_H, quick_config.model.P_W) == (3, 30)

    def test_bg_branch_switch(self, quick_config):
        assert variant_config(quick_config, "bg_branch", "false").model.bg_mode == "none"

    @pytest.mark.parametrize(
        "axis,value",
        [("bogus", "1"), ("patch_size", "3by30"), ("width", "13"), ("pos_embed", "maybe")],
    )
    def test_invalid_variants(self, quick_config, axis, value):
        with pytest.raises(ProtocolError):
            variant_config(quick_config, axis, value)

    def test_every_axis_has_a_setter(self):
        assert {"color_space", "patch_size", "step_size", "video_length", "depth", "width"} <= set(AXES)

    def test_csv(self, tmp_path):
        report = evaluate(ScoredSet(scores=[0.9, 0.4, 0.5, 0.1], labels=[1, 1, 0, 0]))
        path = write_ablation_csv([AblationRow(axis="depth", value="6", report=report)], tmp_path / "ab.csv")
        assert path.read_text().splitlines() == ["axis,value,auc,eer,ffr", "depth,6,0.750000,0.250000,0.500000"]

    def test_sweep_runs_one_loso_per_value(self, quick_dataset, quick_config):
        rows = ablation_sweep(quick_dataset, quick_config, "pos_embed", values=["false"])
        assert [(r.axis, r.value) for r in rows] == [("pos_embed", "false")]
        assert 0.0 <= rows[0].report.auc <= 1.0


def test_loso_result_type(loso):
    assert isinstance(loso, LosoResult)
