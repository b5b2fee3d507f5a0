import dataclasses
from collections import OrderedDict

import numpy as np
import pytest

from transrppg.commands.training import shortened_schedule
from transrppg.core.conf import TrainConfig
from transrppg.exceptions import CheckpointError, NumericError, ProtocolError
from transrppg.model import init_weights, save_weights
from transrppg.training import AdamState, EpochRecord, TrainLog, Trainer, adam_step, lr_at_epoch, stack_pairs, train


def arrays_of(weights):
    return {name: t.data.copy() for name, t in weights.items()}


class TestSchedule:
    @pytest.mark.parametrize("epoch,expected", [(1, 1e-4), (44, 1e-4), (45, 5e-5), (60, 5e-5)])
    def test_halving_boundary(self, epoch, expected):
        assert lr_at_epoch(epoch, TrainConfig()) == pytest.approx(expected)

    @pytest.mark.parametrize("epoch", [0, 61])
    def test_out_of_range(self, epoch):
        with pytest.raises(ProtocolError):
            lr_at_epoch(epoch, TrainConfig())


class TestAdam:
    def test_zero_gradients_without_decay(self):
        w = np.array([1.5, -2.0])
        params = {"w": w}
        state = AdamState.zeros_like(params)
        for step in range(1, 4):
            adam_step(params, {"w": np.zeros(2)}, state, TrainConfig(weight_decay=0.0), step)
        np.testing.assert_array_equal(w, [1.5, -2.0])

    def test_first_step_moves_by_lr(self):
        w = np.array([0.0])
        params = {"w": w}
        state = adam_step(params, {"w": np.array([1.0])}, AdamState.zeros_like(params), TrainConfig(weight_decay=0.0), 1, lr=0.1)
        assert w[0] == pytest.approx(-0.1 / (1.0 + 1e-8), rel=1e-12)
        assert state.step == 1

    def test_weight_decay_is_added_to_gradient(self):
        cfg = TrainConfig(weight_decay=0.5, beta1=0.5, beta2=0.5)
        w = np.array([2.0])
        state = AdamState.zeros_like({"w": w})
        adam_step({"w": w}, {"w": np.array([0.0])}, state, cfg, 1, lr=0.1)
        np.testing.assert_allclose(state.m["w"], [0.5 * 1.0])

    def test_identical_parameters_stay_identical(self):
        rng = np.random.default_rng(0)
        a, b = np.ones(3), np.ones(3)
        sa, sb = AdamState.zeros_like({"w": a}), AdamState.zeros_like({"w": b})
        for step in range(1, 6):
            g = rng.normal(size=3)
            adam_step({"w": a}, {"w": g}, sa, TrainConfig(), step)
            adam_step({"w": b}, {"w": g.copy()}, sb, TrainConfig(), step)
        np.testing.assert_array_equal(a, b)

    def test_step_index_starts_at_one(self):
        params = {"w": np.zeros(1)}
        with pytest.raises(ProtocolError):
            adam_step(params, {"w": np.zeros(1)}, AdamState.zeros_like(params), TrainConfig(), 0)


class TestTrainLog:
    def test_line_format(self):
        record = EpochRecord(epoch=3, lr=5e-5, losses=(0.5, 0.25, 0.125, 0.875))
        assert record.format() == "epoch=3 lr=0.000050 L_face=0.500000 L_bg=0.250000 L_combined=0.125000 L_overall=0.875000"

    def test_epochs_must_increase(self):
        log = TrainLog()
        log.append(EpochRecord(epoch=1, lr=1e-4, losses=(0, 0, 0, 0)))
        with pytest.raises(ProtocolError):
            log.append(EpochRecord(epoch=1, lr=1e-4, losses=(0, 0, 0, 0)))


class TestTrainer:
    def test_batches_keep_the_partial_tail(self, run_config, model_config):
        trainer = Trainer(init_weights(model_config, seed=0), dataclasses.replace(run_config.train, batch_size=5))
        batches = trainer.batches(12, epoch=1)
        assert [len(b) for b in batches] == [5, 5, 2]
        assert sorted(np.concatenate(batches).tolist()) == list(range(12))
        assert [b.tolist() for b in trainer.batches(12, epoch=1)] == [b.tolist() for b in batches]

    def test_one_sample_one_epoch_is_one_step(self, pairs, run_config, model_config):
        trainer = Trainer(init_weights(model_config, seed=0), dataclasses.replace(run_config.train, max_epochs=1, lr_halve_epoch=1))
        log = trainer.fit(pairs[:1])
        assert trainer.state.step == 1
        assert len(log.records) == 1 and log.records[0].epoch == 1

    def test_zero_learning_rate_leaves_weights_unchanged(self, pairs, run_config, model_config):
        weights = init_weights(model_config, seed=0)
        before = arrays_of(weights)
        Trainer(weights, dataclasses.replace(run_config.train, lr=0.0)).fit(pairs)
        for name, value in arrays_of(weights).items():
            np.testing.assert_array_equal(value, before[name])

    def test_micro_batches_accumulate_to_the_batch_gradient(self, pairs, run_config, model_config):
        face, bg, labels = stack_pairs(pairs)
        batch = np.arange(4)
        grads = []
        for micro in (1, 4):
            weights = init_weights(model_config, seed=0, dtype=np.float64)
            trainer = Trainer(weights, dataclasses.replace(run_config.train, micro_batch=micro))
            trainer._accumulate(face, bg, labels, batch)
            grads.append({name: t.grad for name, t in weights.items()})
        for name in grads[0]:
            np.testing.assert_allclose(grads[0][name], grads[1][name], rtol=1e-9, atol=1e-12)

    def test_loss_decreases(self, pairs, run_config, model_config):
        cfg = dataclasses.replace(run_config.train, max_epochs=5, lr_halve_epoch=5)
        log = Trainer(init_weights(model_config, seed=0), cfg).fit(pairs)
        overall = log.column("L_overall")
        assert overall[-1] < overall[0]
        background = log.column("L_bg")
        assert all(later <= earlier for earlier, later in zip(background, background[1:]))
        assert background[-1] < background[0]

    def test_nan_weight_aborts_with_epoch_and_batch(self, pairs, run_config, model_config):
        weights = init_weights(model_config, seed=0)
        weights["patch_embed.weight"].data[0, 0] = np.nan
        trainer = Trainer(weights, run_config.train)
        with pytest.raises(NumericError) as exc:
            trainer.fit(pairs)
        assert exc.value.where.startswith("epoch 1 batch 0 (")
        assert "epoch 1 batch 0" in str(exc.value)
        assert trainer.log.records == []

    def test_same_seed_gives_identical_checkpoints(self, tmp_path, pairs, run_config, model_config):
        paths = []
        for run in ("a", "b"):
            trainer = Trainer(init_weights(model_config, seed=11), run_config.train)
            trainer.fit(pairs)
            paths.append(trainer.save_checkpoint(tmp_path / f"{run}.trpg"))
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_resume_matches_uninterrupted_training(self, tmp_path, pairs, run_config, model_config):
        straight = Trainer(init_weights(model_config, seed=3), run_config.train)
        straight.fit(pairs)

        first = Trainer(init_weights(model_config, seed=3), run_config.train)
        first.fit(pairs, epochs=1)
        path = first.save_checkpoint(tmp_path / "epoch1.trpg")
        resumed = Trainer.resume(path, model_config, run_config.train)
        assert resumed.epoch == 1 and resumed.state.step == first.state.step
        log = resumed.fit(pairs)
        assert [r.epoch for r in log.records] == [2, 3]

        for name, value in arrays_of(straight.weights).items():
            np.testing.assert_array_equal(resumed.weights[name].data, value)
        for name in straight.state.m:
            np.testing.assert_array_equal(resumed.state.m[name], straight.state.m[name])
            np.testing.assert_array_equal(resumed.state.v[name], straight.state.v[name])

    def test_resume_needs_optimizer_state(self, tmp_path, model_config, run_config):
        path = save_weights(init_weights(model_config, seed=0), tmp_path / "weights_only.trpg")
        with pytest.raises(CheckpointError):
            Trainer.resume(path, model_config, run_config.train)

    def test_empty_dataset(self, model_config, run_config):
        with pytest.raises(ProtocolError):
            Trainer(init_weights(model_config, seed=0), run_config.train).fit([])


class TestTrainFunction:
    def test_trains_in_place_and_writes_checkpoint(self, tmp_path, pairs, run_config, model_config):
        weights = init_weights(model_config, seed=0)
        before = weights["head_combined.bias"].data.copy()
        trained, log = train(weights, pairs, run_config.train, checkpoint=tmp_path / "final.trpg")
        assert trained is weights
        assert len(log.records) == run_config.train.max_epochs
        assert not np.array_equal(trained["head_combined.bias"].data, before)
        assert (tmp_path / "final.trpg").exists()

    def test_checkpoint_state_layout(self, pairs, run_config, model_config):
        trainer = Trainer(init_weights(model_config, seed=0), run_config.train)
        trainer.fit(pairs, epochs=1)
        arrays = trainer.checkpoint_arrays()
        assert isinstance(arrays, OrderedDict)
        assert arrays["train.epoch"][0] == 1
        assert arrays["adam.step"][0] == 3
        assert "adam.m.patch_embed.weight" in arrays and "adam.v.fusion.mlp2.bias" in arrays


class TestShortenedSchedule:
    def test_halving_point_scales(self):
        cfg = shortened_schedule(TrainConfig(), 15)
        assert (cfg.max_epochs, cfg.lr_halve_epoch) == (15, 11)

    def test_single_epoch(self):
        cfg = shortened_schedule(TrainConfig(), 1)
        assert (cfg.max_epochs, cfg.lr_halve_epoch) == (1, 1)
