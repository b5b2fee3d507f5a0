import filecmp
import logging

import pytest

from transrppg.cli import main


@pytest.fixture
def generated(tmp_path, config_file):
    out = tmp_path / "data"
    assert main(["gen", "--config", str(config_file), "--out", str(out)]) == 0
    return out / "manifest.txt"


class TestParams:
    def test_default_budget(self, capsys):
        assert main(["params"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert "total_without_pos_embed=547488" in lines
        assert "encoder=446976" in lines and "fusion=74496" in lines
        assert any(line.startswith("flops_total=") for line in lines)


class TestGen:
    def test_writes_traces_and_manifest(self, generated):
        files = sorted(p.name for p in generated.parent.iterdir())
        assert len(files) == 13
        assert "manifest.txt" in files
        assert len(generated.read_text().splitlines()) == 12

    def test_rerun_is_byte_identical(self, tmp_path, config_file, generated):
        again = tmp_path / "again"
        assert main(["gen", "--config", str(config_file), "--out", str(again)]) == 0
        for path in generated.parent.iterdir():
            assert (again / path.name).read_bytes() == path.read_bytes()

    def test_seed_flag_changes_the_data(self, tmp_path, config_file, generated):
        other = tmp_path / "other"
        assert main(["gen", "--config", str(config_file), "--seed", "4", "--out", str(other)]) == 0
        first = sorted(generated.parent.glob("*.trace"))[0]
        assert (other / first.name).read_bytes() != first.read_bytes()


class TestConfigErrors:
    def test_invalid_heart_rate_range(self, tmp_path, caplog):
        bad = tmp_path / "bad.conf"
        bad.write_text("synth.heart_rate_range = 120, 60\n")
        with caplog.at_level(logging.ERROR):
            assert main(["gen", "--config", str(bad), "--out", str(tmp_path / "out")]) == 2
        assert "synth.heart_rate_range" in caplog.text
        assert not (tmp_path / "out" / "manifest.txt").exists()

    def test_unknown_key(self, tmp_path):
        bad = tmp_path / "bad.conf"
        bad.write_text("model.depth = 6\n")
        assert main(["params", "--config", str(bad)]) == 2

    def test_unknown_log_level(self):
        assert main(["params", "--log-level", "LOUD"]) == 2

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit):
            main([])


class TestMstmap:
    def test_green_gives_one_channel(self, tmp_path, config_file, generated, capsys):
        trace = sorted(generated.parent.glob("*.trace"))[0]
        out = tmp_path / "maps"
        assert main(["mstmap", str(trace), "--space", "G", "--config", str(config_file), "--out", str(out), "--image"]) == 0
        printed = capsys.readouterr().out
        assert "7x60x1" in printed and "3x60x1" in printed
        assert (out / f"{trace.stem}_face.mstm").exists()
        assert (out / f"{trace.stem}_face.pgm").exists()

    def test_missing_trace_file(self, tmp_path, config_file):
        assert main(["mstmap", str(tmp_path / "nope.trace"), "--config", str(config_file), "--out", str(tmp_path)]) == 1


class TestTrainAndEval:
    def test_train_then_eval(self, tmp_path, config_file, generated, capsys):
        run = tmp_path / "run"
        common = ["--config", str(config_file), "--out", str(run)]
        assert main(["train", "--data", str(generated), "--epochs", "2"] + common) == 0
        log_lines = (run / "train_log.txt").read_text().splitlines()
        assert [line.split()[0] for line in log_lines] == ["epoch=1", "epoch=2"]

        capsys.readouterr()
        checkpoint = run / "checkpoint.trpg"
        assert main(["eval", "--data", str(generated), "--checkpoint", str(checkpoint), "--threshold", "0.5"] + common) == 0
        metrics = (run / "metrics.txt").read_text().strip()
        assert metrics.startswith("auc=") and "hter=" in metrics and "hter=na" not in metrics
        assert capsys.readouterr().out.strip() == metrics

    def test_resume_continues_the_log(self, tmp_path, config_file, generated):
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(["train", "--data", str(generated), "--config", str(config_file), "--out", str(first), "--epochs", "1"]) == 0
        assert main(
            ["train", "--data", str(generated), "--config", str(config_file), "--out", str(second),
             "--resume", str(first / "checkpoint.trpg")]
        ) == 0
        epochs = [line.split()[0] for line in (second / "train_log.txt").read_text().splitlines()]
        assert epochs == ["epoch=2", "epoch=3"]

    def test_corrupt_checkpoint(self, tmp_path, config_file, generated):
        bad = tmp_path / "bad.trpg"
        bad.write_bytes(b"not a checkpoint")
        args = ["eval", "--data", str(generated), "--checkpoint", str(bad), "--config", str(config_file), "--out", str(tmp_path)]
        assert main(args) == 1


class TestLoso:
    def test_writes_pooled_and_fold_metrics(self, tmp_path, config_file, generated):
        out = tmp_path / "loso"
        args = ["loso", "--data", str(generated), "--epochs", "1", "--config", str(config_file), "--out", str(out)]
        assert main(args) == 0
        lines = (out / "metrics.txt").read_text().splitlines()
        assert len(lines) == 4
        assert sorted(p.name for p in (out / "folds").iterdir()) == [
            "S01_train_log.txt",
            "S02_train_log.txt",
            "S03_train_log.txt",
        ]

    def test_same_seed_gives_identical_metrics_files(self, tmp_path, config_file, generated):
        outs = [tmp_path / "first", tmp_path / "second"]
        for out in outs:
            args = ["loso", "--data", str(generated), "--epochs", "1", "--config", str(config_file), "--out", str(out)]
            assert main(args) == 0
        names = ["metrics.txt"] + [f"folds/S0{i}_train_log.txt" for i in (1, 2, 3)]
        match, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], names, shallow=False)
        assert (mismatch, errors) == ([], [])
        assert match == names


@pytest.mark.slow
def test_gradcheck_passes(capsys):
    assert main(["gradcheck"]) == 0
    assert "worst_rel_err=" in capsys.readouterr().out


class TestOtherCommands:
    def test_attention_export(self, tmp_path, config_file, generated):
        trace = sorted(generated.parent.glob("*.trace"))[0]
        out = tmp_path / "attn"
        assert main(["attn", str(trace), "--config", str(config_file), "--out", str(out)]) == 0
        assert sorted(p.name for p in out.glob("*.csv")) == [f"attention_head{h}.csv" for h in range(3)]

    def test_ablation_csv(self, tmp_path, config_file, generated):
        out = tmp_path / "ablate"
        args = ["ablate", "--data", str(generated), "--axis", "pos_embed", "--values", "false", "--epochs", "1"]
        assert main(args + ["--config", str(config_file), "--out", str(out)]) == 0
        lines = (out / "ablation_pos_embed.csv").read_text().splitlines()
        assert lines[0] == "axis,value,auc,eer,ffr"
        assert lines[1].startswith("pos_embed,false,")

    def test_unknown_ablation_axis(self, tmp_path, config_file, generated):
        args = ["ablate", "--data", str(generated), "--axis", "dropout", "--config", str(config_file), "--out", str(tmp_path)]
        assert main(args) == 1

    def test_cross_population(self, tmp_path, config_file, generated):
        out = tmp_path / "cross"
        args = ["cross", "--train-data", str(generated), "--test-data", str(generated), "--epochs", "1"]
        assert main(args + ["--config", str(config_file), "--out", str(out)]) == 0
        assert (out / "cross_metrics.txt").read_text().startswith("auc=")
