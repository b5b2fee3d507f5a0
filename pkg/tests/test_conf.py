import pytest

from transrppg.core.conf import (
    ModelConfig,
    RunConfig,
    SynthConfig,
    TrainConfig,
    load_config,
    parse_config_text,
)
from transrppg.exceptions import ConfigurationError


class TestDefaults:
    def test_default_run_config_is_valid(self):
        RunConfig().validate()

    def test_default_token_counts(self):
        cfg = ModelConfig()
        assert cfg.n_face_tokens == 1159
        assert cfg.n_bg_tokens == 247
        assert cfg.per_head_dim == 32

    def test_seed_offsets(self):
        cfg = RunConfig(seed=7)
        assert cfg.synth.seed == 7
        assert cfg.model_seed() == 1007
        assert cfg.model_seed(fold=2) == 1027
        assert cfg.train_seed() == 2007
        assert cfg.train_seed(fold=3) == 2037


class TestParsing:
    def test_sections_comments_and_tuples(self):
        cfg = parse_config_text(
            """
            # comment line
            seed = 11
            synth.heart_rate_range = 60, 90   # inline comment
            model.use_pos_embed = false
            train.batch_size = 4
            eval.ablation_values = 3, 5
            """
        )
        assert cfg.seed == 11
        assert cfg.synth.seed == 11
        assert cfg.train.seed == 2011
        assert cfg.synth.heart_rate_range == (60.0, 90.0)
        assert cfg.model.use_pos_embed is False
        assert cfg.train.batch_size == 4
        assert cfg.eval.ablation_values == ("3", "5")

    @pytest.mark.parametrize("line,key", [("model.depth = 3", "model.depth"), ("optim.lr = 1", "optim.lr"), ("lr = 1", "lr")])
    def test_unknown_keys_are_errors(self, line, key):
        with pytest.raises(ConfigurationError) as exc:
            parse_config_text(line)
        assert exc.value.key == key

    def test_missing_equals_sign(self):
        with pytest.raises(ConfigurationError) as exc:
            parse_config_text("seed 3", source="run.conf")
        assert exc.value.key == "run.conf:1"

    def test_bad_value_type(self):
        with pytest.raises(ConfigurationError) as exc:
            parse_config_text("train.batch_size = ten")
        assert exc.value.key == "train.batch_size"

    def test_invalid_heart_rate_range_names_key(self):
        with pytest.raises(ConfigurationError) as exc:
            parse_config_text("synth.heart_rate_range = 120, 60")
        assert "synth.heart_rate_range" in str(exc.value)

    def test_channel_count_must_match_color_space(self):
        with pytest.raises(ConfigurationError) as exc:
            parse_config_text("color.space = G")
        assert exc.value.key == "model.C"
        cfg = parse_config_text("color.space = G\nmodel.C = 1")
        assert cfg.color.channels == 1


class TestValidation:
    def test_heads_must_divide_width(self):
        with pytest.raises(ConfigurationError):
            ModelConfig(D=100, heads=3).validate()

    def test_concat_mode_heights(self):
        cfg = ModelConfig().with_bg_mode("concat")
        assert cfg.bg_mode == "concat"
        assert cfg.face_input_height == 78
        assert cfg.n_bg_tokens == 0
        cfg.validate()

    def test_unknown_bg_mode(self):
        with pytest.raises(ConfigurationError):
            ModelConfig().with_bg_mode("both")

    def test_halving_epoch_in_range(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(max_epochs=10, lr_halve_epoch=11).validate()

    def test_mask_attenuation_range(self):
        with pytest.raises(ConfigurationError):
            SynthConfig(mask_attenuation=1.5).validate()


class TestLoadConfig:
    def test_defaults_without_path(self):
        cfg = load_config(seed=5)
        assert cfg.seed == 5 and cfg.synth.seed == 5

    def test_seed_argument_overrides_file(self, config_file):
        assert load_config(config_file).seed == 3
        cfg = load_config(config_file, seed=9)
        assert cfg.seed == 9
        assert cfg.train.seed == 2009
        assert cfg.model.D == 12
