import dataclasses

import numpy as np
import pytest

from conftest import small_model_config
from transrppg.core.conf import ModelConfig
from transrppg.exceptions import DimensionError, MapBuildError, NumericError
from transrppg.model import embed, encoder_layer, init_weights, sequentialize, token_grid
from transrppg.model.weights import LayerWeights
from transrppg.mstmap.maps import MSTMap
from transrppg.tensor import Tensor


def count_placements(height, width, p_h, p_w, s_h, s_w):
    """Slide the window explicitly and count where it fits."""
    count = 0
    top = 0
    while top + p_h <= height:
        left = 0
        while left + p_w <= width:
            count += 1
            left += s_w
        top += s_h
    return count


def zero_layer(d: int, hidden: int, dtype=np.float64) -> LayerWeights:
    def z(*shape):
        return Tensor(np.zeros(shape, dtype=dtype))

    return LayerWeights(
        ln1_gain=z(d), ln1_bias=z(d), qkv=z(d, 3 * d), proj_weight=z(d, d), proj_bias=z(d),
        ln2_gain=z(d), ln2_bias=z(d), mlp1_weight=z(d, hidden), mlp1_bias=z(hidden),
        mlp2_weight=z(hidden, d), mlp2_bias=z(d),
    )


class TestTokenCounts:
    def test_default_face_and_background(self):
        cfg = ModelConfig()
        assert token_grid(63, 300, cfg) == (61, 19)
        assert token_grid(15, 300, cfg) == (13, 19)

    def test_exact_tiling(self):
        cfg = ModelConfig(P_H=3, P_W=30, S_H=3, S_W=30)
        seq = sequentialize(np.zeros((6, 60, 3)), cfg)
        assert seq.count == 4 and seq.grid == (2, 2)

    def test_random_geometries_match_sliding_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            height, width = int(rng.integers(1, 20)), int(rng.integers(1, 40))
            p_h, p_w = int(rng.integers(1, height + 1)), int(rng.integers(1, width + 1))
            s_h, s_w = int(rng.integers(1, 5)), int(rng.integers(1, 9))
            cfg = ModelConfig(H_face=height, W=width, C=1, P_H=p_h, P_W=p_w, S_H=s_h, S_W=s_w)
            expected = count_placements(height, width, p_h, p_w, s_h, s_w)
            n_h, n_w = token_grid(height, width, cfg)
            assert n_h * n_w == expected
            assert cfg.tokens_for(height) == expected
            assert sequentialize(np.zeros((height, width, 1)), cfg).count == expected


class TestSequentialize:
    def test_patch_content_and_order(self):
        cfg = ModelConfig(P_H=2, P_W=2, S_H=1, S_W=2)
        values = np.arange(3 * 4 * 2, dtype=np.float64).reshape(3, 4, 2)
        seq = sequentialize(values, cfg)
        assert seq.grid == (2, 2)
        np.testing.assert_array_equal(seq.patches[1], values[0:2, 2:4].reshape(-1))
        np.testing.assert_array_equal(seq.patches[2], values[1:3, 0:2].reshape(-1))

    def test_batched_matches_single(self):
        cfg = small_model_config()
        maps = np.random.default_rng(1).uniform(size=(2, 7, 60, 3))
        batched = sequentialize(maps, cfg)
        np.testing.assert_array_equal(batched.patches[1], sequentialize(maps[1], cfg).patches)

    def test_unnormalized_map_rejected(self):
        mst = MSTMap(values=np.ones((7, 60, 3)), subset_index=tuple(range(1, 8)))
        with pytest.raises(MapBuildError):
            sequentialize(mst, small_model_config())

    def test_patch_larger_than_map(self):
        with pytest.raises(DimensionError):
            sequentialize(np.zeros((2, 60, 3)), small_model_config())


class TestEmbed:
    def test_zero_patches_and_embeddings(self):
        cfg = small_model_config()
        weights = init_weights(cfg, seed=0, dtype=np.float64)
        weights["face.pos"].data[:] = 0.0
        weights["face.cls"].data[:] = np.arange(cfg.D)
        z = embed(np.zeros((cfg.n_face_tokens, cfg.patch_dim)), "face", weights)
        assert z.shape == (cfg.n_face_tokens + 1, cfg.D)
        np.testing.assert_array_equal(z.data[0], np.arange(cfg.D))
        np.testing.assert_array_equal(z.data[1:], 0.0)

    def test_without_class_token_or_positions(self):
        cfg = small_model_config(use_class_token=False, use_pos_embed=False)
        weights = init_weights(cfg, seed=0)
        z = embed(np.ones((2, cfg.n_face_tokens, cfg.patch_dim)), "face", weights)
        assert z.shape == (2, cfg.n_face_tokens, cfg.D)

    def test_patch_dim_checked(self):
        cfg = small_model_config()
        with pytest.raises(DimensionError):
            embed(np.zeros((cfg.n_face_tokens, cfg.patch_dim + 1)), "face", init_weights(cfg, seed=0))


class TestEncoderLayer:
    def test_output_shape_matches_input(self):
        cfg = small_model_config()
        weights = init_weights(cfg, seed=0)
        for tokens in (1, 5, 16):
            z = Tensor(np.random.default_rng(tokens).normal(size=(2, tokens, cfg.D)).astype(np.float32))
            out, attention = encoder_layer(z, weights.encoder_layers()[0], cfg)
            assert out.shape == z.shape
            assert attention.shape == (2, cfg.heads, tokens, tokens)

    def test_all_zero_weights_is_identity(self):
        cfg = small_model_config()
        z = Tensor(np.random.default_rng(2).normal(size=(3, 11, cfg.D)))
        out, _ = encoder_layer(z, zero_layer(cfg.D, cfg.D * cfg.mlp_ratio), cfg)
        np.testing.assert_array_equal(out.data, z.data)

    def test_bias_path_constant(self):
        # Zero matrices leave only the bias path: output = input + proj bias + mlp2 bias.
        cfg = small_model_config()
        lw = zero_layer(cfg.D, cfg.D * cfg.mlp_ratio)
        lw.proj_bias.data[:] = 0.25
        lw.mlp2_bias.data[:] = -1.0
        lw.mlp1_bias.data[:] = 3.0
        z = Tensor(np.random.default_rng(3).normal(size=(1, 4, cfg.D)))
        out, _ = encoder_layer(z, lw, cfg)
        np.testing.assert_allclose(out.data, z.data - 0.75)

    def test_single_token_single_head_by_hand(self):
        cfg = dataclasses.replace(small_model_config(), D=2, heads=1, mlp_ratio=1)
        lw = zero_layer(2, 2)
        lw.ln1_gain.data[:] = 1.0
        lw.qkv.data[:] = np.array([[1.0, 0.0, 2.0, 0.0, 1.0, 2.0], [0.0, 1.0, 0.0, 3.0, -1.0, 0.5]])
        lw.proj_weight.data[:] = np.eye(2)
        x = np.array([[[0.3, -0.7]]])
        out, attention = encoder_layer(Tensor(x), lw, cfg)
        np.testing.assert_array_equal(attention, [[[[1.0]]]])
        # LN of (0.3, -0.7) is (1, -1) up to epsilon; with one token attention returns V itself.
        y = (x - x.mean()) / np.sqrt(x.var() + cfg.ln_epsilon)
        v = y @ lw.qkv.data[:, 4:6]
        np.testing.assert_allclose(out.data, x + v, atol=1e-12)

    def test_unbatched_input(self):
        cfg = small_model_config()
        weights = init_weights(cfg, seed=0)
        z = Tensor(np.zeros((5, cfg.D), dtype=np.float32))
        out, attention = encoder_layer(z, weights.encoder_layers()[0], cfg)
        assert out.shape == (5, cfg.D) and attention.shape == (cfg.heads, 5, 5)

    def test_width_mismatch(self):
        cfg = small_model_config()
        with pytest.raises(DimensionError) as exc:
            encoder_layer(Tensor(np.zeros((1, 3, cfg.D + 1))), zero_layer(cfg.D, 2 * cfg.D), cfg, layer_index=4)
        assert "layer 4" in str(exc.value)

    def test_nan_weight_names_the_layer(self):
        cfg = small_model_config()
        lw = zero_layer(cfg.D, cfg.D * cfg.mlp_ratio)
        lw.mlp1_weight.data[0, 0] = np.nan
        z = Tensor(np.random.default_rng(4).normal(size=(1, 4, cfg.D)))
        with pytest.raises(NumericError) as exc:
            encoder_layer(z, lw, cfg, layer_index=2)
        assert exc.value.where.startswith("layer 2 (")
        assert "layer 2" in str(exc.value)
