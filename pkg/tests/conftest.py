"""Shared fixtures: small geometries that keep forward passes fast."""
import numpy as np
import pytest

from transrppg.core.conf import ColorConfig, EvalConfig, ModelConfig, RunConfig, SynthConfig, TrainConfig
from transrppg.mstmap.pipeline import prepare_dataset
from transrppg.mstmap.traces import RegionTraceSet
from transrppg.synth.generator import generate_dataset

# 3 face and 2 background regions over 2 s at 30 fps -> 7x60 and 3x60 maps.
SMALL_CONFIG_TEXT = """\
seed = 3
synth.subjects = 3
synth.samples_per_subject_per_class = 2
synth.duration_s = 2
synth.face_regions = 3
synth.bg_regions = 2
model.H_face = 7
model.H_bg = 3
model.W = 60
model.D = 12
model.heads = 3
model.layers = 1
train.lr = 0.001
train.batch_size = 4
train.max_epochs = 3
train.lr_halve_epoch = 2
"""


def small_model_config(**overrides) -> ModelConfig:
    values = dict(H_face=7, H_bg=3, W=60, C=3, D=12, heads=3, layers=1)
    values.update(overrides)
    return ModelConfig(**values)


def small_run_config(seed: int = 3, **train_overrides) -> RunConfig:
    train = dict(lr=1e-3, batch_size=4, max_epochs=3, lr_halve_epoch=2)
    train.update(train_overrides)
    return RunConfig(
        seed=seed,
        synth=SynthConfig(
            subjects=3, samples_per_subject_per_class=2, duration_s=2.0, face_regions=3, bg_regions=2
        ),
        color=ColorConfig(),
        model=small_model_config(),
        train=TrainConfig(**train),
        eval=EvalConfig(),
    )


def make_traces(
    n: int = 2,
    m: int = 1,
    frames: int = 60,
    fps: float = 30.0,
    label: int = 1,
    subject_id: str = "S01",
    seed: int = 0,
) -> RegionTraceSet:
    rng = np.random.default_rng(seed)
    return RegionTraceSet(
        subject_id=subject_id,
        label=label,
        fps=fps,
        face_traces=rng.uniform(50.0, 200.0, size=(n, frames, 3)),
        bg_traces=rng.uniform(50.0, 200.0, size=(m, frames, 3)),
    )


@pytest.fixture
def run_config() -> RunConfig:
    return small_run_config()


@pytest.fixture
def model_config() -> ModelConfig:
    return small_model_config()


@pytest.fixture
def dataset(run_config):
    return generate_dataset(run_config.synth)


@pytest.fixture
def pairs(dataset, run_config):
    return prepare_dataset(dataset, run_config.color, run_config.model)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(SMALL_CONFIG_TEXT, encoding="utf-8")
    return path
