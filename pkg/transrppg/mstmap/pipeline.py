"""Trace set -> model-ready normalized maps."""
import dataclasses
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.conf import ColorConfig, ModelConfig
from ..exceptions import DimensionError
from ..utils.logging import get_logger
from .color import color_transform
from .maps import MSTMap, build_mstmaps, clip_traces, concat_maps, normalize_rows, resample_traces
from .traces import RegionTraceSet

logger = get_logger(__name__)

TARGET_FPS = 30.0


@dataclass(frozen=True)
class SamplePair:
    """Normalized face map and optional background map of one labeled sample."""

    subject_id: str
    label: int
    face: np.ndarray
    bg: Optional[np.ndarray]


def build_normalized_maps(
    traces: RegionTraceSet,
    color: ColorConfig,
    target_frames: int,
    target_fps: float = TARGET_FPS,
) -> Tuple[MSTMap, Optional[MSTMap]]:
    """Clip to target_frames / target_fps seconds, resample, build, color-transform, normalize."""
    clipped = clip_traces(traces, duration_s=target_frames / target_fps)
    resampled = resample_traces(clipped, target_fps=target_fps, target_frames=target_frames)
    face, bg = build_mstmaps(resampled)
    face = normalize_rows(color_transform(face, color.space, color, fps=target_fps))
    if bg is not None:
        bg = normalize_rows(color_transform(bg, color.space, color, fps=target_fps))
    return face, bg


def prepare_sample(traces: RegionTraceSet, color: ColorConfig, model: ModelConfig) -> SamplePair:
    """Maps shaped for `model`, honoring its background mode."""
    face, bg = build_normalized_maps(traces, color, target_frames=model.W)
    if model.bg_mode == "concat":
        if bg is None:
            raise DimensionError("prepare_sample (concat needs background regions)", face.values.shape)
        face, bg = concat_maps(face, bg), None
    elif model.bg_mode == "none":
        bg = None
    elif bg is None:
        raise DimensionError("prepare_sample (two-branch model needs background regions)", face.values.shape)

    expected = (model.face_input_height, model.W, model.C)
    if face.values.shape != expected:
        raise DimensionError("prepare_sample face map", expected, face.values.shape)
    if bg is not None and bg.values.shape != (model.H_bg, model.W, model.C):
        raise DimensionError("prepare_sample background map", (model.H_bg, model.W, model.C), bg.values.shape)
    return SamplePair(
        subject_id=traces.subject_id,
        label=traces.label,
        face=face.values,
        bg=None if bg is None else bg.values,
    )


def prepare_dataset(
    dataset: Sequence[RegionTraceSet], color: ColorConfig, model: ModelConfig
) -> List[SamplePair]:
    pairs = [prepare_sample(t, color, model) for t in dataset]
    logger.debug(f"Prepared {len(pairs)} map pairs ({model.bg_mode}, {color.space}, T={model.W})")
    return pairs


def background_only_config(model: ModelConfig) -> ModelConfig:
    """Single-branch config whose face branch reads the background map."""
    return dataclasses.replace(model, H_face=model.H_bg, use_bg_branch=False, concat_bg_map=False)


def background_only(pairs: Sequence[SamplePair]) -> List[SamplePair]:
    """Swap each background map into the face slot and drop the second branch input."""
    swapped = []
    for pair in pairs:
        if pair.bg is None:
            raise DimensionError("background_only (sample has no background map)", pair.face.shape)
        swapped.append(dataclasses.replace(pair, face=pair.bg, bg=None))
    return swapped
