"""Multi-scale spatio-temporal maps built from region traces."""
import dataclasses
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.interpolate import interp1d

from ..exceptions import MapBuildError
from .traces import RegionTraceSet

MAX_REGIONS = 16


@dataclass(frozen=True)
class MSTMap:
    """A (2^k - 1) x T x C map; row r averages the regions in subset_index[r]."""

    values: np.ndarray
    subset_index: Tuple[int, ...]
    normalized: bool = False

    def __post_init__(self) -> None:
        if self.values.ndim != 3:
            raise MapBuildError(f"map values must be rows x T x C, got shape {self.values.shape}")
        if len(self.subset_index) != self.values.shape[0]:
            raise MapBuildError(
                f"{len(self.subset_index)} subset labels for {self.values.shape[0]} rows"
            )

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    @property
    def C(self) -> int:
        return self.values.shape[2]


def enumerate_subsets(k: int) -> List[int]:
    """Every nonempty bitmask over k regions, ascending (the canonical row order)."""
    if not 1 <= k <= MAX_REGIONS:
        raise MapBuildError(f"region count must be in 1..{MAX_REGIONS}, got {k}")
    return list(range(1, 2 ** k))


def subset_weights(k: int) -> np.ndarray:
    """(2^k - 1) x k matrix whose row r holds 1/|S_r| on the members of S_r."""
    masks = np.array(enumerate_subsets(k))
    members = ((masks[:, None] >> np.arange(k)[None, :]) & 1).astype(np.float64)
    return members / members.sum(axis=1, keepdims=True)


def resample_traces(t: RegionTraceSet, target_fps: float = 30.0, target_frames: int = 300) -> RegionTraceSet:
    """Linearly interpolate every trace onto target_frames samples spanning the original duration."""
    if t.frames < 2:
        raise MapBuildError(f"resampling needs at least 2 frames, got {t.frames}")
    if target_frames < 2:
        raise MapBuildError(f"target_frames must be >= 2, got {target_frames}")
    source = np.arange(t.frames) / t.fps
    grid = np.linspace(source[0], source[-1], target_frames)

    def resample(traces: np.ndarray) -> np.ndarray:
        if traces.shape[0] == 0:
            return np.zeros((0, target_frames, 3))
        out = interp1d(source, traces, axis=1, kind="linear", assume_sorted=True)(grid)
        # Endpoints exactly as recorded.
        out[:, 0] = traces[:, 0]
        out[:, -1] = traces[:, -1]
        return out

    return dataclasses.replace(
        t, fps=float(target_fps), face_traces=resample(t.face_traces), bg_traces=resample(t.bg_traces)
    )


def clip_traces(t: RegionTraceSet, duration_s: float, offset_s: float = 0.0) -> RegionTraceSet:
    """Keep `duration_s` seconds starting at `offset_s`; shorter recordings are kept whole."""
    start = int(round(offset_s * t.fps))
    count = int(round(duration_s * t.fps))
    if start < 0 or count < 2 or start + 2 > t.frames:
        raise MapBuildError(
            f"cannot clip {duration_s}s at {offset_s}s from a {t.frames}-frame recording at {t.fps} fps"
        )
    stop = min(t.frames, start + count)
    if start == 0 and stop == t.frames:
        return t
    return dataclasses.replace(
        t, face_traces=t.face_traces[:, start:stop].copy(), bg_traces=t.bg_traces[:, start:stop].copy()
    )


def _subset_map(traces: np.ndarray) -> MSTMap:
    k = traces.shape[0]
    values = np.einsum("rk,kfc->rfc", subset_weights(k), traces)
    return MSTMap(values=values, subset_index=tuple(enumerate_subsets(k)))


def build_mstmaps(t: RegionTraceSet) -> Tuple[MSTMap, Optional[MSTMap]]:
    """Face and background maps; the background map is None when m = 0."""
    if t.n < 1:
        raise MapBuildError("no face regions")
    face = _subset_map(t.face_traces)
    bg = _subset_map(t.bg_traces) if t.m > 0 else None
    return face, bg


def normalize_rows(mst: MSTMap) -> MSTMap:
    """Min-max scale every row/channel to [0, 1]; constant rows become 0.5."""
    if mst.normalized:
        raise MapBuildError("map is already normalized")
    low = mst.values.min(axis=1, keepdims=True)
    span = mst.values.max(axis=1, keepdims=True) - low
    constant = span <= 0
    scaled = (mst.values - low) / np.where(constant, 1.0, span)
    values = np.where(constant, 0.5, scaled)
    return dataclasses.replace(mst, values=values, normalized=True)


def concat_maps(face: MSTMap, bg: MSTMap) -> MSTMap:
    """Stack the background rows under the face rows (single-branch input).

    Background bitmasks are shifted past the face region bits.
    """
    if face.T != bg.T or face.C != bg.C:
        raise MapBuildError(f"cannot stack maps of shapes {face.values.shape} and {bg.values.shape}")
    n = max(face.subset_index).bit_length()
    return MSTMap(
        values=np.concatenate([face.values, bg.values], axis=0),
        subset_index=face.subset_index + tuple(mask << n for mask in bg.subset_index),
        normalized=face.normalized and bg.normalized,
    )
