"""Color-space transforms applied to MSTmap rows before normalization."""
import dataclasses
import math
from typing import Optional

import numpy as np
from scipy import signal

from ..core.conf import COLOR_SPACES, ColorConfig
from ..exceptions import ConfigurationError, MapBuildError
from .maps import MSTMap

# BT.601 full-range RGB -> YUV
YUV_MATRIX = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)

CHROM_PROJECTION = np.array([[3.0, -2.0, 0.0], [1.5, 1.0, -1.5]])
POS_PROJECTION = np.array([[0.0, 1.0, -1.0], [-2.0, 1.0, 1.0]])


def _temporal_normalize(rgb: np.ndarray) -> np.ndarray:
    """Divide each channel by its temporal mean (rows x T x 3); zero means stay zero."""
    mean = rgb.mean(axis=1, keepdims=True)
    return np.divide(rgb, mean, out=np.zeros_like(rgb), where=mean != 0)


def _tune(first: np.ndarray, second: np.ndarray, sign: float) -> np.ndarray:
    """first + sign * (std(first) / std(second)) * second along time."""
    s1 = first.std(axis=-1, keepdims=True)
    s2 = second.std(axis=-1, keepdims=True)
    alpha = np.divide(s1, s2, out=np.zeros_like(s1), where=s2 > 0)
    return first + sign * alpha * second


def _bandpass(x: np.ndarray, fps: float, band: tuple) -> np.ndarray:
    nyquist = 0.5 * fps
    low, high = band[0] / nyquist, min(band[1] / nyquist, 0.99)
    if not 0 < low < high:
        return x
    b, a = signal.butter(3, [low, high], btype="bandpass")
    if x.shape[-1] <= 3 * max(len(a), len(b)):
        return x
    return signal.filtfilt(b, a, x, axis=-1)


def chrom(rgb: np.ndarray, fps: float, options: ColorConfig) -> np.ndarray:
    """Chrominance projection per row; returns rows x T x (1 or 2)."""
    normalized = _temporal_normalize(rgb) - 1.0
    xs = normalized @ CHROM_PROJECTION[0]
    ys = normalized @ CHROM_PROJECTION[1]
    xf = _bandpass(xs, fps, options.bandpass_hz)
    yf = _bandpass(ys, fps, options.bandpass_hz)
    if not options.single_channel:
        return np.stack([xf, yf], axis=-1)
    return _tune(xf, yf, -1.0)[..., None]


def pos(rgb: np.ndarray, fps: float, options: ColorConfig) -> np.ndarray:
    """Plane-orthogonal-to-skin projection with overlap-added sliding windows."""
    rows, frames, _ = rgb.shape
    wlen = min(frames, max(2, int(math.ceil(options.window_s * fps))))
    channels = 1 if options.single_channel else 2
    out = np.zeros((rows, frames, channels))
    for start in range(0, frames - wlen + 1):
        window = _temporal_normalize(rgb[:, start:start + wlen])
        s1 = window @ POS_PROJECTION[0]
        s2 = window @ POS_PROJECTION[1]
        if options.single_channel:
            h = _tune(s1, s2, 1.0)
            out[:, start:start + wlen, 0] += h - h.mean(axis=-1, keepdims=True)
        else:
            out[:, start:start + wlen, 0] += s1 - s1.mean(axis=-1, keepdims=True)
            out[:, start:start + wlen, 1] += s2 - s2.mean(axis=-1, keepdims=True)
    return out


def color_transform(
    mst: MSTMap, space: str, options: Optional[ColorConfig] = None, fps: float = 30.0
) -> MSTMap:
    """Map RGB rows to another color space; the input must not be normalized yet."""
    options = options or ColorConfig(space=space)
    if space not in COLOR_SPACES:
        raise ConfigurationError("color.space", f"unknown space '{space}', expected one of {COLOR_SPACES}")
    if mst.normalized:
        raise MapBuildError("color transforms apply before row normalization")
    if mst.C != 3:
        raise MapBuildError(f"color transforms expect RGB input, got {mst.C} channels")

    rgb = mst.values
    if space == "RGB":
        return mst
    if space == "G":
        green = rgb[..., 1:2]
        values = green.copy() if options.single_channel else np.repeat(green, 3, axis=-1)
    elif space == "YUV":
        values = rgb @ YUV_MATRIX.T
    elif space == "RGBYUV":
        values = np.concatenate([rgb, rgb @ YUV_MATRIX.T], axis=-1)
    elif space == "CHROM":
        values = chrom(rgb, fps, options)
    else:
        values = pos(rgb, fps, options)
    return dataclasses.replace(mst, values=values)
