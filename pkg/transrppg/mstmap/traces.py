"""Per-region color traces and their line-oriented text format."""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np

from ..exceptions import InvalidTraceError, TraceFormatError

BONAFIDE = 1
MASK = 0


@dataclass(frozen=True)
class RegionTraceSet:
    """Mean R,G,B per frame for n face and m background regions of one video.

    face_traces has shape (n, frames, 3) and bg_traces (m, frames, 3).
    """

    subject_id: str
    label: int
    fps: float
    face_traces: np.ndarray
    bg_traces: np.ndarray

    def __post_init__(self) -> None:
        if self.label not in (BONAFIDE, MASK):
            raise InvalidTraceError(f"label must be 0 or 1, got {self.label}")
        if self.fps <= 0:
            raise InvalidTraceError(f"fps must be > 0, got {self.fps}")
        if self.face_traces.ndim != 3 or self.face_traces.shape[0] < 1 or self.face_traces.shape[2] != 3:
            raise InvalidTraceError(f"face traces must be (n>=1, frames, 3), got {self.face_traces.shape}")
        if self.bg_traces.ndim != 3 or self.bg_traces.shape[2] != 3:
            raise InvalidTraceError(f"background traces must be (m, frames, 3), got {self.bg_traces.shape}")
        if self.bg_traces.shape[1] != self.face_traces.shape[1]:
            raise InvalidTraceError(
                f"face and background frame counts differ: {self.face_traces.shape[1]} vs {self.bg_traces.shape[1]}"
            )
        for name, traces in (("face", self.face_traces), ("background", self.bg_traces)):
            if not np.all(np.isfinite(traces)):
                raise InvalidTraceError(f"{name} traces contain non-finite values")
            if traces.size and traces.min() < 0:
                raise InvalidTraceError(f"{name} traces contain negative values")

    @property
    def n(self) -> int:
        return self.face_traces.shape[0]

    @property
    def m(self) -> int:
        return self.bg_traces.shape[0]

    @property
    def frames(self) -> int:
        return self.face_traces.shape[1]

    @property
    def duration_s(self) -> float:
        return self.frames / self.fps


def format_traces(t: RegionTraceSet) -> str:
    """Render a trace set in the text format (values with 6 decimals)."""
    lines = [
        f"subject={t.subject_id} label={t.label} fps={t.fps:g} n={t.n} m={t.m} frames={t.frames}"
    ]
    # (frames, regions * 3), face regions first
    stacked = np.concatenate([t.face_traces, t.bg_traces], axis=0).transpose(1, 0, 2).reshape(t.frames, -1)
    for f, row in enumerate(stacked):
        lines.append(" ".join([str(f)] + [f"{v:.6f}" for v in row]))
    return "\n".join(lines) + "\n"


def write_traces(t: RegionTraceSet, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(format_traces(t), encoding="utf-8")
    return path


def _parse_header(line: str, path: str) -> Dict[str, str]:
    fields: Dict[str, str] = {}
    for token in line.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise TraceFormatError(path, 1, f"malformed header token '{token}'")
        fields[key] = value
    missing = {"subject", "label", "fps", "n", "m", "frames"} - fields.keys()
    if missing:
        raise TraceFormatError(path, 1, f"header missing {sorted(missing)}")
    return fields


def parse_traces(text: str, path: str = "<traces>") -> RegionTraceSet:
    """Parse the text format; errors carry the 1-based line number."""
    lines = text.splitlines()
    if not lines:
        raise TraceFormatError(path, 1, "empty file")
    header = _parse_header(lines[0], path)
    try:
        label = int(header["label"])
        fps = float(header["fps"])
        n, m, frames = int(header["n"]), int(header["m"]), int(header["frames"])
    except ValueError as e:
        raise TraceFormatError(path, 1, f"bad header value: {e}")
    if n < 1 or m < 0 or frames < 1:
        raise TraceFormatError(path, 1, f"need n >= 1, m >= 0, frames >= 1 (got n={n} m={m} frames={frames})")

    width = 3 * (n + m)
    body = [(no, line) for no, line in enumerate(lines[1:], start=2) if line.strip()]
    if len(body) != frames:
        raise TraceFormatError(path, len(lines) + 1, f"expected {frames} frame lines, found {len(body)}")
    values = np.empty((frames, width), dtype=np.float64)
    for f, (line_no, line) in enumerate(body):
        tokens = line.split()
        if len(tokens) != width + 1:
            raise TraceFormatError(path, line_no, f"expected {width + 1} fields, found {len(tokens)}")
        try:
            index = int(tokens[0])
            values[f] = [float(v) for v in tokens[1:]]
        except ValueError as e:
            raise TraceFormatError(path, line_no, f"not a number: {e}")
        if index != f:
            raise TraceFormatError(path, line_no, f"expected frame index {f}, found {index}")

    regions = values.reshape(frames, n + m, 3).transpose(1, 0, 2)
    try:
        return RegionTraceSet(
            subject_id=header["subject"],
            label=label,
            fps=fps,
            face_traces=np.ascontiguousarray(regions[:n]),
            bg_traces=np.ascontiguousarray(regions[n:]),
        )
    except InvalidTraceError as e:
        raise TraceFormatError(path, 1, str(e))


def read_traces(path: Union[str, Path]) -> RegionTraceSet:
    path = Path(path)
    return parse_traces(path.read_text(encoding="utf-8"), path=str(path))
