"""Synthetic labeled region traces with a pulse on bonafide faces only."""
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from ..core.conf import SynthConfig
from ..exceptions import TraceFormatError
from ..mstmap.traces import BONAFIDE, MASK, RegionTraceSet, read_traces, write_traces
from ..utils.logging import get_logger, log_execution

logger = get_logger(__name__)

# sin(x) + 0.5 sin(2x) peaks at x = pi/3 with value 3*sqrt(3)/4.
_WAVEFORM_PEAK = 3.0 * math.sqrt(3.0) / 4.0

# Relative pulsatile strength per R, G, B channel (green strongest).
PULSE_CHANNEL_WEIGHTS = np.array([0.33, 0.77, 0.53])
FACE_BASELINE_RGB = np.array([150.0, 110.0, 95.0])
DRIFT_FREQUENCY_HZ = (0.05, 0.3)

MANIFEST_NAME = "manifest.txt"


def pulse_waveform(t: Union[float, np.ndarray], hr: float) -> Union[float, np.ndarray]:
    """Fundamental at hr/60 Hz plus a half-amplitude second harmonic, peak 1."""
    phase = 2.0 * np.pi * (hr / 60.0) * np.asarray(t, dtype=np.float64)
    value = (np.sin(phase) + 0.5 * np.sin(2.0 * phase)) / _WAVEFORM_PEAK
    return float(value) if np.ndim(value) == 0 else value


def _subject_stream(cfg: SynthConfig, subject: int) -> Tuple[np.random.Generator, float]:
    rng = np.random.default_rng(cfg.seed + subject)
    return rng, float(rng.uniform(*cfg.heart_rate_range))


def subject_heart_rate(cfg: SynthConfig, subject: int) -> float:
    """Heart rate in bpm shared by every bonafide sample of `subject` (0-based)."""
    return _subject_stream(cfg, subject)[1]


def _subject_samples(cfg: SynthConfig, subject: int) -> List[RegionTraceSet]:
    rng, hr = _subject_stream(cfg, subject)
    subject_id = f"S{subject + 1:02d}"
    frames = int(round(cfg.duration_s * cfg.fps))
    t = np.arange(frames) / cfg.fps
    n, m = cfg.face_regions, cfg.bg_regions

    face_base = FACE_BASELINE_RGB + rng.normal(0.0, 5.0, size=(n, 3))
    bg_base = rng.uniform(40.0, 200.0, size=(m, 1)) + rng.normal(0.0, 3.0, size=(m, 3))

    samples = []
    for label in (BONAFIDE, MASK):
        attenuation = 1.0 if label == BONAFIDE else cfg.mask_attenuation
        for _ in range(cfg.samples_per_subject_per_class):
            # Every sample draws the same variates in the same order whatever its label.
            onset = rng.uniform(0.0, 60.0 / hr)
            jitter = rng.normal(0.0, cfg.region_phase_jitter, size=(n, 1))
            drift_hz = rng.uniform(*DRIFT_FREQUENCY_HZ)
            drift_phase = rng.uniform(0.0, 2.0 * np.pi)
            drift_gain = rng.uniform(0.8, 1.2, size=3)
            face_noise = rng.normal(0.0, 1.0, size=(n, frames, 3))
            bg_noise = rng.normal(0.0, 1.0, size=(m, frames, 3))

            drift = (
                cfg.illumination_drift_amplitude
                * np.sin(2.0 * np.pi * drift_hz * t + drift_phase)[:, None]
                * drift_gain[None, :]
            )
            pulse = pulse_waveform(t[None, :] + onset + jitter, hr)
            face = (
                face_base[:, None, :]
                + attenuation * cfg.pulse_amplitude * pulse[..., None] * PULSE_CHANNEL_WEIGHTS
                + drift[None]
                + cfg.noise_sigma * face_noise
            )
            bg = bg_base[:, None, :] + drift[None] + cfg.noise_sigma * bg_noise
            samples.append(
                RegionTraceSet(
                    subject_id=subject_id,
                    label=label,
                    fps=cfg.fps,
                    face_traces=np.maximum(face, 0.0),
                    bg_traces=np.maximum(bg, 0.0),
                )
            )
    logger.debug(f"Subject {subject_id}: hr={hr:.1f} bpm, {len(samples)} samples")
    return samples


@log_execution
def generate_dataset(cfg: SynthConfig) -> List[RegionTraceSet]:
    """Per subject, bonafide samples then mask samples; subject s is seeded with seed + s."""
    cfg.validate()
    dataset: List[RegionTraceSet] = []
    for subject in range(cfg.subjects):
        dataset.extend(_subject_samples(cfg, subject))
    logger.info(
        f"📊 Generated {len(dataset)} samples for {cfg.subjects} subjects "
        f"({cfg.samples_per_subject_per_class} per class each)"
    )
    return dataset


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    subject_id: str
    label: int


def sample_filename(t: RegionTraceSet, index: int) -> str:
    kind = "bonafide" if t.label == BONAFIDE else "mask"
    return f"{t.subject_id}_{kind}_{index:02d}.trace"


def write_dataset(dataset: Sequence[RegionTraceSet], out_dir: Union[str, Path]) -> Path:
    """Write one trace file per sample plus `manifest.txt` (`path subject label` per line)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    counters = {}
    lines = []
    for t in dataset:
        key = (t.subject_id, t.label)
        index = counters.get(key, 0)
        counters[key] = index + 1
        name = sample_filename(t, index)
        write_traces(t, out_dir / name)
        lines.append(f"{name} {t.subject_id} {t.label}")
    manifest = out_dir / MANIFEST_NAME
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"✅ Wrote {len(lines)} trace files to {out_dir}")
    return manifest


def read_manifest(path: Union[str, Path]) -> List[ManifestEntry]:
    path = Path(path)
    entries = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) != 3 or tokens[2] not in ("0", "1"):
            raise TraceFormatError(str(path), line_no, "expected 'path subject label'")
        entries.append(ManifestEntry(path=path.parent / tokens[0], subject_id=tokens[1], label=int(tokens[2])))
    return entries


def load_dataset(manifest: Union[str, Path]) -> List[RegionTraceSet]:
    """Read every trace file listed in a manifest, checking subject and label agree."""
    dataset = []
    for entry in read_manifest(manifest):
        traces = read_traces(entry.path)
        if traces.subject_id != entry.subject_id or traces.label != entry.label:
            raise TraceFormatError(str(entry.path), 1, "header disagrees with manifest entry")
        dataset.append(traces)
    return dataset
