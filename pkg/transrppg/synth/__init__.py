"""Synthetic rPPG region-trace datasets."""
from .generator import (
    ManifestEntry,
    generate_dataset,
    load_dataset,
    pulse_waveform,
    read_manifest,
    subject_heart_rate,
    write_dataset,
)

__all__ = [
    "ManifestEntry",
    "generate_dataset",
    "load_dataset",
    "pulse_waveform",
    "read_manifest",
    "subject_heart_rate",
    "write_dataset",
]
