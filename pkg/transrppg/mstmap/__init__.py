"""MSTmap construction from per-region color traces."""
from .color import color_transform
from .io import read_map, write_map, write_map_image
from .maps import (
    MSTMap,
    build_mstmaps,
    clip_traces,
    concat_maps,
    enumerate_subsets,
    normalize_rows,
    resample_traces,
)
from .pipeline import (
    SamplePair,
    background_only,
    background_only_config,
    build_normalized_maps,
    prepare_dataset,
    prepare_sample,
)
from .traces import BONAFIDE, MASK, RegionTraceSet, read_traces, write_traces

__all__ = [
    "BONAFIDE",
    "MASK",
    "MSTMap",
    "RegionTraceSet",
    "SamplePair",
    "background_only",
    "background_only_config",
    "build_mstmaps",
    "build_normalized_maps",
    "clip_traces",
    "color_transform",
    "concat_maps",
    "enumerate_subsets",
    "normalize_rows",
    "prepare_dataset",
    "prepare_sample",
    "read_map",
    "read_traces",
    "resample_traces",
    "write_map",
    "write_map_image",
    "write_traces",
]
