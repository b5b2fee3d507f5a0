"""Data subcommands: synthetic traces and MSTmap export."""
import argparse
import dataclasses
from pathlib import Path

from ..decorators.commands import arg, command
from ..mstmap.io import write_map, write_map_image
from ..mstmap.pipeline import build_normalized_maps
from ..mstmap.traces import read_traces
from ..synth.generator import generate_dataset, write_dataset
from ..utils.logging import get_logger
from ._common import out_dir, run_config

logger = get_logger(__name__)


@command(name="gen", help="Generate a synthetic trace dataset and its manifest")
def cmd_gen(args: argparse.Namespace) -> int:
    cfg = run_config(args)
    manifest = write_dataset(generate_dataset(cfg.synth), out_dir(args))
    print(manifest)
    return 0


@command(
    name="mstmap",
    help="Build normalized face and background MSTmaps from one trace file",
    arguments=[
        arg("trace", help="trace file"),
        arg("--space", default=None, help="color space (RGB, G, YUV, RGBYUV, CHROM, POS)"),
        arg("--image", action="store_true", help="also write PPM/PGM renderings"),
    ],
)
def cmd_mstmap(args: argparse.Namespace) -> int:
    cfg = run_config(args)
    color = cfg.color if args.space is None else dataclasses.replace(cfg.color, space=args.space.upper())
    color.validate()
    traces = read_traces(args.trace)
    face, bg = build_normalized_maps(traces, color, target_frames=cfg.model.W)

    target = out_dir(args)
    stem = Path(args.trace).stem
    for name, mst in (("face", face), ("bg", bg)):
        if mst is None:
            continue
        path = write_map(mst, target / f"{stem}_{name}.mstm")
        print(f"{path} {mst.rows}x{mst.T}x{mst.C}")
        if args.image:
            for image in write_map_image(mst, target / f"{stem}_{name}"):
                print(image)
    return 0
