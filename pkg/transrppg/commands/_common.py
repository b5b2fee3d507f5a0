"""Helpers shared by subcommand handlers."""
import argparse
from pathlib import Path
from typing import List

from ..core.conf import RunConfig, load_config
from ..decorators.commands import arg
from ..mstmap.pipeline import SamplePair, prepare_dataset
from ..synth.generator import load_dataset
from ..utils.logging import get_logger

logger = get_logger(__name__)

DATA_ARGUMENT = arg("--data", required=True, help="manifest.txt written by `gen`")


def run_config(args: argparse.Namespace) -> RunConfig:
    return load_config(args.config, seed=args.seed)


def out_dir(args: argparse.Namespace) -> Path:
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_pairs(manifest: str, cfg: RunConfig) -> List[SamplePair]:
    dataset = load_dataset(manifest)
    logger.info(f"📊 Loaded {len(dataset)} samples from {manifest}")
    return prepare_dataset(dataset, cfg.color, cfg.model)


def write_lines(path: Path, lines: List[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"✅ Wrote {path}")
    return path
