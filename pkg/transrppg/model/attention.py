"""Attention maps recorded by a forward pass, and their export."""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from ..exceptions import DimensionError
from ..mstmap.io import to_bytes_8bit, write_pnm
from ..utils.logging import get_logger

logger = get_logger(__name__)


@dataclass
class AttentionRecord:
    """Per-layer attention, each (batch, heads, tokens, tokens).

    `face` and `bg` hold the shared encoder layers per branch; `fusion` is
    the joint layer over [combined class token; face tokens; bg tokens].
    """

    face: List[np.ndarray]
    bg: List[np.ndarray]
    fusion: np.ndarray
    face_grid: Tuple[int, int]
    bg_grid: Optional[Tuple[int, int]]
    class_token: bool = True

    @property
    def heads(self) -> int:
        return self.fusion.shape[1]

    def all_maps(self) -> List[np.ndarray]:
        return list(self.face) + list(self.bg) + [self.fusion]

    def fusion_row(self, sample: int = 0, head: int = 0) -> np.ndarray:
        """Attention of the combined class token over the fusion sequence.

        Without a class token the rows of every query are averaged.
        """
        if not 0 <= sample < self.fusion.shape[0]:
            raise DimensionError("fusion_row sample", (self.fusion.shape[0],), (sample,))
        matrix = self.fusion[sample, head].astype(np.float64)
        return matrix[0] if self.class_token else matrix.mean(axis=0)


def _token_labels(record: AttentionRecord) -> List[Tuple[str, int, int]]:
    labels = [("class", -1, -1)] if record.class_token else []
    for branch, grid in (("face", record.face_grid), ("bg", record.bg_grid)):
        if grid is None:
            continue
        labels.extend((branch, r, c) for r in range(grid[0]) for c in range(grid[1]))
    return labels


def _heatmap(row: np.ndarray, record: AttentionRecord) -> np.ndarray:
    """Face token grid stacked over the bg token grid, scaled to the row maximum."""
    offset = 1 if record.class_token else 0
    n_face = record.face_grid[0] * record.face_grid[1]
    image = row[offset:offset + n_face].reshape(record.face_grid)
    if record.bg_grid is not None:
        bg = row[offset + n_face:].reshape(record.bg_grid)
        image = np.concatenate([image, bg], axis=0)
    peak = image.max()
    return to_bytes_8bit(image / peak if peak > 0 else image)


def export_attention(
    record: AttentionRecord, out_dir: Union[str, Path], sample: int = 0, stem: str = "attention"
) -> List[Path]:
    """Write one PGM heatmap and one CSV per fusion head."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = _token_labels(record)
    written = []
    for head in range(record.heads):
        row = record.fusion_row(sample, head)
        if row.shape[0] != len(labels):
            raise DimensionError("export_attention row", (len(labels),), row.shape)
        csv_path = out_dir / f"{stem}_head{head}.csv"
        lines = ["index,branch,grid_row,grid_col,weight"]
        lines += [
            f"{i},{branch},{r},{c},{value:.9e}" for i, ((branch, r, c), value) in enumerate(zip(labels, row))
        ]
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(csv_path)
        written.append(write_pnm(_heatmap(row, record), out_dir / f"{stem}_head{head}.pgm"))
        logger.debug(f"Head {head}: {row.shape[0]} weights, sum={row.sum():.6f}")
    logger.info(f"✅ Exported attention for {record.heads} heads to {out_dir}")
    return written
