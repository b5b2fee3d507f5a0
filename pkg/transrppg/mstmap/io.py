"""Binary MSTmap export and 8-bit PGM/PPM rendering."""
import struct
from pathlib import Path
from typing import List, Union

import numpy as np

from ..exceptions import MapFormatError
from .maps import MSTMap

MAGIC = b"MSTM"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


def encode_map(mst: MSTMap) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, mst.rows, mst.T, mst.C)
    return header + np.ascontiguousarray(mst.values, dtype="<f4").tobytes()


def decode_map(blob: bytes) -> np.ndarray:
    """Values array (rows x T x C, float32) of an encoded map."""
    if len(blob) < _HEADER.size:
        raise MapFormatError(f"truncated header ({len(blob)} bytes)")
    magic, version, rows, frames, channels = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise MapFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise MapFormatError(f"unsupported version {version}")
    expected = _HEADER.size + 4 * rows * frames * channels
    if len(blob) != expected:
        raise MapFormatError(f"expected {expected} bytes, found {len(blob)}")
    values = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    return values.reshape(rows, frames, channels).astype(np.float32)


def write_map(mst: MSTMap, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_bytes(encode_map(mst))
    return path


def read_map(path: Union[str, Path]) -> np.ndarray:
    return decode_map(Path(path).read_bytes())


def to_bytes_8bit(values: np.ndarray) -> np.ndarray:
    """Scale [0, 1] values by 255 with round-half-up."""
    return np.clip(np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def write_pnm(pixels: np.ndarray, path: Union[str, Path]) -> Path:
    """Binary PGM for 2-D arrays, PPM for H x W x 3 arrays."""
    path = Path(path)
    if pixels.ndim == 2:
        magic = b"P5"
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        magic = b"P6"
    else:
        raise MapFormatError(f"cannot render array of shape {pixels.shape}")
    height, width = pixels.shape[:2]
    header = magic + b"\n%d %d\n255\n" % (width, height)
    path.write_bytes(header + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes())
    return path


def write_map_image(mst: MSTMap, path: Union[str, Path]) -> List[Path]:
    """Render a normalized map: rows down, time across.

    Three-channel maps give one PPM; other channel counts give one PGM per
    channel named `<stem>_c<i>.pgm`.
    """
    path = Path(path)
    pixels = to_bytes_8bit(mst.values)
    if mst.C == 3:
        return [write_pnm(pixels, path.with_suffix(".ppm"))]
    if mst.C == 1:
        return [write_pnm(pixels[..., 0], path.with_suffix(".pgm"))]
    return [
        write_pnm(pixels[..., c], path.with_name(f"{path.stem}_c{c}.pgm"))
        for c in range(mst.C)
    ]
