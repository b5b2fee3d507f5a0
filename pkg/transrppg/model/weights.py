"""Learnable parameters, their initialization, counting and checkpoint format."""
import struct
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
from scipy import stats

from ..core.conf import ModelConfig
from ..exceptions import CheckpointError, DimensionError
from ..tensor import DEFAULT_DTYPE, Tensor

LAYER_PARAMS = (
    "ln1.gain",
    "ln1.bias",
    "qkv.weight",
    "proj.weight",
    "proj.bias",
    "ln2.gain",
    "ln2.bias",
    "mlp1.weight",
    "mlp1.bias",
    "mlp2.weight",
    "mlp2.bias",
)


@dataclass(frozen=True)
class LayerWeights:
    """One pre-norm encoder layer: LN, bias-free QKV, output projection, LN, two-layer MLP."""

    ln1_gain: Tensor
    ln1_bias: Tensor
    qkv: Tensor
    proj_weight: Tensor
    proj_bias: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor
    mlp1_weight: Tensor
    mlp1_bias: Tensor
    mlp2_weight: Tensor
    mlp2_bias: Tensor


def layer_shapes(cfg: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    d, hidden = cfg.D, cfg.D * cfg.mlp_ratio
    return {
        "ln1.gain": (d,),
        "ln1.bias": (d,),
        "qkv.weight": (d, 3 * d),
        "proj.weight": (d, d),
        "proj.bias": (d,),
        "ln2.gain": (d,),
        "ln2.bias": (d,),
        "mlp1.weight": (d, hidden),
        "mlp1.bias": (hidden,),
        "mlp2.weight": (hidden, d),
        "mlp2.bias": (d,),
    }


def layer_prefixes(cfg: ModelConfig) -> List[str]:
    return [f"layers.{i}" for i in range(cfg.layers)] + ["fusion"]


def parameter_shapes(cfg: ModelConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    """Canonical parameter names and shapes, in checkpoint order."""
    d = cfg.D
    shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
    shapes["patch_embed.weight"] = (cfg.patch_dim, d)
    shapes["patch_embed.bias"] = (d,)
    extra = 1 if cfg.use_class_token else 0
    branches = ["face"] + (["bg"] if cfg.use_bg_branch else [])
    for branch in branches:
        if cfg.use_class_token:
            shapes[f"{branch}.cls"] = (1, d)
        if cfg.use_pos_embed:
            tokens = cfg.n_face_tokens if branch == "face" else cfg.n_bg_tokens
            shapes[f"{branch}.pos"] = (tokens + extra, d)
    if cfg.use_class_token:
        shapes["combined.cls"] = (1, d)
    for prefix in layer_prefixes(cfg):
        for name, shape in layer_shapes(cfg).items():
            shapes[f"{prefix}.{name}"] = shape
    for head in ["face"] + (["bg"] if cfg.use_bg_branch else []) + ["combined"]:
        shapes[f"head_{head}.weight"] = (d, 1)
        shapes[f"head_{head}.bias"] = (1,)
    return shapes


class ModelWeights:
    """Named parameter tensors of one model instance."""

    def __init__(self, config: ModelConfig, tensors: "OrderedDict[str, Tensor]"):
        expected = parameter_shapes(config)
        if list(tensors) != list(expected):
            missing = sorted(set(expected) - set(tensors))
            unexpected = sorted(set(tensors) - set(expected))
            raise DimensionError(f"weights (missing={missing}, unexpected={unexpected})")
        for name, shape in expected.items():
            if tensors[name].shape != shape:
                raise DimensionError(f"weight '{name}'", shape, tensors[name].shape)
        self.config = config
        self.tensors = tensors

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def get(self, name: str) -> Optional[Tensor]:
        return self.tensors.get(name)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self.tensors.items())

    def parameters(self) -> List[Tensor]:
        return list(self.tensors.values())

    @property
    def dtype(self) -> np.dtype:
        return self["patch_embed.weight"].dtype

    def layer(self, prefix: str) -> LayerWeights:
        return LayerWeights(*(self.tensors[f"{prefix}.{name}"] for name in LAYER_PARAMS))

    def encoder_layers(self) -> List[LayerWeights]:
        return [self.layer(f"layers.{i}") for i in range(self.config.layers)]

    def fusion_layer(self) -> LayerWeights:
        return self.layer("fusion")

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def copy(self) -> "ModelWeights":
        return ModelWeights(
            self.config,
            OrderedDict(
                (name, Tensor(t.data, requires_grad=t.requires_grad, name=name)) for name, t in self.tensors.items()
            ),
        )

    def astype(self, dtype) -> "ModelWeights":
        return ModelWeights(
            self.config,
            OrderedDict(
                (name, Tensor(t.data, requires_grad=t.requires_grad, dtype=dtype, name=name))
                for name, t in self.tensors.items()
            ),
        )


def _is_trunc_normal(name: str) -> bool:
    return name.endswith(".weight") or name.endswith(".pos")


def init_weights(cfg: ModelConfig, seed: int, dtype=DEFAULT_DTYPE) -> ModelWeights:
    """Truncated normal (std init_std, cut at 2 std) for projections and position
    embeddings; zeros for biases and class tokens; ones for LN gains."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    sampler = stats.truncnorm(-2.0, 2.0, loc=0.0, scale=cfg.init_std)
    tensors: "OrderedDict[str, Tensor]" = OrderedDict()
    for name, shape in parameter_shapes(cfg).items():
        if _is_trunc_normal(name):
            data = sampler.rvs(size=shape, random_state=rng)
        elif name.endswith(".gain"):
            data = np.ones(shape)
        else:
            data = np.zeros(shape)
        tensors[name] = Tensor(data, requires_grad=True, dtype=dtype, name=name)
    return ModelWeights(cfg, tensors)


@dataclass(frozen=True)
class ParamCount:
    """Trainable scalars, grouped."""

    groups: Dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.groups.values())

    @property
    def backbone(self) -> int:
        """Patch embedding plus encoder and fusion layers.

        This is the budget reported without position embeddings; class tokens
        and heads are listed as their own groups and left out of it.
        """
        return self.groups["patch_embed"] + self.groups["encoder"] + self.groups["fusion"]

    def lines(self) -> List[str]:
        rows = [f"{group}={count}" for group, count in self.groups.items()]
        rows += [
            f"total_without_pos_embed={self.backbone}",
            f"total={self.total}",
        ]
        return rows


def group_of(name: str) -> str:
    if name.startswith("patch_embed."):
        return "patch_embed"
    if name.endswith(".pos"):
        return "pos_embed"
    if name.endswith(".cls"):
        return "class_tokens"
    if name.startswith("layers."):
        return "encoder"
    if name.startswith("fusion."):
        return "fusion"
    return "heads"


def param_count(weights: Union[ModelWeights, ModelConfig]) -> ParamCount:
    """Count every trainable scalar, grouped by role."""
    if isinstance(weights, ModelWeights):
        shapes = {name: t.shape for name, t in weights.items()}
    else:
        shapes = parameter_shapes(weights)
    groups: Dict[str, int] = OrderedDict(
        (g, 0) for g in ("patch_embed", "pos_embed", "class_tokens", "encoder", "fusion", "heads")
    )
    for name, shape in shapes.items():
        groups[group_of(name)] += int(np.prod(shape, dtype=np.int64))
    return ParamCount(groups=dict(groups))


# --- checkpoint format ---
MAGIC = b"TRPG"
VERSION = 1


def encode_tensors(arrays: "OrderedDict[str, np.ndarray]") -> bytes:
    """TRPG container: magic, u32 version, u32 count, then per tensor
    u16 name length, name, u8 rank, u32 dims, little-endian float32 data."""
    chunks = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name, array in arrays.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)) + encoded)
        chunks.append(struct.pack("<B", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return b"".join(chunks)


def decode_tensors(blob: bytes, source: str = "<checkpoint>") -> "OrderedDict[str, np.ndarray]":
    arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
    try:
        if blob[:4] != MAGIC:
            raise CheckpointError(source, f"bad magic {blob[:4]!r}")
        version, count = struct.unpack_from("<II", blob, 4)
        if version != VERSION:
            raise CheckpointError(source, f"unsupported version {version}")
        offset = 12
        for _ in range(count):
            (length,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = blob[offset:offset + length].decode("utf-8")
            offset += length
            (rank,) = struct.unpack_from("<B", blob, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", blob, offset)
            offset += 4 * rank
            size = int(np.prod(dims, dtype=np.int64))
            if offset + 4 * size > len(blob):
                raise CheckpointError(source, f"truncated data for tensor '{name}'")
            arrays[name] = np.frombuffer(blob, dtype="<f4", count=size, offset=offset).reshape(dims).astype(np.float32)
            offset += 4 * size
        if offset != len(blob):
            raise CheckpointError(source, f"{len(blob) - offset} trailing bytes")
    except struct.error as e:
        raise CheckpointError(source, f"truncated file: {e}")
    return arrays


def weights_from_arrays(cfg: ModelConfig, arrays: "OrderedDict[str, np.ndarray]", dtype=DEFAULT_DTYPE) -> ModelWeights:
    tensors: "OrderedDict[str, Tensor]" = OrderedDict()
    for name in parameter_shapes(cfg):
        if name not in arrays:
            raise CheckpointError("<arrays>", f"missing tensor '{name}'")
        tensors[name] = Tensor(arrays[name], requires_grad=True, dtype=dtype, name=name)
    return ModelWeights(cfg, tensors)


def save_weights(weights: ModelWeights, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_bytes(encode_tensors(OrderedDict((name, t.data) for name, t in weights.items())))
    return path


def load_weights(cfg: ModelConfig, path: Union[str, Path], dtype=DEFAULT_DTYPE) -> ModelWeights:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(str(path), "file not found")
    arrays = decode_tensors(path.read_bytes(), source=str(path))
    return weights_from_arrays(cfg, arrays, dtype=dtype)
