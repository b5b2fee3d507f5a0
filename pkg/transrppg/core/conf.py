"""Centralized configuration management."""
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union, get_args, get_origin, get_type_hints

from ..exceptions import ConfigurationError

COLOR_SPACES = ("RGB", "G", "YUV", "RGBYUV", "CHROM", "POS")
BG_MODES = ("two_branch", "none", "concat")

# Offsets applied to the single run seed.
MODEL_SEED_OFFSET = 1000
TRAIN_SEED_OFFSET = 2000
FOLD_SEED_STRIDE = 10


@dataclass
class SynthConfig:
    """Synthetic region-trace generator settings."""

    subjects: int = 8
    samples_per_subject_per_class: int = 4
    fps: float = 30.0
    duration_s: float = 10.0
    face_regions: int = 6
    bg_regions: int = 4
    heart_rate_range: Tuple[float, float] = (48.0, 102.0)
    pulse_amplitude: float = 1.0
    mask_attenuation: float = 0.0
    noise_sigma: float = 0.3
    illumination_drift_amplitude: float = 1.0
    region_phase_jitter: float = 0.05
    seed: int = 1

    def validate(self) -> None:
        """Validate configuration."""
        if self.subjects < 1:
            raise ConfigurationError("synth.subjects", f"must be >= 1, got {self.subjects}")
        if self.samples_per_subject_per_class < 1:
            raise ConfigurationError(
                "synth.samples_per_subject_per_class",
                f"must be >= 1, got {self.samples_per_subject_per_class}",
            )
        if self.fps <= 0:
            raise ConfigurationError("synth.fps", f"must be > 0, got {self.fps}")
        if self.duration_s <= 0 or self.duration_s * self.fps < 2:
            raise ConfigurationError("synth.duration_s", "must cover at least 2 frames")
        if not 1 <= self.face_regions <= 16:
            raise ConfigurationError("synth.face_regions", f"must be in 1..16, got {self.face_regions}")
        if not 0 <= self.bg_regions <= 16:
            raise ConfigurationError("synth.bg_regions", f"must be in 0..16, got {self.bg_regions}")
        low, high = self.heart_rate_range
        if not 30.0 <= low <= high <= 240.0:
            raise ConfigurationError(
                "synth.heart_rate_range", f"must satisfy 30 <= low <= high <= 240, got {low},{high}"
            )
        for key in ("pulse_amplitude", "noise_sigma", "illumination_drift_amplitude", "region_phase_jitter"):
            if getattr(self, key) < 0:
                raise ConfigurationError(f"synth.{key}", "must be >= 0")
        if not 0.0 <= self.mask_attenuation <= 1.0:
            raise ConfigurationError(
                "synth.mask_attenuation", f"must be in [0, 1], got {self.mask_attenuation}"
            )


@dataclass
class ColorConfig:
    """Color space applied to MSTmaps before row normalization."""

    space: str = "RGB"
    # G keeps one channel, CHROM/POS emit the combined pulse signal.
    # When false G is replicated to 3 channels and CHROM/POS keep both projections.
    single_channel: bool = True
    bandpass_hz: Tuple[float, float] = (0.7, 4.0)
    window_s: float = 1.6

    @property
    def channels(self) -> int:
        if self.space in ("RGB", "YUV"):
            return 3
        if self.space == "RGBYUV":
            return 6
        if self.space == "G":
            return 1 if self.single_channel else 3
        return 1 if self.single_channel else 2

    def validate(self) -> None:
        """Validate configuration."""
        if self.space not in COLOR_SPACES:
            raise ConfigurationError("color.space", f"unknown space '{self.space}', expected one of {COLOR_SPACES}")
        low, high = self.bandpass_hz
        if not 0 < low < high:
            raise ConfigurationError("color.bandpass_hz", f"must satisfy 0 < low < high, got {low},{high}")
        if self.window_s <= 0:
            raise ConfigurationError("color.window_s", "must be > 0")


@dataclass
class ModelConfig:
    """Architecture hyperparameters."""

    H_face: int = 63
    H_bg: int = 15
    W: int = 300
    C: int = 3
    P_H: int = 3
    P_W: int = 30
    S_H: int = 1
    S_W: int = 15
    D: int = 96
    heads: int = 3
    layers: int = 6
    mlp_ratio: int = 2
    use_class_token: bool = True
    use_pos_embed: bool = True
    use_bg_branch: bool = True
    # Only meaningful without the background branch: the bg map is stacked
    # under the face map and both go through the face branch.
    concat_bg_map: bool = False
    aux_losses: bool = True
    init_std: float = 0.02
    ln_epsilon: float = 1e-6

    @property
    def per_head_dim(self) -> int:
        return self.D // self.heads

    @property
    def bg_mode(self) -> str:
        if self.use_bg_branch:
            return "two_branch"
        return "concat" if self.concat_bg_map else "none"

    @property
    def face_input_height(self) -> int:
        return self.H_face + self.H_bg if self.bg_mode == "concat" else self.H_face

    @property
    def patch_dim(self) -> int:
        return self.P_H * self.P_W * self.C

    def tokens_for(self, height: int) -> int:
        """Token count of a height x W map (sliding-window formula)."""
        n_h = (height - self.P_H + self.S_H) // self.S_H
        n_w = (self.W - self.P_W + self.S_W) // self.S_W
        return n_h * n_w

    @property
    def n_face_tokens(self) -> int:
        return self.tokens_for(self.face_input_height)

    @property
    def n_bg_tokens(self) -> int:
        return self.tokens_for(self.H_bg) if self.use_bg_branch else 0

    def with_bg_mode(self, mode: str) -> "ModelConfig":
        if mode not in BG_MODES:
            raise ConfigurationError("model.bg_mode", f"unknown mode '{mode}', expected one of {BG_MODES}")
        return dataclasses.replace(
            self, use_bg_branch=mode == "two_branch", concat_bg_map=mode == "concat"
        )

    def validate(self) -> None:
        """Validate configuration."""
        for key in ("H_face", "W", "C", "P_H", "P_W", "S_H", "S_W", "D", "heads", "mlp_ratio"):
            if getattr(self, key) < 1:
                raise ConfigurationError(f"model.{key}", f"must be >= 1, got {getattr(self, key)}")
        if self.layers < 0:
            raise ConfigurationError("model.layers", f"must be >= 0, got {self.layers}")
        if self.D % self.heads:
            raise ConfigurationError("model.D", f"{self.D} is not divisible by heads={self.heads}")
        if self.P_H > self.face_input_height or self.P_W > self.W:
            raise ConfigurationError(
                "model.P_H", f"patch {self.P_H}x{self.P_W} larger than map {self.face_input_height}x{self.W}"
            )
        if self.use_bg_branch or self.concat_bg_map:
            if self.H_bg < 1:
                raise ConfigurationError("model.H_bg", "background map required by bg_mode")
            if self.use_bg_branch and self.P_H > self.H_bg:
                raise ConfigurationError("model.P_H", f"patch height {self.P_H} larger than bg map {self.H_bg}")
        if self.use_bg_branch and self.concat_bg_map:
            raise ConfigurationError("model.concat_bg_map", "cannot be combined with use_bg_branch")
        if self.n_face_tokens < 1 or (self.use_bg_branch and self.n_bg_tokens < 1):
            raise ConfigurationError("model.S_H", "token count must be >= 1")
        if self.init_std <= 0 or self.ln_epsilon <= 0:
            raise ConfigurationError("model.init_std", "init_std and ln_epsilon must be > 0")


@dataclass
class TrainConfig:
    """Optimizer and schedule."""

    lr: float = 1e-4
    weight_decay: float = 5e-5
    batch_size: int = 10
    max_epochs: int = 60
    lr_halve_epoch: int = 45
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 2001
    shuffle: bool = True
    # Samples per forward/backward pass; gradients are accumulated to the batch mean.
    micro_batch: int = 2

    def validate(self) -> None:
        """Validate configuration."""
        if self.lr < 0:
            raise ConfigurationError("train.lr", f"must be >= 0, got {self.lr}")
        if self.weight_decay < 0:
            raise ConfigurationError("train.weight_decay", "must be >= 0")
        if self.batch_size < 1 or self.micro_batch < 1:
            raise ConfigurationError("train.batch_size", "batch_size and micro_batch must be >= 1")
        if self.max_epochs < 1:
            raise ConfigurationError("train.max_epochs", f"must be >= 1, got {self.max_epochs}")
        if not 1 <= self.lr_halve_epoch <= self.max_epochs:
            raise ConfigurationError(
                "train.lr_halve_epoch", f"must be in 1..max_epochs ({self.max_epochs}), got {self.lr_halve_epoch}"
            )
        for key in ("beta1", "beta2"):
            if not 0.0 < getattr(self, key) < 1.0:
                raise ConfigurationError(f"train.{key}", "must be in (0, 1)")
        if self.adam_epsilon <= 0:
            raise ConfigurationError("train.adam_epsilon", "must be > 0")


@dataclass
class EvalConfig:
    """Evaluation protocol options."""

    flr_target: float = 0.01
    max_workers: int = 1
    ablation_axis: str = "pos_embed"
    ablation_values: Tuple[str, ...] = ()

    def validate(self) -> None:
        """Validate configuration."""
        if not 0.0 < self.flr_target < 1.0:
            raise ConfigurationError("eval.flr_target", f"must be in (0, 1), got {self.flr_target}")
        if self.max_workers < 1:
            raise ConfigurationError("eval.max_workers", "must be >= 1")


@dataclass
class RunConfig:
    """Union of every section plus the run seed."""

    seed: int = 1
    log_level: str = "INFO"
    synth: SynthConfig = field(default_factory=SynthConfig)
    color: ColorConfig = field(default_factory=ColorConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self) -> None:
        self.apply_seed(self.seed)

    def apply_seed(self, seed: int) -> None:
        """Derive every module seed from the run seed."""
        self.seed = seed
        self.synth.seed = seed
        self.train.seed = seed + TRAIN_SEED_OFFSET

    def model_seed(self, fold: int = 0) -> int:
        return self.seed + MODEL_SEED_OFFSET + FOLD_SEED_STRIDE * fold

    def train_seed(self, fold: int = 0) -> int:
        return self.train.seed + FOLD_SEED_STRIDE * fold

    def validate(self) -> None:
        """Validate configuration."""
        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigurationError("log_level", f"unknown level '{self.log_level}'")
        for section in (self.synth, self.color, self.model, self.train, self.eval):
            section.validate()
        if self.model.C != self.color.channels:
            raise ConfigurationError(
                "model.C", f"{self.model.C} does not match color space {self.color.space} ({self.color.channels} channels)"
            )


SECTIONS = ("synth", "color", "model", "train", "eval")
TOP_LEVEL_KEYS = ("seed", "log_level")


def _parse_scalar(raw: str, kind: Any, key: str) -> Any:
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw, 0)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigurationError(key, f"cannot parse '{raw}' as {getattr(kind, '__name__', kind)}")


def parse_value(raw: str, annotation: Any, key: str) -> Any:
    """Parse a raw string according to a dataclass field annotation."""
    if get_origin(annotation) is tuple:
        items = [item.strip() for item in raw.split(",") if item.strip()]
        args = get_args(annotation)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_parse_scalar(item, args[0], key) for item in items)
        if len(items) != len(args):
            raise ConfigurationError(key, f"expected {len(args)} comma-separated values, got {len(items)}")
        return tuple(_parse_scalar(item, kind, key) for item, kind in zip(items, args))
    return _parse_scalar(raw, annotation, key)


def _assign(target: Any, name: str, raw: str, key: str) -> None:
    hints = get_type_hints(type(target))
    names = {f.name for f in dataclasses.fields(target)}
    if name not in names:
        raise ConfigurationError(key, "unknown key")
    setattr(target, name, parse_value(raw, hints[name], key))


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse `key = value` lines into a validated RunConfig."""
    values: Dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"{source}:{line_no}", f"expected 'key = value', got '{stripped}'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        values[key] = raw

    config = RunConfig()
    seed = values.pop("seed", None)
    if seed is not None:
        config.apply_seed(_parse_scalar(seed, int, "seed"))
    for key, raw in values.items():
        if key in TOP_LEVEL_KEYS:
            _assign(config, key, raw, key)
            continue
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigurationError(key, "unknown key")
        _assign(getattr(config, section), name, raw, key)

    config.validate()
    return config


def load_config(path: Optional[Union[str, Path]] = None, seed: Optional[int] = None) -> RunConfig:
    """Load a run configuration from a file; defaults when no path is given."""
    if path is None:
        config = RunConfig()
    else:
        config = parse_config_text(Path(path).read_text(encoding="utf-8"), source=str(path))
    if seed is not None:
        config.apply_seed(seed)
    config.validate()
    return config
