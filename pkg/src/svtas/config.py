"""Model and run configuration.

Everything a model needs to be rebuilt from scratch lives in ModelConfig so
that a checkpoint manifest can round-trip it. RunConfig adds the
training/evaluation context (variant, seed, data source, output dir) and
handles JSON loading plus CLI overrides.
"""
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError

VARIANTS = ("sete", "mete", "transeger")


@dataclass(frozen=True)
class ModelConfig:
    # streaming geometry
    k: int = 32                  # chunk length in (subsampled) frames
    sample_rate: int = 4         # temporal subsampling stride
    height: int = 48
    width: int = 48
    # feature sizes
    image_dim: int = 64          # pooled image feature size per frame
    text_dim: int = 64           # text feature size per frame
    num_classes: int = 5
    # image encoder
    encoder_channels: tuple = (16, 32)   # widths of the strided conv blocks before the last
    shift_fraction: float = 0.125        # fraction of channels shifted back one frame
    # temporal model
    tcn_layers: int = 4
    tcn_kernel: int = 3
    tcn_channels: int = 64
    # text encoder
    text_layers: int = 2
    text_heads: int = 4
    max_tokens: int = 48
    # contrastive head
    clip_embed_dim: int = 64
    clip_temperature: float = 0.07
    # losses / optimizer
    lambda_smooth: float = 0.15
    tau_smooth: float = 4.0
    learning_rate: float = 5e-4
    weight_decay: float = 1e-4

    def validate(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.sample_rate < 1:
            raise ConfigError(f"sample_rate must be >= 1, got {self.sample_rate}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.tcn_kernel < 2:
            raise ConfigError(f"tcn_kernel must be >= 2, got {self.tcn_kernel}")
        if self.tcn_layers < 1:
            raise ConfigError(f"tcn_layers must be >= 1, got {self.tcn_layers}")
        for name in ("height", "width", "image_dim", "text_dim", "tcn_channels",
                     "text_layers", "text_heads", "max_tokens", "clip_embed_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not (0.0 < self.shift_fraction <= 0.5):
            raise ConfigError(f"shift_fraction must be in (0, 0.5], got {self.shift_fraction}")
        if self.text_dim % self.text_heads != 0:
            raise ConfigError(
                f"text_dim ({self.text_dim}) must be divisible by text_heads ({self.text_heads})")
        if self.clip_temperature <= 0:
            raise ConfigError(f"clip_temperature must be > 0, got {self.clip_temperature}")
        if self.lambda_smooth < 0 or self.tau_smooth <= 0:
            raise ConfigError("lambda_smooth must be >= 0 and tau_smooth > 0")
        # every conv block must shift at least one channel
        for c in tuple(self.encoder_channels) + (self.image_dim,):
            if int(c * self.shift_fraction) < 1:
                raise ConfigError(
                    f"encoder block width {c} shifts zero channels at "
                    f"shift_fraction={self.shift_fraction}")
        return self

    def num_chunks(self, num_frames: int) -> int:
        """Number of non-overlapping chunks covering num_frames frames."""
        if num_frames < 1:
            raise ConfigError(f"num_frames must be >= 1, got {num_frames}")
        return math.ceil(num_frames / self.k)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["encoder_channels"] = list(self.encoder_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config fields: {sorted(unknown)}")
        if "encoder_channels" in d:
            d = dict(d, encoder_channels=tuple(d["encoder_channels"]))
        return cls(**d).validate()


@dataclass
class SyntheticSpec:
    """Parameters of the synthetic shape-and-motion dataset."""
    num_videos: int = 20
    num_frames: int = 256
    height: int = 48
    width: int = 48
    num_classes: int = 5
    min_segment: int = 16
    max_segment: int = 64
    seed: int = 0

    def validate(self):
        if self.num_videos < 1 or self.num_frames < 1:
            raise ConfigError("num_videos and num_frames must be >= 1")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if not (1 <= self.min_segment <= self.max_segment <= self.num_frames):
            raise ConfigError(
                f"need 1 <= min_segment <= max_segment <= num_frames, got "
                f"{self.min_segment}, {self.max_segment}, {self.num_frames}")
        # some segment count n must satisfy n*min <= num_frames <= n*max
        if math.ceil(self.num_frames / self.max_segment) > self.num_frames // self.min_segment:
            raise ConfigError(
                f"no segment tiling of {self.num_frames} frames exists with "
                f"lengths in [{self.min_segment}, {self.max_segment}]")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synthetic spec fields: {sorted(unknown)}")
        return cls(**d).validate()


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    variant: str = "transeger"
    seed: int = 0
    epochs: int = 30
    batch_size: int = 2
    early_stop_acc: float | None = None   # stop when teacher-forced accuracy reaches this
    data_dir: str | None = None           # None -> synthetic
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    out_dir: str = "runs/default"

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        self.model.validate()
        self.synthetic.validate()
        return self

    def to_dict(self) -> dict:
        """JSON-ready form accepted back by from_json."""
        return {
            "model": self.model.to_dict(),
            "variant": self.variant,
            "seed": self.seed,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "early_stop_acc": self.early_stop_acc,
            "data_dir": self.data_dir,
            "synthetic": dataclasses.asdict(self.synthetic),
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        try:
            with open(path) as f:
                raw = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must contain a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = dict(raw)
        if "model" in kwargs:
            kwargs["model"] = ModelConfig.from_dict(kwargs["model"])
        if "synthetic" in kwargs:
            kwargs["synthetic"] = SyntheticSpec.from_dict(kwargs["synthetic"])
        try:
            run = cls(**kwargs)
        except TypeError as e:
            raise ConfigError(f"bad config file {path}: {e}") from e
        return run.validate()

    def apply_overrides(self, variant=None, k=None, sample_rate=None, seed=None, out=None):
        """CLI flags win over the config file."""
        if variant is not None:
            self.variant = variant
        model_changes = {}
        if k is not None:
            model_changes["k"] = k
        if sample_rate is not None:
            model_changes["sample_rate"] = sample_rate
        if model_changes:
            self.model = dataclasses.replace(self.model, **model_changes)
        if seed is not None:
            self.seed = seed
        if out is not None:
            self.out_dir = out
        return self.validate()


def config_hash(config: ModelConfig) -> str:
    """Stable short hash of the model configuration, for provenance fields."""
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
