"""Model and training configuration records."""

from __future__ import annotations

from dataclasses import dataclass

from ..segmentation import LabelingMode

LABELING_MODES = ("token-level", "sentence-marker")


@dataclass
class ModelConfig:
    """Shape and behavior of the encoder.

    `lam` is the weight of the rank-distillation term in the joint loss; it is
    serialized under the key "lambda"."""

    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ffn: int = 256
    max_len: int = 512
    labeling_mode: LabelingMode = "token-level"
    lam: float = 0.05

    def __post_init__(self) -> None:
        if self.vocab_size < 5:
            raise ValueError("vocab_size must cover the reserved tokens")
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.labeling_mode not in LABELING_MODES:
            raise ValueError(f"labeling_mode must be one of {LABELING_MODES}")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "d_model": self.d_model,
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "d_ffn": self.d_ffn,
            "max_len": self.max_len,
            "labeling_mode": self.labeling_mode,
            "lambda": self.lam,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {"vocab_size", "d_model", "n_layers", "n_heads", "d_ffn",
                 "max_len", "labeling_mode", "lambda"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        kwargs = {k: v for k, v in data.items() if k != "lambda"}
        if "lambda" in data:
            kwargs["lam"] = float(data["lambda"])
        return cls(**kwargs)


@dataclass
class TrainConfig:
    """Optimization settings. Adam moments follow the usual defaults; all
    randomness (init, shuffling) derives from `seed`.

    The schedule is linear warmup over `warmup_steps`, then cosine decay from
    the peak rate down to `final_lr_factor` of it at the last step. Setting
    warmup_steps=0 and final_lr_factor=1.0 gives a constant rate."""

    learning_rate: float = 2e-3
    batch_size: int = 8
    epochs: int = 15
    seed: int = 0
    warmup_steps: int = 150
    final_lr_factor: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if not (0.0 < self.final_lr_factor <= 1.0):
            raise ValueError("final_lr_factor must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "warmup_steps": self.warmup_steps,
            "final_lr_factor": self.final_lr_factor,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**data)
