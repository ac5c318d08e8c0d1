"""Run configuration: one JSON document with per-stage sections.

Every field is optional and falls back to the documented default. Unknown
sections or keys are rejected, and numeric fields are validated at load time
so bad values fail before any work starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .model.config import LABELING_MODES, ModelConfig, TrainConfig
from .evaluation import SyntheticSpec
from .oracle import PROMPT_VARIANTS

_DEFAULTS: dict[str, dict] = {
    "segmentation": {"max_len": 512, "min_freq": 1},
    "corpus": {"strategy": "random", "fixed_n": 6, "fixed_overlap": 3, "word_budget": 100},
    "retrieval": {"k": 5},
    "oracle": {"variant": "answer", "mock_rules": None, "url": None,
               "model": "labeling-oracle", "timeout": 60.0},
    "model": {"d_model": 64, "n_layers": 2, "n_heads": 4, "d_ffn": 256,
              "max_len": 512, "labeling_mode": "token-level", "lambda": 0.05},
    "train": {"learning_rate": 1e-3, "batch_size": 32, "epochs": 5, "seed": 0},
    "inference": {"threshold": 0.1, "enforce_title": True},
    "evaluation": {"n_docs": 220, "sentences_per_doc": [4, 10], "vocab_size": 120,
                   "keywords_per_query": 2,
                   "relevant_count_weights": {"0": 0.15, "1": 0.35, "2": 0.25,
                                              "3": 0.15, "4": 0.10},
                   "pool_size": 5, "heldout_fraction": 0.15,
                   "needle_hosts": 10, "needle_host_len": 6, "needles_per_len": 5},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    sections: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self) -> None:
        merged: dict[str, dict] = {}
        unknown_sections = set(self.sections) - set(_DEFAULTS)
        if unknown_sections:
            raise ConfigError(f"unknown config sections: {sorted(unknown_sections)}")
        for name, defaults in _DEFAULTS.items():
            given = self.sections.get(name, {})
            if not isinstance(given, dict):
                raise ConfigError(f"config section {name!r} must be an object")
            unknown = set(given) - set(defaults)
            if unknown:
                raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
            merged[name] = {**defaults, **given}
        self.sections = merged
        self._validate()

    def _validate(self) -> None:
        seg = self.sections["segmentation"]
        if seg["max_len"] < 8:
            raise ConfigError("segmentation.max_len must be >= 8")
        if seg["min_freq"] < 1:
            raise ConfigError("segmentation.min_freq must be >= 1")
        cor = self.sections["corpus"]
        if cor["fixed_overlap"] >= cor["fixed_n"]:
            raise ConfigError("corpus.fixed_overlap must be smaller than corpus.fixed_n")
        if cor["word_budget"] < 1:
            raise ConfigError("corpus.word_budget must be >= 1")
        if self.sections["retrieval"]["k"] < 1:
            raise ConfigError("retrieval.k must be >= 1")
        if self.sections["oracle"]["variant"] not in PROMPT_VARIANTS:
            raise ConfigError(f"oracle.variant must be one of {PROMPT_VARIANTS}")
        if self.sections["model"]["labeling_mode"] not in LABELING_MODES:
            raise ConfigError(f"model.labeling_mode must be one of {LABELING_MODES}")
        if self.sections["model"]["lambda"] < 0:
            raise ConfigError("model.lambda must be non-negative")
        inf = self.sections["inference"]
        if not (0.0 <= inf["threshold"] <= 1.0):
            raise ConfigError("inference.threshold must lie in [0, 1]")
        trn = self.sections["train"]
        if trn["learning_rate"] <= 0:
            raise ConfigError("train.learning_rate must be positive")
        if trn["batch_size"] < 1:
            raise ConfigError("train.batch_size must be >= 1")
        if trn["epochs"] < 0:
            raise ConfigError("train.epochs must be >= 0")
        ev = self.sections["evaluation"]
        if ev["n_docs"] < 1 or ev["vocab_size"] < 1:
            raise ConfigError("evaluation counts must be positive")
        if ev["pool_size"] < 1:
            raise ConfigError("evaluation.pool_size must be >= 1")
        if not (0.0 < ev["heldout_fraction"] < 1.0):
            raise ConfigError("evaluation.heldout_fraction must lie in (0, 1)")

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls()
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config root must be a JSON object")
        return cls(sections=data)

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig.from_dict({"vocab_size": vocab_size, **self.sections["model"]})

    def train_config(self, seed: int | None = None) -> TrainConfig:
        data = dict(self.sections["train"])
        if seed is not None:
            data["seed"] = seed
        return TrainConfig.from_dict(data)

    def synthetic_spec(self, seed: int | None = None) -> SyntheticSpec:
        ev = self.sections["evaluation"]
        weights = {int(k): float(v) for k, v in ev["relevant_count_weights"].items()}
        return SyntheticSpec(
            seed=seed if seed is not None else self.sections["train"]["seed"],
            n_docs=int(ev["n_docs"]),
            sentences_per_doc=tuple(int(x) for x in ev["sentences_per_doc"]),
            vocab_size=int(ev["vocab_size"]),
            keywords_per_query=int(ev["keywords_per_query"]),
            relevant_count_weights=weights,
        )
