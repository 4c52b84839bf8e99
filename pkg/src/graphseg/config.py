"""Pipeline configuration and the plain-text ``key = value`` config format.

Every CLI flag has a matching key (dashes become underscores). Values from
a config file are overridden by flags given explicitly on the command
line.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .model import ArmaConfig
from .objective import OptimConfig

__all__ = ["PipelineConfig", "parse_kv_file", "config_from_sources"]


@dataclass(frozen=True)
class PipelineConfig:
    tau: float = 0.5
    k: int = 2
    epochs: int = 60
    lr: float = 1e-3
    weight_decay: float = 1e-2
    lr_decay: float | None = None
    seed: int = 0
    activation: str = "silu"
    stacks: int = 2
    layers: int = 4
    head_hidden: int = 64
    shared_weights: bool = False
    arch: str = "arma"
    refine: bool = True
    soft_upsample: bool = False
    patch: int = 8
    workers: int = 1

    def arma_config(self) -> ArmaConfig:
        return ArmaConfig(
            stacks=self.stacks,
            layers=self.layers,
            head_hidden=self.head_hidden,
            activation=self.activation,
            shared_weights=self.shared_weights,
            arch=self.arch,
        )

    def optim_config(self) -> OptimConfig:
        return OptimConfig(
            lr=self.lr,
            weight_decay=self.weight_decay,
            epochs=self.epochs,
            seed=self.seed,
            lr_decay=self.lr_decay,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}

_FIELD_TYPES = {
    "tau": float,
    "k": int,
    "epochs": int,
    "lr": float,
    "weight_decay": float,
    "lr_decay": float,
    "seed": int,
    "activation": str,
    "stacks": int,
    "layers": int,
    "head_hidden": int,
    "shared_weights": bool,
    "arch": str,
    "refine": bool,
    "soft_upsample": bool,
    "patch": int,
    "workers": int,
}


def _coerce(name: str, text: str, target_type) -> object:
    text = text.strip()
    if target_type is bool:
        try:
            return _BOOL_WORDS[text.lower()]
        except KeyError:
            raise ConfigError(f"config key {name}: expected a boolean, got {text!r}") from None
    try:
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"config key {name}: cannot parse {text!r}") from None
    return text


def parse_kv_file(path) -> dict[str, str]:
    """Read ``key = value`` lines; blank lines and # comments are ignored."""
    result: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        result[key.strip().replace("-", "_")] = value.strip()
    return result


def config_from_sources(
    file_values: dict[str, str] | None = None,
    overrides: dict[str, object] | None = None,
) -> PipelineConfig:
    """Merge defaults < config file < explicit overrides into a PipelineConfig."""
    merged: dict[str, object] = {}
    for key, text in (file_values or {}).items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = _coerce(key, text, _FIELD_TYPES[key])
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = value
    return PipelineConfig(**merged)  # type: ignore[arg-type]
