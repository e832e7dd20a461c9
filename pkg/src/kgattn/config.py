"""Flat key=value run configuration with presets and flag overrides."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError, ParseError


@dataclass
class RunConfig:
    # experiment
    seed: int = 0
    mode: str = "conv_kg"
    fraction: float = 1.0
    # classifier
    epochs: int = 150
    batch_size: int = 64
    learning_rate: float = 0.01
    pretrain_epochs: int = 0
    max_len: int = 12
    word_dim: int = 16
    hidden_dim: int = 24
    finetune_kg: bool = False
    # knowledge graph
    kg_dim: int = 16
    clusters: int = 10
    margin: float = 1.0
    norm: str = "l1"
    transe_epochs: int = 300
    transe_batch_size: int = 64
    transe_learning_rate: float = 0.02

    def items(self):
        for f in fields(self):
            yield f.name, getattr(self, f.name)


# scaled-down defaults above; the full-scale preset mirrors the published
# hyperparameter table and is impractical without the original corpora
PRESETS: dict[str, dict] = {
    "desk": {},
    "full": {
        "batch_size": 256,
        "learning_rate": 0.05,
        "word_dim": 300,
        "max_len": 300,
        "hidden_dim": 200,
        "kg_dim": 50,
        "clusters": 20,
        "epochs": 20,
    },
}

_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _coerce(name: str, kind: type, raw):
    if isinstance(raw, kind) and not (kind is int and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    try:
        if kind is bool:
            return _BOOL[text.lower()]
        return kind(text)
    except (ValueError, KeyError):
        raise ConfigError(f"bad value {raw!r} for config key '{name}'") from None


def load_config_file(path) -> dict[str, str]:
    """Parse `key=value` lines; `#` comments and blanks ignored."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ParseError(f"expected 'key=value', got {line!r}", line=lineno)
            out[key.strip()] = value.strip()
    return out


def merge_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults <- preset <- config file <- flags; unknown keys rejected."""
    known = {f.name: f.type for f in fields(RunConfig)}
    types = {name: type(getattr(RunConfig(), name)) for name in known}
    merged: dict = {}
    file_values = dict(file_values or {})
    preset_name = file_values.pop("preset", None)
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ConfigError(f"unknown preset {preset_name!r}; choose from {sorted(PRESETS)}")
        merged.update(PRESETS[preset_name])
    for source in (file_values, overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in known:
                raise ConfigError(f"unknown config key '{key}'")
            merged[key] = _coerce(key, types[key], value)
    config = RunConfig(**merged)
    if config.mode not in ("plain", "vanilla_kg", "conv_kg"):
        raise ConfigError(f"mode must be plain|vanilla_kg|conv_kg, got {config.mode!r}")
    if not 0.0 < config.fraction <= 1.0:
        raise ConfigError(f"fraction must lie in (0, 1], got {config.fraction}")
    return config
