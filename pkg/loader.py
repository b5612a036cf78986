# loader.py
"""Configuration models and their YAML loaders.

Resolution order: profile from data/profiles.yml, then the user's flat
``key: value`` file, then command-line overrides.
"""

import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union, get_args, get_origin

import yaml

from errors import ConfigInvalid

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent / "data"
PROFILES_PATH = DATA_DIR / "profiles.yml"
SCHEMES = ("signature", "begin-end", "identifier")


@dataclass
class ModelConfig:
    """Hyperparameters of one LM or seq2seq model."""
    hidden_size: int = 128
    vocab_size_method: int = 2000
    vocab_size_comment: int = 2000
    learning_rate: float = 0.5
    decay_factor: float = 0.96
    batch_size: int = 64
    dropout: float = 0.65
    dropout_semantics: str = "keep"  # "keep": dropout is the keep probability; "drop": the drop rate
    clip_norm: float = 5.0
    tbptt_steps: int = 30
    max_epochs: int = 30
    seed: int = 7
    num_layers: int = 1
    init_scale: float = 0.1
    max_tokens: int = 50
    compression: str = "begin-end"

    def keep_probability(self) -> float:
        return self.dropout if self.dropout_semantics == "keep" else 1.0 - self.dropout

    def validate(self) -> "ModelConfig":
        if self.dropout_semantics not in ("keep", "drop"):
            raise ConfigInvalid(f"dropout_semantics must be keep or drop, got {self.dropout_semantics!r}")
        drop_rate = 1.0 - self.keep_probability()
        if not 0.0 <= drop_rate < 1.0:
            raise ConfigInvalid(f"dropout {self.dropout} gives a drop rate outside [0, 1)")
        if self.clip_norm <= 0:
            raise ConfigInvalid("clip_norm must be positive")
        if self.learning_rate <= 0:
            raise ConfigInvalid("learning_rate must be positive")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ConfigInvalid("decay_factor must be in (0, 1]")
        for name in ("hidden_size", "batch_size", "tbptt_steps", "num_layers", "max_tokens"):
            if getattr(self, name) < 1:
                raise ConfigInvalid(f"{name} must be at least 1")
        if self.max_epochs < 0:
            raise ConfigInvalid("max_epochs must not be negative")
        for name in ("vocab_size_method", "vocab_size_comment"):
            if getattr(self, name) < 5:
                raise ConfigInvalid(f"{name} must be at least 5")
        if self.compression not in SCHEMES:
            raise ConfigInvalid(f"compression must be one of {', '.join(SCHEMES)}")
        return self

    def to_items(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_items(cls, items: Dict[str, str]) -> "ModelConfig":
        """Rebuild from string values (checkpoint headers)."""
        values = {}
        for f in fields(cls):
            if f.name in items:
                values[f.name] = _coerce(f.type, items[f.name], f.name)
        return cls(**values).validate()


@dataclass
class PipelineConfig:
    """Everything a pipeline command needs besides its positional arguments."""
    input: Optional[str] = None
    work: str = "work"
    profile: str = "desk"
    compression: str = "begin-end"
    max_tokens: int = 50
    comment_max_tokens: int = 50
    split_underscore_digit: bool = True
    train_size: Optional[int] = None
    valid_size: int = 100
    test_size: int = 100
    seed: int = 7
    min_count: int = 25
    strip_threshold: Optional[float] = None
    lm: ModelConfig = None
    s2s: ModelConfig = None

    def model_config(self, kind: str) -> ModelConfig:
        base = self.lm if kind == "lm" else self.s2s
        return replace(base, seed=self.seed, max_tokens=self.max_tokens,
                       compression=self.compression).validate()

    def validate(self) -> "PipelineConfig":
        if self.compression not in SCHEMES:
            raise ConfigInvalid(f"compression must be one of {', '.join(SCHEMES)}")
        if self.max_tokens < 2 or self.comment_max_tokens < 1:
            raise ConfigInvalid("max_tokens must be at least 2 and comment_max_tokens at least 1")
        if self.valid_size < 0 or self.test_size < 0 or (self.train_size is not None and self.train_size < 0):
            raise ConfigInvalid("split sizes must not be negative")
        if self.min_count < 1:
            raise ConfigInvalid("min_count must be at least 1")
        self.lm.validate()
        self.s2s.validate()
        return self


MODEL_KEYS = {f.name for f in fields(ModelConfig)} - {"seed", "max_tokens", "compression"}
PIPELINE_KEYS = {f.name for f in fields(PipelineConfig)} - {"lm", "s2s"}


TRUE_WORDS = frozenset(["1", "true", "yes", "on"])
FALSE_WORDS = frozenset(["0", "false", "no", "off"])


def _unwrap_optional(type_hint) -> Tuple[Any, bool]:
    """(inner type, whether None is allowed) for ``X`` or ``Optional[X]``."""
    if get_origin(type_hint) is Union:
        args = [a for a in get_args(type_hint) if a is not type(None)]
        return args[0], len(args) < len(get_args(type_hint))
    return type_hint, False


def _coerce(type_hint, value, key: str):
    target, optional = _unwrap_optional(type_hint)
    if value is None or value == "None":
        if optional:
            return None
        raise ConfigInvalid(f"{key} may not be empty")
    if target is bool:
        if isinstance(value, bool):
            return value
        word = str(value).strip().lower()
        if word in TRUE_WORDS or word in FALSE_WORDS:
            return word in TRUE_WORDS
        raise ConfigInvalid(f"{key}: cannot read {value!r} as a boolean")
    if target in (int, float):
        try:
            return target(value)
        except (TypeError, ValueError):
            raise ConfigInvalid(f"{key}: cannot read {value!r} as {target.__name__}")
    return str(value)


def load_profiles(filepath: Path = PROFILES_PATH) -> Dict[str, Dict[str, Any]]:
    """Load named profiles from YAML."""
    with open(filepath, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f)
    return data.get('profiles', {})


def _parse_model(common: Dict[str, Any], specific: Dict[str, Any], where: str) -> ModelConfig:
    values: Dict[str, Any] = {}
    for key, value in {**common, **specific}.items():
        if key not in MODEL_KEYS:
            raise ConfigInvalid(f"unknown model key {key!r} in {where}")
        field_type = ModelConfig.__dataclass_fields__[key].type
        values[key] = _coerce(field_type, value, key)
    return ModelConfig(**values)


def _parse_profile(profiles: Dict[str, Dict[str, Any]], name: str) -> PipelineConfig:
    if name not in profiles:
        raise ConfigInvalid(f"unknown profile {name!r}; known: {', '.join(sorted(profiles))}")
    item = profiles[name]
    common = item.get('model', {})
    config = PipelineConfig(
        profile=name,
        lm=_parse_model(common, item.get('lm', {}), f"profile {name}.lm"),
        s2s=_parse_model(common, item.get('s2s', {}), f"profile {name}.s2s"),
    )
    return _apply(config, item.get('pipeline', {}), f"profile {name}")


def _apply(config: PipelineConfig, items: Dict[str, Any], where: str) -> PipelineConfig:
    """Apply flat key/value settings; model keys may be prefixed ``lm.`` / ``s2s.``."""
    for key, value in items.items():
        if value is None and key not in ("train_size", "strip_threshold", "input"):
            continue
        if key in PIPELINE_KEYS:
            field_type = PipelineConfig.__dataclass_fields__[key].type
            setattr(config, key, _coerce(field_type, value, key))
            continue
        target, _, name = key.partition(".")
        if target in ("lm", "s2s") and name in MODEL_KEYS:
            model = getattr(config, target)
            field_type = ModelConfig.__dataclass_fields__[name].type
            setattr(config, target, replace(model, **{name: _coerce(field_type, value, key)}))
        elif key in MODEL_KEYS:
            field_type = ModelConfig.__dataclass_fields__[key].type
            coerced = _coerce(field_type, value, key)
            config.lm = replace(config.lm, **{key: coerced})
            config.s2s = replace(config.s2s, **{key: coerced})
        else:
            raise ConfigInvalid(f"unknown configuration key {key!r} in {where}")
    return config


def load_user_config(filepath: Path) -> Dict[str, Any]:
    try:
        with open(filepath, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f) or {}
    except FileNotFoundError:
        raise ConfigInvalid(f"configuration file not found: {filepath}")
    except yaml.YAMLError as e:
        raise ConfigInvalid(f"cannot parse {filepath}: {e}")
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{filepath} must be a flat key: value mapping")
    return data


def load_pipeline_config(config_path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None,
                         profiles_path: Path = PROFILES_PATH) -> PipelineConfig:
    """Profile defaults, then the config file, then flag overrides (flags win)."""
    user = load_user_config(config_path) if config_path else {}
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    profile = overrides.get('profile', user.get('profile', 'desk'))

    config = _parse_profile(load_profiles(profiles_path), profile)
    config = _apply(config, {k: v for k, v in user.items() if k != 'profile'}, str(config_path))
    config = _apply(config, {k: v for k, v in overrides.items() if k != 'profile'}, "command line")
    logger.info("Using profile %s (seed %d, compression %s, L=%d)",
                config.profile, config.seed, config.compression, config.max_tokens)
    return config.validate()


def load_labels(filepath: Path) -> Dict[int, str]:
    """Category labels as ``pair_id: category`` YAML or ``pair_id<TAB>category`` lines."""
    try:
        with open(filepath, 'r', encoding='utf-8') as f:
            text = f.read()
    except FileNotFoundError:
        raise ConfigInvalid(f"labels file not found: {filepath}")

    labels: Dict[int, str] = {}
    if "\t" in text:
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            pair_id, _, category = line.partition("\t")
            try:
                labels[int(pair_id)] = category.strip()
            except ValueError:
                raise ConfigInvalid(f"{filepath}:{number}: pair id {pair_id!r} is not an integer")
        return labels

    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{filepath} must map pair ids to categories")
    for pair_id, category in data.items():
        try:
            labels[int(pair_id)] = str(category)
        except ValueError:
            raise ConfigInvalid(f"{filepath}: pair id {pair_id!r} is not an integer")
    return labels
