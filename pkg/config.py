"""
Global configuration.

Values are resolved with the precedence flags > environment > config file >
defaults. The config file is a plain KEY=value file (same syntax as .env);
environment variables use the BAZI_ prefix, e.g. BAZI_LATE_ZI_POLICY=same_day.
"""

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from dotenv import dotenv_values

from errors import ConfigurationError

ENV_PREFIX = "BAZI_"

LATE_ZI_POLICIES = ("next_day", "same_day")
SOLAR_TIME_MODES = ("apparent", "mean", "civil")
SHUFFLE_MODES = ("birth_and_place", "date_only")
LOG_LEVELS = ("debug", "info", "warning", "error")


@dataclass(frozen=True)
class GlobalConfig:
    """Resolved settings for one invocation. Path fields left as None use the bundled assets."""

    # Rule assets
    rule_profile_path: Optional[str] = None
    shensha_catalog_path: Optional[str] = None
    trait_lexicon_path: Optional[str] = None
    domain_map_path: Optional[str] = None
    rule_knowledge_path: Optional[str] = None
    template_version: str = "v1"

    # Chart conventions
    late_zi_policy: str = "next_day"
    solar_time: str = "apparent"

    # Temporal content of persona prompts
    luck_pillar_count: int = 8
    reference_age: int = 30
    include_flowing_month: bool = False
    include_flowing_day: bool = False
    three_harmony: bool = False

    # Benchmark
    shuffle_mode: str = "birth_and_place"
    cache_dir: str = ".bazi_cache"
    invalid_run_threshold: float = 0.05

    # LLM provider
    llm_endpoint_url: str = "https://api.openai.com/v1"
    llm_api_key_env: str = "OPENAI_API_KEY"
    llm_max_parallel: int = 8
    llm_retry_count: int = 3
    llm_retry_backoff: Tuple[float, ...] = field(default=(1.0, 2.0, 4.0))
    llm_timeout_seconds: float = 60.0
    llm_temperature: float = 0.0
    llm_max_output_tokens: int = 512

    log_level: str = "warning"

    def __post_init__(self):
        _check_choice("late_zi_policy", self.late_zi_policy, LATE_ZI_POLICIES)
        _check_choice("solar_time", self.solar_time, SOLAR_TIME_MODES)
        _check_choice("shuffle_mode", self.shuffle_mode, SHUFFLE_MODES)
        _check_choice("log_level", self.log_level, LOG_LEVELS)
        if not 1 <= self.luck_pillar_count <= 12:
            raise ConfigurationError(f"luck_pillar_count must be in 1..12, got {self.luck_pillar_count}")
        if not 0 <= self.reference_age <= 120:
            raise ConfigurationError(f"reference_age must be in 0..120, got {self.reference_age}")
        if self.llm_max_parallel < 1:
            raise ConfigurationError("llm_max_parallel must be at least 1")
        if self.llm_retry_count < 0:
            raise ConfigurationError("llm_retry_count must be non-negative")
        if any(delay < 0 for delay in self.llm_retry_backoff):
            raise ConfigurationError("llm_retry_backoff delays must be non-negative")
        if self.llm_temperature < 0:
            raise ConfigurationError("llm_temperature must be >= 0")
        if self.llm_max_output_tokens < 1:
            raise ConfigurationError("llm_max_output_tokens must be positive")
        if not 0 <= self.invalid_run_threshold <= 1:
            raise ConfigurationError("invalid_run_threshold must be a fraction in [0, 1]")

    def to_dict(self) -> Dict[str, Any]:
        """Reproducibility echo. Holds the credential variable's name, never its value."""
        data = dataclasses.asdict(self)
        data["llm_retry_backoff"] = list(self.llm_retry_backoff)
        return data

    def replace(self, **changes) -> "GlobalConfig":
        return dataclasses.replace(self, **changes)


def _check_choice(name: str, value: str, choices: Tuple[str, ...]) -> None:
    if value not in choices:
        raise ConfigurationError(f"{name} must be one of {', '.join(choices)}; got {value!r}")


def _coerce(name: str, raw: Any, default: Any) -> Any:
    """Convert a string from env or file to the type of the field's default."""
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigurationError(f"invalid value for {name}: {raw!r}") from None
    if default is None and not text:
        return None
    return text


def _normalize_key(key: str) -> str:
    key = key.strip().lower()
    prefix = ENV_PREFIX.lower()
    return key[len(prefix):] if key.startswith(prefix) else key


def load_config(
    config_file: Optional[str] = None,
    flags: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> GlobalConfig:
    """
    Resolve a GlobalConfig.

    ``flags`` holds values given on the command line; entries set to None are
    treated as absent. ``environ`` defaults to os.environ.
    """
    defaults = GlobalConfig()
    names = {f.name for f in dataclasses.fields(GlobalConfig)}
    merged: Dict[str, Any] = {}

    if config_file:
        path = Path(config_file)
        if not path.is_file():
            raise ConfigurationError(f"config file not found: {config_file}")
        for key, value in dotenv_values(path).items():
            name = _normalize_key(key)
            if name not in names:
                raise ConfigurationError(f"unknown config key {key!r} in {config_file}")
            if value is not None:
                merged[name] = value

    environ = os.environ if environ is None else environ
    for key, value in environ.items():
        if key.upper().startswith(ENV_PREFIX):
            name = _normalize_key(key)
            if name in names:
                merged[name] = value

    for name, value in (flags or {}).items():
        if value is not None:
            if name not in names:
                raise ConfigurationError(f"unknown setting {name!r}")
            merged[name] = value

    resolved = {
        name: _coerce(name, value, getattr(defaults, name))
        for name, value in merged.items()
    }
    return GlobalConfig(**resolved)
