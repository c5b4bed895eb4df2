"""Key=value run configuration files with flag overrides.

A config file holds one `key = value` pair per line; `#` starts a comment.
Every key must name an option of the subcommand it is used with, values are
parsed with the same converters as the command-line flags, and a flag given
explicitly on the command line beats the file.  The environment variable
VMTLAB_SEED beats both for the `seed` option.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

from .errors import ConfigError, DataError

SEED_ENV_VAR = "VMTLAB_SEED"


def parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_max_failures(text: str):
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return int(text)


def parse_optional_float(text: str) -> Optional[float]:
    if text.strip().lower() == "none":
        return None
    return float(text)


def parse_optional_int(text: str) -> Optional[int]:
    if text.strip().lower() == "none":
        return None
    return int(text)


@dataclass(frozen=True)
class Option:
    """One resolvable setting: a config key that is also a CLI flag."""

    name: str                 # underscore form, e.g. "gap_ms"
    type: Callable[[str], Any]
    default: Any
    help: str
    required: bool = False
    is_flag: bool = False     # boolean switch: --name sets True

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


def parse_config_file(path: str) -> dict:
    """Read raw key -> string-value pairs; duplicate keys are rejected."""
    values: dict = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DataError("expected 'key = value'", path=path, line=lineno)
                key, _, value = line.partition("=")
                key = key.strip()
                if not key:
                    raise DataError("empty key", path=path, line=lineno)
                if key in values:
                    raise DataError(f"duplicate key {key!r}", path=path, line=lineno)
                values[key] = value.strip()
    except OSError as exc:
        raise DataError(f"cannot read config file: {exc}", path=path) from exc
    return values


def resolve_options(
    options: Sequence[Option],
    cli_values: dict,
    config_path: Optional[str] = None,
    env: Optional[dict] = None,
) -> dict:
    """Combine defaults, config file, flags, and the seed env override.

    ``cli_values`` uses None for flags the user did not pass.  Unknown config
    keys are rejected so typos cannot silently fall back to defaults.
    """
    env = os.environ if env is None else env
    by_name = {opt.name: opt for opt in options}
    resolved = {opt.name: opt.default for opt in options}

    if config_path is not None:
        for key, raw in parse_config_file(config_path).items():
            opt = by_name.get(key)
            if opt is None:
                raise ConfigError(f"unknown config key {key!r} in {config_path}")
            converter = parse_bool if opt.is_flag else opt.type
            try:
                resolved[key] = converter(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key!r} in {config_path}: {exc}") from exc

    for key, value in cli_values.items():
        if key in by_name and value is not None:
            resolved[key] = value

    if "seed" in by_name and env.get(SEED_ENV_VAR):
        try:
            resolved["seed"] = int(env[SEED_ENV_VAR])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from exc

    for opt in options:
        if opt.required and resolved[opt.name] is None:
            raise ConfigError(f"missing required option {opt.flag} (config key {opt.name!r})")
    return resolved
