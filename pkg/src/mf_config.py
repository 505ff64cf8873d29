"""
Dataset configuration for mfkit commands.

A dataset configuration is a small YAML file describing how a record file is
laid out physically and how multi-layout records are dispatched:

    format: variable          # fixed | variable
    lrecl: 120                # fixed: record length, variable: max payload
    encoding: ebcdic          # ebcdic | ascii
    codepage: cp037           # any Python EBCDIC codec (cp037, cp500, cp1140)
    key: "0,10"               # or {offset: 0, length: 10}
    overflow: legacy-truncate # legacy-truncate | strict
    discriminator:
      field: REC-TYPE
      values: {"A": ACCOUNT-DATA, "B": BILLING-DATA}
      default: ACCOUNT-DATA

Priority: command-line flags > config file > defaults. Copybooks are always
given by path (--schema), never embedded here.
"""

import argparse
import codecs
import logging
from pathlib import Path
from typing import Any, NamedTuple

import yaml

from mf_copybook import CopybookSchema, DiscriminatorRule, load_copybook
from mf_errors import ConfigError

logger = logging.getLogger(__name__)

FORMATS = ("fixed", "variable")
ENCODINGS = ("ebcdic", "ascii")
OVERFLOW_POLICIES = ("legacy-truncate", "strict")
DATASET_KEYS = {"format", "lrecl", "encoding", "codepage", "key", "overflow", "discriminator"}

# RDW length is a halfword that includes the 4-byte descriptor itself
MAX_LRECL = 0xFFFF - 4


class DatasetSettings(NamedTuple):
    """Resolved dataset options with all precedence rules applied."""

    format: str = "fixed"
    lrecl: int | None = None
    encoding: str = "ebcdic"
    codepage: str = "cp037"
    key: tuple[int, int] | None = None
    overflow: str = "legacy-truncate"
    discriminator: DiscriminatorRule | None = None


def load_yaml(path: str | Path) -> dict[str, Any]:
    """Read a YAML mapping, turning every failure into ConfigError."""
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {config_path}")
    try:
        with open(config_path, encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"could not parse {config_path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{config_path} must contain a mapping at the top level")
    return data


def parse_key(value: Any) -> tuple[int, int]:
    """Accept "off,len" text or an {offset, length} mapping."""
    if isinstance(value, dict):
        unknown = set(value) - {"offset", "length"}
        if unknown:
            raise ConfigError(f"unknown key option(s): {', '.join(sorted(unknown))}")
        offset, length = value.get("offset"), value.get("length")
    elif isinstance(value, str) and value.count(",") == 1:
        offset_text, length_text = value.split(",")
        try:
            offset, length = int(offset_text), int(length_text)
        except ValueError as e:
            raise ConfigError(f"key must be 'offset,length', got '{value}'") from e
    else:
        raise ConfigError(f"key must be 'offset,length' or a mapping, got {value!r}")
    if not isinstance(offset, int) or not isinstance(length, int) or offset < 0 or length < 1:
        raise ConfigError(f"key needs a non-negative offset and positive length, got {value!r}")
    return offset, length


def parse_byte_range(value: str) -> tuple[int, int] | None:
    """'off,len' text as a (start, end) byte range, or None for a field name."""
    if "," not in value:
        return None
    offset, length = parse_key(value)
    return offset, offset + length


def parse_discriminator(value: Any) -> DiscriminatorRule:
    if not isinstance(value, dict):
        raise ConfigError("discriminator must be a mapping with field and values")
    unknown = set(value) - {"field", "values", "default"}
    if unknown:
        raise ConfigError(f"unknown discriminator option(s): {', '.join(sorted(unknown))}")
    field = value.get("field")
    values = value.get("values")
    if not isinstance(field, str) or not field:
        raise ConfigError("discriminator.field must name a copybook field")
    if not isinstance(values, dict) or not values:
        raise ConfigError("discriminator.values must map record values to layout names")
    default = value.get("default")
    if default is not None and not isinstance(default, str):
        raise ConfigError("discriminator.default must be a layout name")
    return DiscriminatorRule.build(
        field, [(str(k), str(v)) for k, v in values.items()], default
    )


def validate_dataset_config(data: dict[str, Any], source: str = "config") -> dict[str, Any]:
    """Check a raw dataset mapping and convert it to DatasetSettings field values."""
    unknown = set(data) - DATASET_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown option(s): {', '.join(sorted(unknown))}")
    resolved: dict[str, Any] = {}
    if "format" in data:
        resolved["format"] = _choice(data["format"], FORMATS, "format", source)
    if "lrecl" in data:
        lrecl = data["lrecl"]
        if not isinstance(lrecl, int) or isinstance(lrecl, bool) or not 1 <= lrecl <= MAX_LRECL:
            raise ConfigError(f"{source}: lrecl must be an integer between 1 and {MAX_LRECL}")
        resolved["lrecl"] = lrecl
    if "encoding" in data:
        resolved["encoding"] = _choice(data["encoding"], ENCODINGS, "encoding", source)
    if "codepage" in data:
        resolved["codepage"] = _codepage(data["codepage"], source)
    if "key" in data and data["key"] is not None:
        resolved["key"] = parse_key(data["key"])
    if "overflow" in data:
        resolved["overflow"] = _choice(data["overflow"], OVERFLOW_POLICIES, "overflow", source)
    if "discriminator" in data and data["discriminator"] is not None:
        resolved["discriminator"] = parse_discriminator(data["discriminator"])
    return resolved


def _choice(value: Any, allowed: tuple[str, ...], name: str, source: str) -> str:
    text = str(value).lower()
    if text not in allowed:
        raise ConfigError(f"{source}: {name} must be one of {', '.join(allowed)}, got {value!r}")
    return text


def _codepage(value: Any, source: str) -> str:
    name = str(value).lower()
    try:
        codecs.lookup(name)
    except LookupError as e:
        raise ConfigError(f"{source}: unknown codepage {value!r}") from e
    return name


def resolve_settings(
    config_file: str | Path | None = None, overrides: dict[str, Any] | None = None
) -> DatasetSettings:
    """
    Merge defaults, an optional YAML file and explicit overrides.

    Priority: overrides > config_file > defaults
    """
    merged: dict[str, Any] = {}
    if config_file:
        merged.update(validate_dataset_config(load_yaml(config_file), str(config_file)))
        logger.info("loaded dataset config %s", config_file)
    given = {k: v for k, v in (overrides or {}).items() if v is not None}
    if given:
        merged.update(validate_dataset_config(given, "command line"))
    return DatasetSettings(**merged)


def add_dataset_arguments(
    parser: argparse.ArgumentParser, *, schema: bool = True, physical: bool = True
) -> None:
    """Register the shared dataset flags (each overrides the config file)."""
    parser.add_argument("--config", dest="config_file", help="dataset configuration YAML")
    if schema:
        parser.add_argument("--schema", help="copybook file describing the records")
    if not physical:
        return
    parser.add_argument("--format", choices=FORMATS, help="record format (default fixed)")
    parser.add_argument("--lrecl", type=int, help="logical record length")
    parser.add_argument("--encoding", choices=ENCODINGS, help="character encoding")
    parser.add_argument("--codepage", help="EBCDIC codepage (default cp037)")
    parser.add_argument("--key", help="key extent as offset,length")
    parser.add_argument("--overflow", choices=OVERFLOW_POLICIES, help="numeric overflow policy")


def settings_from_args(args: argparse.Namespace) -> DatasetSettings:
    overrides = {
        name: getattr(args, name, None)
        for name in ("format", "lrecl", "encoding", "codepage", "key", "overflow")
    }
    return resolve_settings(getattr(args, "config_file", None), overrides)


def schema_from_args(
    args: argparse.Namespace, path: str | None = None, required: bool = True
) -> CopybookSchema | None:
    """Load the copybook named on the command line and bind its discriminator."""
    schema_path = path or getattr(args, "schema", None)
    if not schema_path:
        if required:
            raise ConfigError("--schema is required")
        return None
    settings = settings_from_args(args)
    return load_copybook(schema_path, settings.discriminator)
