"""TOML configuration files for :class:`~diffmimo.harness.SimConfig`.

Top-level keys mirror the ``SimConfig`` fields; channel parameters live in
a ``[channel]`` table.  Unknown keys are rejected.  ``snr_db`` accepts the
string ``"inf"`` for a noiseless point.
"""

from __future__ import annotations

from dataclasses import fields
import sys

from .harness import ChannelConfig, ConfigError, SimConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["load_config", "config_from_dict", "parse_snr_list"]

_SIM_KEYS = {f.name for f in fields(SimConfig)}
_CHANNEL_KEYS = {f.name for f in fields(ChannelConfig)}


def parse_snr_list(value) -> tuple:
    """``"0,5,10"``, ``[0, 5, "inf"]`` or a scalar into a tuple of floats."""
    if isinstance(value, str):
        value = [v for v in value.replace(" ", "").split(",") if v]
    elif not isinstance(value, (list, tuple)):
        value = [value]
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot parse SNR list {value!r}") from exc


def config_from_dict(data: dict) -> SimConfig:
    data = dict(data)
    unknown = set(data) - _SIM_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    if "channel" in data:
        ch = data["channel"]
        if not isinstance(ch, dict):
            raise ConfigError("[channel] must be a table")
        bad = set(ch) - _CHANNEL_KEYS
        if bad:
            raise ConfigError(f"unknown channel keys: {sorted(bad)}")
        data["channel"] = ChannelConfig(**{k: float(v) for k, v in ch.items()})
    if "snr_db" in data:
        data["snr_db"] = parse_snr_list(data["snr_db"])
    try:
        return SimConfig(**data).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> SimConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return config_from_dict(data)
