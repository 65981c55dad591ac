"""Run configuration: one TOML document, overridable from the command line.

Precedence, lowest to highest: built-in defaults, the config file, CLI flags.
A JSON report written by the CLI is also accepted as a config file; its
embedded ``config`` object is used, which makes any report re-runnable.

Example::

    config_version = 1

    [geometry]
    num_sets = 1024
    ways = 8
    block_bits = 512
    ecc_t = 1

    [device]
    p_override = 1e-8        # "none" evaluates the switching model instead

    [scheme]
    scheme = "conventional"

    [energy]
    e_ecc_decode = 0.3

    [run]
    seed = 42
    ns_per_access = 1.0
"""

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import tomli

from ._validation import check_count, check_positive
from .cache import CacheGeometry, SchemeConfig
from .disturbance import DeviceParams
from .reporting import AreaParams, EnergyParams

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunOptions:
    seed: int = 42
    ns_per_access: float = 1.0
    mean_ones: Optional[int] = None  # histogram failure column; None means block_bits // 4
    default_ones: Optional[int] = None  # trace lines without a content descriptor
    prng: str = "pcg64"

    def __post_init__(self):
        check_count(self.seed, "seed")
        check_positive(self.ns_per_access, "ns_per_access")
        if self.mean_ones is not None:
            check_count(self.mean_ones, "mean_ones")
        if self.default_ones is not None:
            check_count(self.default_ones, "default_ones")
        if self.prng != "pcg64":
            raise ValueError(f"unsupported prng {self.prng!r}")

    def to_dict(self):
        return {
            "seed": self.seed,
            "ns_per_access": self.ns_per_access,
            "mean_ones": self.mean_ones,
            "default_ones": self.default_ones,
            "prng": self.prng,
        }


@dataclass(frozen=True)
class RunConfig:
    geometry: CacheGeometry = field(default_factory=CacheGeometry)
    device: DeviceParams = field(default_factory=DeviceParams)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    energy: EnergyParams = field(default_factory=EnergyParams)
    area: AreaParams = field(default_factory=AreaParams)
    run: RunOptions = field(default_factory=RunOptions)

    @property
    def mean_ones(self):
        if self.run.mean_ones is not None:
            return self.run.mean_ones
        return self.geometry.default_ones

    def to_dict(self):
        return {
            "config_version": CONFIG_VERSION,
            "geometry": self.geometry.to_dict(),
            "device": self.device.to_dict(),
            "scheme": self.scheme.to_dict(),
            "energy": self.energy.to_dict(),
            "area": self.area.to_dict(),
            "run": self.run.to_dict(),
        }

    @classmethod
    def from_mapping(cls, data):
        data = dict(data)
        version = data.pop("config_version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config_version {version!r}")
        sections = {f.name: f.type for f in fields(cls)}
        unknown = set(data) - set(sections)
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        base = cls()
        kwargs = {}
        for name in sections:
            if name in data:
                kwargs[name] = _build_section(name, getattr(base, name), data[name])
        return replace(base, **kwargs)

    def override(self, section, **values):
        """Return a copy with ``values`` replaced in ``section``; ``None`` values are skipped."""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        try:
            updated = replace(getattr(self, section), **values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {exc}") from None
        return replace(self, **{section: updated})


def _build_section(name, default, values):
    if not isinstance(values, dict):
        raise ConfigError(f"[{name}] must be a table")
    allowed = {f.name for f in fields(default)}
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"[{name}] unknown key(s): {', '.join(sorted(unknown))}")
    values = dict(values)
    if name == "device" and isinstance(values.get("p_override"), str):
        if values["p_override"].lower() != "none":
            raise ConfigError("[device] p_override must be a number or \"none\"")
        values["p_override"] = None
    try:
        return replace(default, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def load_config(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw.decode("utf-8"))
            if "config" in data and "schema_version" in data:
                data = data["config"]
        else:
            data = tomli.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return RunConfig.from_mapping(data)
