"""Experiment configuration: INI files, ``--set`` overrides and validation.

A configuration is a set of sections (``model``, ``integrator``, ``grid``,
``analysis``, ...) holding ``key = value`` pairs.  Each experiment declares
its own keys and defaults; any other key is rejected.  The value type is
taken from the default: float, int, str or a comma-separated list of floats.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

RUN_SECTION = "run"
META_SECTION = "meta"
POINTS_SUFFIX = "_points"


class ConfigError(ValueError):
    pass


Defaults = Mapping[str, Mapping[str, Any]]


def _parse_float(text: str, where: str) -> float:
    try:
        v = float(text)
    except ValueError as exc:
        raise ConfigError(f"{where}: expected a number, got {text!r}") from exc
    if not math.isfinite(v):
        raise ConfigError(f"{where}: value must be finite")
    return v


def parse_value(text: str, default: Any, where: str) -> Any:
    text = text.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{where}: expected a boolean, got {text!r}")
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{where}: expected an integer, got {text!r}") from exc
    if isinstance(default, float):
        return _parse_float(text, where)
    if isinstance(default, tuple):
        items = [t for t in (s.strip() for s in text.split(",")) if t]
        if not items:
            raise ConfigError(f"{where}: empty list")
        out = []
        for t in items:
            # lists may contain inf (e.g. the mean-field limit N -> infinity)
            if t.lower() in ("inf", "infinity"):
                out.append(math.inf)
            else:
                out.append(_parse_float(t, where))
        return tuple(out)
    return text


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


@dataclass
class ExperimentConfig:
    experiment: str
    values: dict[str, dict[str, Any]]
    out_dir: Path = Path("results")
    workers: int = 1
    resolution_scale: float = 1.0
    notes: dict[str, str] = field(default_factory=dict)

    def get(self, section: str, key: str) -> Any:
        return self.values[section][key]

    def section(self, section: str) -> dict[str, Any]:
        return dict(self.values.get(section, {}))

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp[RUN_SECTION] = {"experiment": self.experiment}
        for sec in sorted(self.values):
            cp[sec] = {k: format_value(v) for k, v in sorted(self.values[sec].items())}
        return _ini_text(cp)


def _ini_text(cp: configparser.ConfigParser) -> str:
    lines = []
    for sec in cp.sections():
        lines.append(f"[{sec}]")
        for k, v in cp[sec].items():
            lines.append(f"{k} = {v}")
        lines.append("")
    return "\n".join(lines)


def _locate(defaults: Defaults, key: str) -> tuple[str, str]:
    if "." in key:
        sec, name = key.split(".", 1)
        if sec not in defaults or name not in defaults[sec]:
            raise ConfigError(f"unknown key {key!r}")
        return sec, name
    hits = [sec for sec in defaults if key in defaults[sec]]
    if not hits:
        raise ConfigError(f"unknown key {key!r}")
    if len(hits) > 1:
        raise ConfigError(f"ambiguous key {key!r}; qualify it as one of " + ", ".join(f"{s}.{key}" for s in hits))
    return hits[0], key


def read_ini(path: str | Path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return cp


def scale_points(n: int, scale: float) -> int:
    return max(2, int(round(n * scale)))


def resolve_config(
    experiment: str,
    defaults: Defaults,
    config_path: str | Path | None = None,
    sets: Iterable[str] = (),
    out_dir: str | Path = "results",
    workers: int = 1,
    resolution_scale: float = 1.0,
) -> ExperimentConfig:
    """Merge defaults, an optional INI file and ``key=value`` overrides.

    ``resolution_scale`` multiplies every ``*_points`` grid resolution after
    all overrides are applied.
    """
    values = {sec: dict(keys) for sec, keys in defaults.items()}

    def assign(sec: str, name: str, text: str, origin: str) -> None:
        values[sec][name] = parse_value(text, defaults[sec][name], f"{origin} {sec}.{name}")

    if config_path is not None:
        cp = read_ini(config_path)
        for sec in cp.sections():
            if sec == META_SECTION:
                continue
            if sec == RUN_SECTION:
                for k, v in cp[sec].items():
                    if k != "experiment":
                        raise ConfigError(f"unknown key run.{k}")
                    if v.strip() != experiment:
                        raise ConfigError(f"config is for experiment {v.strip()!r}, not {experiment!r}")
                continue
            if sec not in defaults:
                raise ConfigError(f"unknown section [{sec}] for experiment {experiment}")
            for k, v in cp[sec].items():
                if k not in defaults[sec]:
                    raise ConfigError(f"unknown key {sec}.{k} for experiment {experiment}")
                assign(sec, k, v, str(config_path))

    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, text = item.split("=", 1)
        sec, name = _locate(defaults, key.strip())
        assign(sec, name, text, "--set")

    if not (math.isfinite(resolution_scale) and resolution_scale > 0):
        raise ConfigError("resolution scale must be positive")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    for sec, keys in values.items():
        for k, v in keys.items():
            if k.endswith(POINTS_SUFFIX):
                if resolution_scale != 1.0:
                    v = keys[k] = scale_points(v, resolution_scale)
                if v < 2:
                    raise ConfigError(f"{sec}.{k} must be >= 2")
    for sec, keys in values.items():
        for k, v in keys.items():
            if k.endswith("_min"):
                stem = k[: -len("_min")]
                hi = keys.get(stem + "_max")
                if hi is not None and not v < hi:
                    raise ConfigError(f"{sec}.{stem}: min must be below max")
    return ExperimentConfig(experiment, values, Path(out_dir), int(workers), float(resolution_scale))
