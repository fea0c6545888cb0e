"""Flat ``section.key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment. Lists are comma separated.
Unknown keys are rejected. ``dumps`` writes every key, so ``loads(dumps(c))``
reproduces ``c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .drivers import VARIANTS, DriverError, DriverSpec, driver_from_dict, driver_to_dict
from .lattice import LatticeParams, unit_vector


class ConfigError(ValueError):
    """Malformed or unknown configuration entries."""


def _float(text):
    return float(text)


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


def _format(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_format(v) for v in value)
    return str(value)


# key -> (parser, default); driver parameters are handled separately
SCHEMA = {
    "lattice.nu": (_float, 1.0),
    "lattice.truncation": (_int, 64),
    "driver.variant": (str, "brownian"),
    "experiment.x0": (str, "e1"),
    "experiment.epsilons": (_float_list, [0.3, 0.1, 0.03]),
    "experiment.offsets": (_float_list, [-1.0, 0.0, 1.0, 2.0]),
    "experiment.p": (_float, 1.0),
    "experiment.mc_samples": (_int, 512),
    "experiment.dt": (_float, 0.001),
    "experiment.t_grid": (_float_list, [1.0]),
    "experiment.modes": (_int, 8),
    "experiment.paths": (_int, 1000),
    "experiment.theta": (_float, 1.0),
    "experiment.n_max": (_int, 80),
    "experiment.norm_samples": (_int, 20000),
    "output.directory": (str, "out"),
    "output.format": (str, "csv"),
    "seed": (_int, 0),
}
DRIVER_KEYS = ("sigma", "alpha", "gamma", "rate", "magnitude")
FORMATS = ("csv", "json", "both")


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in SCHEMA.items()})
    driver_params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key: str, text) -> None:
        key = key.strip()
        if key.startswith("driver.") and key[7:] in DRIVER_KEYS:
            try:
                self.driver_params[key[7:]] = float(text)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
            return
        if key not in SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r}")
        parser = SCHEMA[key][0]
        try:
            value = parser(text) if isinstance(text, str) else text
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
        if key == "driver.variant" and value not in VARIANTS:
            raise ConfigError(f"unknown driver variant {value!r}; choose from {sorted(VARIANTS)}")
        if key == "output.format" and value not in FORMATS:
            raise ConfigError(f"output.format must be one of {FORMATS}")
        self.values[key] = value

    def __eq__(self, other):
        return (isinstance(other, RunConfig) and self.driver_params == other.driver_params
                and dumps(self) == dumps(other))

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def lattice(self) -> LatticeParams:
        try:
            return LatticeParams(self["lattice.nu"], self["lattice.truncation"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def driver(self) -> DriverSpec:
        try:
            return driver_from_dict({"variant": self["driver.variant"], **self.driver_params})
        except (DriverError, TypeError) as exc:
            raise ConfigError(f"driver: {exc}") from None

    def x0(self) -> np.ndarray:
        """``e<k>``, ``zero`` or a comma-separated list of leading entries."""
        N = self["lattice.truncation"]
        text = self["experiment.x0"].strip()
        try:
            if text == "zero":
                return np.zeros(N)
            if text.startswith("e"):
                return unit_vector(int(text[1:]), N)
            entries = _float_list(text)
        except ValueError as exc:
            raise ConfigError(f"experiment.x0: {exc}") from None
        if len(entries) > N or not all(math.isfinite(v) for v in entries):
            raise ConfigError("experiment.x0 has too many or non-finite entries")
        x = np.zeros(N)
        x[: len(entries)] = entries
        return x


def loads(text: str, config: RunConfig | None = None) -> RunConfig:
    config = config or RunConfig()
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}: expected 'key = value'")
        key, value = line.split("=", 1)
        try:
            config.set(key, value.strip())
        except ConfigError as exc:
            raise ConfigError(f"line {number}: {exc}") from None
    return config


def dumps(config: RunConfig) -> str:
    lines = [f"{k} = {_format(config.values[k])}" for k in SCHEMA]
    lines += [f"driver.{k} = {_format(v)}" for k, v in sorted(config.driver_params.items())]
    return "\n".join(lines) + "\n"


def with_driver(config: RunConfig, spec: DriverSpec) -> RunConfig:
    data = driver_to_dict(spec)
    config.set("driver.variant", data.pop("variant"))
    config.driver_params = {k: float(v) for k, v in data.items()}
    return config
