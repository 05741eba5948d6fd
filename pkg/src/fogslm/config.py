"""Default parameter set and flat key-value config files.

The defaults reproduce the numerical setup used for the latency figures:
Quark X1000 / Xeon E7450 / Xeon Platinum 8156 processors calibrated at their
rated power and clock, 500 MHz links, N0 = 1e-10 W/Hz and a 32 dB fog-cloud
SNR. Workloads are in bits; one "megabit" is 1e6 bits.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .model import (
    LayerParams,
    LinkParams,
    SystemInstance,
    calibrate_a,
    snr_to_power,
)

MEGABIT = 1e6


class ConfigError(ValueError):
    """Bad config file or override; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ParameterSet:
    workload_bits: float = 1e6
    snr_if_db: float = 5.0
    snr_fc_db: float = 32.0
    gain_if: float = 1.0
    gain_fc: float = 1.0
    c_iot: float = 5.0
    c_fog: float = 2.0
    c_cloud: float = 1.0
    beta: float = 3.0
    b_iot: float = 1e-3
    b_fog: float = 1e-3
    b_cloud: float = 1e-3
    bandwidth_if: float = 5e8
    bandwidth_fc: float = 5e8
    noise_density: float = 1e-10
    iot_max_power: float = 2.2
    iot_max_frequency: float = 4e8
    fog_max_power: float = 90.0
    fog_max_frequency: float = 2.4e9
    cloud_max_power: float = 105.0
    cloud_max_frequency: float = 3.6e9
    # never stated for the cloud; its rated dissipation is used
    cloud_power_budget: float = 105.0

    def replace(self, **changes) -> "ParameterSet":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def build(self, **changes) -> SystemInstance:
        """Materialize a solver instance; keyword changes override fields first."""
        p = self.replace(**changes) if changes else self
        link_if = LinkParams(p.bandwidth_if, p.noise_density, p.gain_if)
        link_fc = LinkParams(p.bandwidth_fc, p.noise_density, p.gain_fc)
        # budgets are defined at unit gain
        p_iot = snr_to_power(p.snr_if_db, LinkParams(p.bandwidth_if, p.noise_density, 1.0))
        p_fog = snr_to_power(p.snr_fc_db, LinkParams(p.bandwidth_fc, p.noise_density, 1.0))

        def layer(c, b, max_p, max_f, budget):
            a = calibrate_a(max_p, max_f, b, p.beta)
            return LayerParams(a=a, b=b, c=c, beta=p.beta, p_total=budget)

        return SystemInstance(
            workload_bits=p.workload_bits,
            iot=layer(p.c_iot, p.b_iot, p.iot_max_power, p.iot_max_frequency, p_iot),
            fog=layer(p.c_fog, p.b_fog, p.fog_max_power, p.fog_max_frequency, p_fog),
            cloud=layer(
                p.c_cloud, p.b_cloud, p.cloud_max_power, p.cloud_max_frequency,
                p.cloud_power_budget,
            ),
            link_if=link_if,
            link_fc=link_fc,
        )


PARAMETER_KEYS = tuple(f.name for f in fields(ParameterSet))


def _as_float(key: str, value: Any) -> float:
    if isinstance(value, bool):
        raise ConfigError(key, f"expected a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a number, got {value!r}") from None


def parameters_from_mapping(data: Mapping[str, Any], base: ParameterSet | None = None) -> ParameterSet:
    base = base or ParameterSet()
    changes = {}
    for key, value in data.items():
        if key not in PARAMETER_KEYS:
            raise ConfigError(key, "unknown parameter")
        changes[key] = _as_float(key, value)
    params = base.replace(**changes)
    try:
        params.build()
    except ValueError as exc:
        bad = next(iter(changes), "config")
        raise ConfigError(bad, str(exc)) from None
    return params


def load_config_file(path: str | Path) -> dict:
    """Read a flat ``key: value`` document into a plain dict."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"not a key-value document ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be key: value pairs")
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(str(key), "nested sections are not supported")
    return data


def parse_override(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    return key, value


def dump_flat(data: Mapping[str, Any]) -> str:
    return yaml.safe_dump(dict(data), sort_keys=False, default_flow_style=None)
