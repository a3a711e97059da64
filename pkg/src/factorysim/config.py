"""Experiment configuration: YAML file with nested sections and explicit
units in the field names (time fields carry _ms / _s suffixes).

Validation errors always name the offending field so the CLI can surface
`section.field: problem` and exit with the dedicated status code.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace

import yaml

from .agent import AgentConfig
from .channel import RadioConfig
from .mac import TimingConfig
from .scenario import ScenarioConfig
from .schedulers import SchedulerConfig, SchedulerKind
from .traffic import TrafficConfig, TrafficModel


class ConfigError(Exception):
    """Invalid experiment configuration; message names the field."""


def _ms(x: float) -> float:
    return float(x) / 1e3


def _to_ms(x: float) -> float:
    return x * 1e3


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    raise ValueError("expected true or false")


# (file field, dataclass attr, parse, serialize)
_SCENARIO = [
    ("floor_length_m", "floor_length_m", float, float),
    ("floor_width_m", "floor_width_m", float, float),
    ("floor_height_m", "floor_height_m", float, float),
    ("machine_side_m", "machine_side_m", float, float),
    ("machine_spacing_m", "machine_spacing_m", float, float),
    ("num_lines", "num_lines", int, int),
    ("machines_per_line", "machines_per_line", int, int),
    ("num_ues", "num_ues", int, int),
    ("ue_assignment", "ue_assignment", str, str),
]
_RADIO = [
    ("carrier_freq_hz", "carrier_freq_hz", float, float),
    ("bandwidth_hz", "bandwidth_hz", float, float),
    ("subcarrier_spacing_hz", "subcarrier_spacing_hz", float, float),
    ("tx_power_dbm", "tx_power_dbm", float, float),
    ("ue_antenna_gain_db", "ue_antenna_gain_db", float, float),
    ("gnb_antenna_gain_db", "gnb_antenna_gain_db", float, float),
    ("noise_temperature_k", "noise_temperature_k", float, float),
    ("snr_threshold_db", "snr_threshold_db", float, float),
    ("num_channels", "num_channels", lambda v: None if v is None else int(v),
     lambda v: v),
    ("shadowing", "shadowing", _bool, bool),
    ("shadow_sigma_los_db", "shadow_sigma_los_db", float, float),
    ("shadow_sigma_nlos_db", "shadow_sigma_nlos_db", float, float),
]
_TRAFFIC = [
    ("model", "model", TrafficModel, lambda v: v.value),
    ("period_ms", "period_s", _ms, _to_ms),
    ("t_min_ms", "t_min_s", _ms, _to_ms),
    ("t_max_ms", "t_max_s", _ms, _to_ms),
    ("aperiodic_fraction", "aperiodic_fraction", float, float),
    ("activation_period_ms", "activation_period_s", _ms, _to_ms),
    ("payload_bytes", "payload_bytes", int, int),
    ("header_bytes", "header_bytes", int, int),
]
_TIMING = [
    ("sim_time_s", "sim_time_s", float, float),
    ("latency_threshold_ms", "latency_threshold_s", _ms, _to_ms),
    ("t_das_ms", "t_das_s", _ms, _to_ms),
    ("t_cn_ms", "t_cn_s", _ms, _to_ms),
]
_SCHEDULER = [
    ("kind", "kind", SchedulerKind, lambda v: v.value),
    ("randomk_channels", "randomk_channels", int, int),
    ("grant_delay_sus", "grant_delay_sus", int, int),
    ("outage_reward", "outage_reward", float, float),
]
_AGENT = [
    ("context_rows", "context_rows", int, int),
    ("include_queue_row", "include_queue_row", _bool, bool),
    ("epsilon", "epsilon", float, float),
    ("buffer_capacity", "buffer_capacity", int, int),
    ("train_interval", "train_interval", int, int),
    ("latent_dim", "latent_dim", int, int),
    ("prior_scale", "prior_scale", float, float),
    ("noise_shape", "noise_shape", float, float),
    ("noise_scale", "noise_scale", float, float),
    ("variance_decay", "variance_decay", float, float),
    ("leaky_slope", "leaky_slope", float, float),
    ("lr", "lr", float, float),
    ("beta1", "beta1", float, float),
    ("beta2", "beta2", float, float),
    ("epochs_per_update", "epochs_per_update", int, int),
    ("minibatch_size", "minibatch_size", int, int),
]

_SECTIONS = {
    "scenario": (ScenarioConfig, _SCENARIO),
    "radio": (RadioConfig, _RADIO),
    "traffic": (TrafficConfig, _TRAFFIC),
    "timing": (TimingConfig, _TIMING),
    "scheduler": (SchedulerConfig, _SCHEDULER),
    "agent": (AgentConfig, _AGENT),
}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)

    def validate(self) -> None:
        try:
            self.scenario.validate()
            self.radio.validate()
            self.traffic.validate()
            self.timing.validate()
            self.agent.validate()
            self.scheduler.validate(self.radio.k_channels())
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> dict:
        out = {}
        for name, (_, fmap) in _SECTIONS.items():
            section = getattr(self, name)
            out[name] = {ffield: ser(getattr(section, attr))
                         for ffield, attr, _, ser in fmap}
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_override(self, dotted: str, value) -> "ExperimentConfig":
        """Replace one field by dotted path, e.g. traffic.t_min_ms=3.0.

        The path uses file-level field names (with units); the value goes
        through the same parser as the config file.
        """
        if "." not in dotted:
            raise ConfigError(f"{dotted}: expected section.field")
        sec_name, fname = dotted.split(".", 1)
        if sec_name not in _SECTIONS:
            raise ConfigError(f"{sec_name}: unknown section")
        cls, fmap = _SECTIONS[sec_name]
        for ffield, attr, parse, _ in fmap:
            if ffield == fname:
                try:
                    parsed = parse(value)
                except (TypeError, ValueError) as e:
                    raise ConfigError(f"{sec_name}.{fname}: {e}") from e
                section = replace(getattr(self, sec_name), **{attr: parsed})
                return replace(self, **{sec_name: section})
        raise ConfigError(f"{sec_name}.{fname}: unknown field")


def _parse_section(name: str, data: dict, cls, fmap) -> object:
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected a mapping")
    known = {ffield for ffield, *_ in fmap}
    for key in data:
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown field")
    kwargs = {}
    for ffield, attr, parse, _ in fmap:
        if ffield in data:
            try:
                kwargs[attr] = parse(data[ffield])
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{name}.{ffield}: {e}") from e
    return cls(**kwargs)


def from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root: expected a mapping of sections")
    for key in data:
        if key not in _SECTIONS:
            raise ConfigError(f"{key}: unknown section")
    kwargs = {}
    for name, (cls, fmap) in _SECTIONS.items():
        if name in data:
            kwargs[name] = _parse_section(name, data[name], cls, fmap)
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


def load(path: str) -> ExperimentConfig:
    with open(path) as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"config parse error: {e}") from e
    return from_dict(data or {})
