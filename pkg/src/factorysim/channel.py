"""Radio link model: indoor-factory path loss, SNR, modulation, channel capacity.

Path loss follows the indoor-factory model (sparse clutter, low antennas for
the NLOS branch).  A link is frozen for a whole run: distance, LOS state and
the per-UE shadow-fading draw never change, so the modulation order per UE is
a run constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from . import scenario as scn

BOLTZMANN = 1.380649e-23  # J/K

# Data symbols per scheduling unit: 2 control + 4 data + 1 guard = 7 symbols.
SYMBOLS_PER_SU = 7
DATA_SYMBOLS_PER_SU = 4
SUBCARRIERS_PER_CHANNEL = 12


@dataclass(frozen=True)
class RadioConfig:
    carrier_freq_hz: float = 3.5e9
    bandwidth_hz: float = 60e6
    subcarrier_spacing_hz: float = 60e3
    tx_power_dbm: float = 23.0
    ue_antenna_gain_db: float = 0.0
    gnb_antenna_gain_db: float = 0.0
    noise_temperature_k: float = 290.0
    snr_threshold_db: float = -5.0
    num_channels: int | None = None  # None derives from bandwidth
    shadowing: bool = True
    shadow_sigma_los_db: float = 4.0
    shadow_sigma_nlos_db: float = 5.7

    def validate(self) -> None:
        for name in ("carrier_freq_hz", "bandwidth_hz", "subcarrier_spacing_hz",
                     "noise_temperature_k"):
            if getattr(self, name) <= 0:
                raise ValueError(f"radio.{name} must be positive")
        if self.num_channels is not None and self.num_channels < 1:
            raise ValueError("radio.num_channels must be >= 1")
        if self.k_channels() < 1:
            raise ValueError("radio.bandwidth_hz too small for one channel")

    def k_channels(self) -> int:
        if self.num_channels is not None:
            return self.num_channels
        return int(self.bandwidth_hz // (SUBCARRIERS_PER_CHANNEL * self.subcarrier_spacing_hz))

    def symbol_time_s(self) -> float:
        return 1.0 / self.subcarrier_spacing_hz

    def su_duration_s(self) -> float:
        return SYMBOLS_PER_SU * self.symbol_time_s()

    def data_portion_s(self) -> float:
        return DATA_SYMBOLS_PER_SU * self.symbol_time_s()


def path_loss_los_db(d_m: float, fc_hz: float) -> float:
    d_m = max(d_m, 1.0)  # model valid from 1 m; clamp shorter links
    return 31.84 + 21.5 * math.log10(d_m) + 19.0 * math.log10(fc_hz / 1e9)


def path_loss_nlos_db(d_m: float, fc_hz: float) -> float:
    # Sparse-clutter low-antenna branch, floored by the LOS loss.
    d_m = max(d_m, 1.0)
    nlos = 33.0 + 25.5 * math.log10(d_m) + 20.0 * math.log10(fc_hz / 1e9)
    return max(path_loss_los_db(d_m, fc_hz), nlos)


def noise_power_w(cfg: RadioConfig) -> float:
    return BOLTZMANN * cfg.noise_temperature_k * cfg.bandwidth_hz


def snr_db(cfg: RadioConfig, path_loss_db: float, shadow_db: float = 0.0) -> float:
    p_n_dbm = 10.0 * math.log10(noise_power_w(cfg) * 1e3)
    return (cfg.tx_power_dbm + cfg.ue_antenna_gain_db + cfg.gnb_antenna_gain_db
            - path_loss_db - shadow_db - p_n_dbm)


def modulation_order(snr: float, threshold_db: float) -> int:
    """Bits per symbol sustained at the given SNR; 0 means outage."""
    if snr < threshold_db:
        return 0
    if snr < 5.0:
        return 2
    if snr < 15.0:
        return 4
    if snr < 25.0:
        return 6
    return 8


MAX_MODULATION = 8


def bytes_per_channel(m: int) -> int:
    """Payload bytes one channel carries in one SU at modulation order m."""
    return (SUBCARRIERS_PER_CHANNEL * DATA_SYMBOLS_PER_SU * m) // 8


MAX_BYTES_PER_CHANNEL = bytes_per_channel(MAX_MODULATION)  # 48


@dataclass(frozen=True)
class LinkState:
    ue: int
    distance_m: float
    los: bool
    path_loss_db: float
    shadow_db: float
    snr_db: float
    modulation: int

    @property
    def bytes_per_channel(self) -> int:
        return bytes_per_channel(self.modulation)


def build_links(layout: scn.FactoryLayout, cfg: RadioConfig,
                master_seed: int) -> list[LinkState]:
    """Freeze per-UE link state for a run (distance, LOS, shadowing, SNR, m)."""
    links = []
    for ue in range(len(layout.ue_pos)):
        d = scn.distance_3d(layout.ue_pos[ue], layout.gnb_pos)
        los = scn.is_los(layout, ue)
        pl = path_loss_los_db(d, cfg.carrier_freq_hz) if los \
            else path_loss_nlos_db(d, cfg.carrier_freq_hz)
        shadow = 0.0
        if cfg.shadowing:
            sigma = cfg.shadow_sigma_los_db if los else cfg.shadow_sigma_nlos_db
            shadow = float(rngmod.substream(master_seed, rngmod.SHADOWING, ue).normal(0.0, sigma))
        snr = snr_db(cfg, pl, shadow)
        links.append(LinkState(ue=ue, distance_m=d, los=los, path_loss_db=pl,
                               shadow_db=shadow, snr_db=snr,
                               modulation=modulation_order(snr, cfg.snr_threshold_db)))
    return links
