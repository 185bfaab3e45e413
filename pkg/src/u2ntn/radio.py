"""Link budget, decoding thresholds, LoRa airtime and LR-FHSS framing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError

THERMAL_NOISE_DBM_HZ = -174.0
# absorbs float rounding so an SIR of exactly the threshold passes
SIR_BOUNDARY_TOLERANCE_DB = 1e-9


def dbm_to_mw(p_dbm):
    return np.power(10.0, np.asarray(p_dbm, dtype=float) / 10.0)


def mw_to_dbm(p_mw):
    return 10.0 * np.log10(np.asarray(p_mw, dtype=float))


@dataclass(frozen=True)
class RadioConfig:
    freq_hz: float = 433e6
    tx_power_dbm: float = 14.0
    ud_gain_dbi: float = 2.15
    noise_figure_db: float = 6.0
    sir_threshold_db: float = 6.0

    def __post_init__(self):
        if not self.freq_hz > 0:
            raise ConfigError(f"freq_hz must be > 0, got {self.freq_hz}")
        if not self.noise_figure_db >= 0:
            raise ConfigError(f"noise_figure_db must be >= 0, got {self.noise_figure_db}")


# --- modulation schemes ------------------------------------------------------

LORA_SNR_THRESHOLD_DB = {7: -6.0, 10: -15.0, 12: -20.0}
LORA_SENSITIVITY_DBM = {7: -123.0, 10: -132.0, 12: -137.0}
LORAWAN_MAC_OVERHEAD_BYTES = 13  # MHDR(1) + FHDR(7) + FPort(1) + MIC(4)


@dataclass(frozen=True)
class LoRa:
    sf: int
    bw_hz: float = 125_000.0
    channels: int = 80
    cr: int = 1  # 4/(4+cr)
    preamble_symbols: int = 8
    explicit_header: bool = True
    crc_on: bool = True
    frame_overhead_bytes: int = 0
    snr_threshold_db: float | None = None
    sensitivity_dbm: float | None = None

    def __post_init__(self):
        if self.sf not in LORA_SNR_THRESHOLD_DB:
            raise ConfigError(f"sf must be one of {sorted(LORA_SNR_THRESHOLD_DB)}, got {self.sf}")
        if self.channels < 1:
            raise ConfigError("channels must be >= 1")
        if not 1 <= self.cr <= 4:
            raise ConfigError("cr must be 1..4 (coding rate 4/5..4/8)")
        if self.frame_overhead_bytes < 0:
            raise ConfigError("frame_overhead_bytes must be >= 0")
        if self.snr_threshold_db is None:
            object.__setattr__(self, "snr_threshold_db", LORA_SNR_THRESHOLD_DB[self.sf])
        if self.sensitivity_dbm is None:
            object.__setattr__(self, "sensitivity_dbm", LORA_SENSITIVITY_DBM[self.sf])

    @property
    def name(self) -> str:
        return f"SF{self.sf}"

    @property
    def noise_bandwidth_hz(self) -> float:
        return self.bw_hz

    def airtime_s(self, payload_bytes: int) -> float:
        return lora_time_on_air_s(
            self.sf, self.bw_hz, payload_bytes + self.frame_overhead_bytes, self.cr,
            self.preamble_symbols, self.explicit_header, self.crc_on,
        )


@dataclass(frozen=True)
class LrFhssProfile:
    name: str
    region: str
    ocw_bw_hz: float
    obw_channels: int
    grid_separation_hz: float
    header_replicas: int
    cr: Fraction
    max_payload_bytes: int
    header_duration_s: float = 0.233472
    fragment_duration_s: float = 0.1024
    obw_bw_hz: float = 488.0


LRFHSS_PROFILES = {
    p.name: p
    for p in (
        LrFhssProfile("DR5", "FCC", 1.523e6, 3120, 25.4e3, 3, Fraction(1, 3), 58),
        LrFhssProfile("DR6", "FCC", 1.523e6, 3120, 25.4e3, 2, Fraction(2, 3), 133),
        LrFhssProfile("DR8", "ETSI", 137e3, 280, 3.9e3, 3, Fraction(1, 3), 58),
        LrFhssProfile("DR9", "ETSI", 137e3, 280, 3.9e3, 2, Fraction(2, 3), 123),
        LrFhssProfile("DR10", "ETSI", 336e3, 688, 3.9e3, 3, Fraction(1, 3), 58),
        LrFhssProfile("DR11", "ETSI", 336e3, 688, 3.9e3, 2, Fraction(2, 3), 123),
    )
}


@dataclass(frozen=True)
class LrFhss:
    profile: LrFhssProfile = field(default_factory=lambda: LRFHSS_PROFILES["DR8"])
    snr_threshold_db: float = 4.0
    sensitivity_dbm: float = -137.0
    tail_bits: int = 6

    def __post_init__(self):
        if self.tail_bits < 0:
            raise ConfigError(f"tail_bits must be >= 0, got {self.tail_bits}")

    @property
    def name(self) -> str:
        return f"LR-FHSS-{self.profile.name}"

    @property
    def channels(self) -> int:
        return self.profile.obw_channels

    @property
    def noise_bandwidth_hz(self) -> float:
        return self.profile.obw_bw_hz

    def fragment_count(self, payload_bytes: int) -> int:
        return lrfhss_fragment_count(payload_bytes, self.profile.cr, self.profile.max_payload_bytes, self.tail_bits)

    def fragments_needed(self, payload_bytes: int) -> int:
        return fragments_needed(self.fragment_count(payload_bytes), self.profile.cr)

    def airtime_s(self, payload_bytes: int) -> float:
        p = self.profile
        return p.header_replicas * p.header_duration_s + self.fragment_count(payload_bytes) * p.fragment_duration_s


ModulationScheme = Union[LoRa, LrFhss]


def scheme_from_name(name: str) -> ModulationScheme:
    """``"SF7"``, ``"SF10"``, ``"SF12"`` or ``"LR-FHSS"`` / ``"LR-FHSS-DR9"``."""
    key = name.strip().upper()
    if key.startswith("SF"):
        return LoRa(int(key[2:]))
    if key.startswith("LR-FHSS"):
        dr = key[len("LR-FHSS"):].lstrip("-") or "DR8"
        if dr not in LRFHSS_PROFILES:
            raise ConfigError(f"unknown LR-FHSS profile {dr!r}; choose from {sorted(LRFHSS_PROFILES)}")
        return LrFhss(LRFHSS_PROFILES[dr])
    raise ConfigError(f"unknown modulation scheme {name!r}")


# --- link budget ----------------------------------------------------------------


@dataclass(frozen=True)
class LinkBudget:
    pl_underground_db: float
    pl_aboveground_db: float
    rx_power_dbm: float
    noise_dbm: float

    @property
    def snr_db(self) -> float:
        return self.rx_power_dbm - self.noise_dbm


def received_power_dbm(radio: RadioConfig, platform_gain_dbi, pl_u_db, pl_above_db):
    return radio.tx_power_dbm + radio.ud_gain_dbi + platform_gain_dbi - pl_u_db - pl_above_db


def noise_floor_dbm(nf_db: float, bandwidth_hz: float) -> float:
    if not bandwidth_hz > 0:
        raise ConfigError("bandwidth must be > 0")
    return THERMAL_NOISE_DBM_HZ + nf_db + 10.0 * math.log10(bandwidth_hz)


def link_budget(radio: RadioConfig, scheme: ModulationScheme, platform_gain_dbi: float,
                pl_u_db: float, pl_above_db: float) -> LinkBudget:
    return LinkBudget(
        pl_u_db,
        pl_above_db,
        received_power_dbm(radio, platform_gain_dbi, pl_u_db, pl_above_db),
        noise_floor_dbm(radio.noise_figure_db, scheme.noise_bandwidth_hz),
    )


def snr_pass(link: LinkBudget, scheme: ModulationScheme) -> bool:
    return link.snr_db >= scheme.snr_threshold_db


def sir_capture_pass(target_rx_dbm: float, interferer_rx_dbm: Sequence[float], sir_threshold_db: float) -> bool:
    """True when the target beats the summed interference by the threshold."""
    if len(interferer_rx_dbm) == 0:
        return True
    total_dbm = float(mw_to_dbm(np.sum(dbm_to_mw(interferer_rx_dbm))))
    return target_rx_dbm - total_dbm >= sir_threshold_db - SIR_BOUNDARY_TOLERANCE_DB


# --- airtime and fragmentation --------------------------------------------------


def lora_time_on_air_s(
    sf: int,
    bw_hz: float,
    payload_bytes: int,
    cr: int = 1,
    preamble_symbols: int = 8,
    explicit_header: bool = True,
    crc_on: bool = True,
    ldro: bool | None = None,
) -> float:
    """Semtech time-on-air. ``cr`` is 1..4 for 4/5..4/8; low data rate
    optimisation switches on by itself for SF11/SF12 at 125 kHz."""
    if not 0 <= payload_bytes <= 255:
        raise ConfigError(f"payload must be 0..255 bytes, got {payload_bytes}")
    if ldro is None:
        ldro = sf >= 11 and bw_hz <= 125_000
    t_sym = 2**sf / bw_hz
    num = 8 * payload_bytes - 4 * sf + 28 + 16 * int(crc_on) - 20 * int(not explicit_header)
    den = 4 * (sf - 2 * int(ldro))
    n_payload = 8 + max(math.ceil(num / den) * (cr + 4), 0)
    return (preamble_symbols + 4.25 + n_payload) * t_sym


LRFHSS_CRC_BITS = 16
LRFHSS_TAIL_BITS = 6  # convolutional encoder flush
LRFHSS_FRAGMENT_CODED_BITS = 48


def lrfhss_fragment_count(payload_bytes: int, cr=Fraction(1, 3), max_payload_bytes: int = 255,
                          tail_bits: int = LRFHSS_TAIL_BITS) -> int:
    """Payload fragments after convolutional coding.

    Info bits (payload + CRC16 + encoder tail) are expanded by 1/cr and cut
    into 48-bit fragments (each 102.4 ms burst also carries 2 sync bits).
    """
    cr = Fraction(cr)
    if not 0 < payload_bytes <= max_payload_bytes:
        raise ConfigError(f"LR-FHSS payload must be 1..{max_payload_bytes} bytes, got {payload_bytes}")
    coded = (8 * payload_bytes + LRFHSS_CRC_BITS + tail_bits) / cr
    return math.ceil(coded / LRFHSS_FRAGMENT_CODED_BITS)


def fragments_needed(n_fragments: int, cr) -> int:
    """Minimum payload fragments to decode: ceil(N_f * cr)."""
    return math.ceil(n_fragments * Fraction(cr))
