"""Per-packet reception decisions for LoRa and LR-FHSS under interference.

The object-level API (``TransmissionEvent`` lists in, ``ReceptionOutcome``
out) is what callers and tests see. The Monte Carlo engine calls the array
helpers ``fragment_pass`` / ``capture_mask`` directly so that a trial costs a
handful of numpy calls instead of thousands of Python objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError
from .radio import (
    SIR_BOUNDARY_TOLERANCE_DB,
    LoRa,
    LrFhss,
    ModulationScheme,
    dbm_to_mw,
    fragments_needed,
    mw_to_dbm,
)

# (rng, n) -> rx power in dBm for n interferers drawn from the deployment
PowerSampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class TransmissionEvent:
    start_s: float
    duration_s: float
    channel_index: int
    rx_power_dbm: float

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ConfigError(f"duration_s must be > 0, got {self.duration_s}")
        if self.channel_index < 0:
            raise ConfigError(f"channel_index must be >= 0, got {self.channel_index}")

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s

    def overlaps(self, other: "TransmissionEvent") -> bool:
        """Any shared time on the same channel counts, partial overlap included."""
        return (
            self.channel_index == other.channel_index
            and self.start_s < other.end_s
            and other.start_s < self.end_s
        )


@dataclass(frozen=True)
class FragmentPlan:
    header_events: tuple[TransmissionEvent, ...]
    payload_events: tuple[TransmissionEvent, ...]
    channels: int

    def __post_init__(self):
        events = self.events
        for a, b in zip(events, events[1:]):
            if b.start_s < a.end_s - 1e-12:
                raise ConfigError("fragments of one transmission must be time-ordered and disjoint")
        if any(e.channel_index >= self.channels for e in events):
            raise ConfigError(f"hop channel outside [0, {self.channels})")

    @property
    def events(self) -> tuple[TransmissionEvent, ...]:
        return self.header_events + self.payload_events

    @property
    def hop_channels(self) -> tuple[int, ...]:
        return tuple(e.channel_index for e in self.events)


@dataclass(frozen=True)
class ReceptionOutcome:
    snr_ok: bool
    collided: bool
    captured: bool
    delivered: bool
    headers_received: int = 0
    fragments_received: int = 0


# --- array helpers -------------------------------------------------------------


def capture_mask(target_dbm, interference_mw, sir_threshold_db: float) -> np.ndarray:
    """Elementwise capture test: target power against summed interference."""
    with np.errstate(divide="ignore", invalid="ignore"):
        sir_db = np.asarray(target_dbm, dtype=float) - mw_to_dbm(interference_mw)
    return sir_db >= sir_threshold_db - SIR_BOUNDARY_TOLERANCE_DB


def fragment_pass(snr_db, snr_threshold_db, target_dbm, interference_mw, n_interferers,
                  sir_threshold_db: float, capture: bool = True):
    """Per-fragment verdicts ``(snr_ok, interference_ok)``.

    ``interference_mw`` and ``n_interferers`` describe the co-channel,
    time-overlapping interferers of each fragment.
    """
    snr_ok = np.asarray(snr_db) >= snr_threshold_db
    n = np.asarray(n_interferers)
    clear = n == 0
    if capture:
        sir_ok = clear | capture_mask(target_dbm, interference_mw, sir_threshold_db)
    else:
        sir_ok = clear
    return tuple(np.broadcast_arrays(snr_ok, sir_ok))


def _overlap_power(target: TransmissionEvent, interferers: Sequence[TransmissionEvent]) -> tuple[int, float]:
    hits = [i for i in interferers if target.overlaps(i)]
    return len(hits), float(np.sum(dbm_to_mw([i.rx_power_dbm for i in hits]))) if hits else 0.0


# --- LoRa ------------------------------------------------------------------------


def lora_receive(target: TransmissionEvent, interferers: Sequence[TransmissionEvent], scheme: LoRa,
                 sir_threshold_db: float, noise_dbm: float, capture: bool = True) -> ReceptionOutcome:
    """SNR gate first, then collision and capture over all overlapping co-channel packets."""
    n_hit, power_mw = _overlap_power(target, interferers)
    snr_ok, sir_ok = fragment_pass(target.rx_power_dbm - noise_dbm, scheme.snr_threshold_db,
                                   target.rx_power_dbm, power_mw, n_hit, sir_threshold_db, capture)
    snr_ok, sir_ok = bool(snr_ok), bool(sir_ok)
    return ReceptionOutcome(
        snr_ok=snr_ok,
        collided=n_hit > 0,
        captured=n_hit > 0 and sir_ok,
        delivered=snr_ok and sir_ok,
    )


# --- LR-FHSS ---------------------------------------------------------------------


def lrfhss_schedule(payload_bytes: int, scheme: LrFhss, rng: np.random.Generator, start_s: float = 0.0,
                    rx_power_dbm=0.0) -> FragmentPlan:
    """Header replicas then payload fragments back to back, each on its own
    uniformly drawn OBW channel. ``rx_power_dbm`` may be a scalar or one
    value per fragment."""
    p = scheme.profile
    nh, nf = p.header_replicas, scheme.fragment_count(payload_bytes)
    hops = rng.integers(0, p.obw_channels, size=nh + nf)
    power = np.broadcast_to(np.asarray(rx_power_dbm, dtype=float), (nh + nf,))
    events, t = [], start_s
    for k in range(nh + nf):
        dur = p.header_duration_s if k < nh else p.fragment_duration_s
        events.append(TransmissionEvent(t, dur, int(hops[k]), float(power[k])))
        t += dur
    return FragmentPlan(tuple(events[:nh]), tuple(events[nh:]), p.obw_channels)


def lrfhss_receive(target: FragmentPlan, interferer_fragments: Sequence[TransmissionEvent], scheme: LrFhss,
                   sir_threshold_db: float, noise_dbm: float, capture: bool = True) -> ReceptionOutcome:
    """Fragment-by-fragment SNR, collision and capture checks, then the
    one-header and enough-fragments delivery rule."""
    nh = len(target.header_events)
    events = target.events
    counts, powers = zip(*(_overlap_power(e, interferer_fragments) for e in events))
    rx = np.array([e.rx_power_dbm for e in events])
    snr_ok, sir_ok = fragment_pass(rx - noise_dbm, scheme.snr_threshold_db, rx, np.array(powers),
                                   np.array(counts), sir_threshold_db, capture)
    ok = snr_ok & sir_ok
    h_rx, f_rx = int(ok[:nh].sum()), int(ok[nh:].sum())
    phi = fragments_needed(len(target.payload_events), scheme.profile.cr)
    collided = any(c > 0 for c in counts)
    return ReceptionOutcome(
        snr_ok=bool(snr_ok[:nh].any() and snr_ok[nh:].sum() >= phi),
        collided=collided,
        captured=bool(collided and np.any(sir_ok & (np.array(counts) > 0))),
        delivered=h_rx >= 1 and f_rx >= phi,
        headers_received=h_rx,
        fragments_received=f_rx,
    )


# --- interference --------------------------------------------------------------


def _uniform_events(rng, rate_per_s, lo, hi, duration, channels, powers: PowerSampler):
    k = int(rng.poisson(rate_per_s * (hi - lo)))
    if k == 0:
        return []
    starts = rng.uniform(lo, hi, size=k)
    chans = rng.integers(0, channels, size=k)
    rx = powers(rng, k)
    return [TransmissionEvent(float(s), duration, int(c), float(p)) for s, c, p in zip(starts, chans, rx)]


def sample_interference(scheme: ModulationScheme, n_devices: int, period_s: float, target, payload_bytes: int,
                        powers: PowerSampler, rng: np.random.Generator) -> list[TransmissionEvent]:
    """Poisson field of transmissions that could overlap ``target``.

    LoRa: packets starting within one airtime either side of the target
    start, on any of the scheme's channels. LR-FHSS: ``target`` is a
    ``FragmentPlan``; header replicas and payload fragments of other devices,
    in the N_h:N_f mix, that could overlap any part of it.
    """
    if n_devices < 0:
        raise ConfigError(f"n_devices must be >= 0, got {n_devices}")
    if not period_s > 0:
        raise ConfigError(f"period_s must be > 0, got {period_s}")
    if n_devices == 0:
        return []
    msg_rate = n_devices / period_s
    if isinstance(scheme, LoRa):
        toa = scheme.airtime_s(payload_bytes)
        return _uniform_events(rng, msg_rate, target.start_s - toa, target.start_s + toa, toa,
                               scheme.channels, powers)
    p = scheme.profile
    nf = scheme.fragment_count(payload_bytes)
    first, last = target.events[0].start_s, target.events[-1].end_s
    return (
        _uniform_events(rng, p.header_replicas * msg_rate, first - p.header_duration_s, last,
                        p.header_duration_s, p.obw_channels, powers)
        + _uniform_events(rng, nf * msg_rate, first - p.fragment_duration_s, last,
                          p.fragment_duration_s, p.obw_channels, powers)
    )
