"""Monte Carlo scenarios: deployment, per-trial reception, statistics, sweeps.

Every trial draws from its own generator seeded with ``(seed, trial_index)``,
so results do not depend on how trials are split across workers, and
schemes or sweep points evaluated with the same seed share their random
numbers trial by trial.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .analytical import AnalyticalInputs, packet_success
from .errors import ConfigError, DomainError
from .ntn import (
    EARTH_RADIUS_M,
    MAX_ELEVATION_DEG,
    MIN_ELEVATION_DEG,
    AbovegroundChannel,
    EnvTables,
    Environment,
    LossMode,
    Platform,
    PlatformKind,
    PLATFORM_DEFAULTS,
    elevation_from_slant,
    footprint_central_angle,
    free_space_loss_db,
    g2u_path_loss_db,
    g2u_shadow_sigma_db,
    slant_distance,
)
from .protocol import fragment_pass
from .radio import (
    LoRa,
    LORAWAN_MAC_OVERHEAD_BYTES,
    LrFhss,
    ModulationScheme,
    RadioConfig,
    dbm_to_mw,
    noise_floor_dbm,
)
from .underground import SoilProperties, UndergroundSpec, underground_path_loss_db

log = logging.getLogger(__name__)

WORKERS_ENV = "U2NTN_WORKERS"
Z95 = NormalDist().inv_cdf(0.975)

# devices per km^2 for N = 10k, 50k, 100k
DENSITY_REFERENCE = {
    PlatformKind.UAV: {10_000: 10_000.0, 50_000: 50_000.0, 100_000: 100_000.0},
    PlatformKind.HAP: {10_000: 0.3, 50_000: 1.3, 100_000: 2.7},
    PlatformKind.LEO: {10_000: 0.0009, 50_000: 0.0045, 100_000: 0.009},
}


# --- deployment ----------------------------------------------------------------


@dataclass(frozen=True)
class DeploymentModel:
    """Where devices sit. UAVs cover a flat disc of ``area_km2``; HAP and LEO
    cover the spherical cap whose rim sees the platform at
    ``min_elevation_deg``. A ``density_per_km2`` overrides either footprint
    with area ``N / density``."""

    area_km2: float = 1.0
    min_elevation_deg: float = MIN_ELEVATION_DEG
    density_per_km2: float | None = None

    def __post_init__(self):
        if not self.area_km2 > 0:
            raise ConfigError(f"area_km2 must be > 0, got {self.area_km2}")
        if not MIN_ELEVATION_DEG <= self.min_elevation_deg < MAX_ELEVATION_DEG:
            raise ConfigError(
                f"min_elevation_deg must lie in [{MIN_ELEVATION_DEG:g}, {MAX_ELEVATION_DEG:g}), "
                f"got {self.min_elevation_deg}"
            )
        if self.density_per_km2 is not None and not self.density_per_km2 > 0:
            raise ConfigError(f"density_per_km2 must be > 0, got {self.density_per_km2}")


@dataclass(frozen=True)
class Footprint:
    """Resolved deployment region for one platform."""

    kind: PlatformKind
    altitude_m: float
    radius_m: float = 0.0  # UAV disc radius
    cos_psi_max: float = 1.0  # HAP/LEO cap edge

    @property
    def max_slant_m(self) -> float:
        h = self.altitude_m
        if self.kind is PlatformKind.UAV:
            return math.hypot(self.radius_m, h)
        re = EARTH_RADIUS_M
        return math.sqrt(re * re + (re + h) ** 2 - 2 * re * (re + h) * self.cos_psi_max)

    @property
    def area_km2(self) -> float:
        if self.kind is PlatformKind.UAV:
            return math.pi * self.radius_m**2 / 1e6
        return 2 * math.pi * EARTH_RADIUS_M**2 * (1 - self.cos_psi_max) / 1e6

    def sample(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Slant distance and elevation of ``n`` area-uniform points."""
        h = self.altitude_m
        u = rng.random(n)
        if self.kind is PlatformKind.UAV:
            r = self.radius_m * np.sqrt(u)
            return np.hypot(r, h), np.degrees(np.arctan2(h, r))
        re = EARTH_RADIUS_M
        cos_psi = 1.0 - u * (1.0 - self.cos_psi_max)
        d = np.sqrt(re * re + (re + h) ** 2 - 2 * re * (re + h) * cos_psi)
        elev = np.degrees(np.arcsin(np.clip(((re + h) * cos_psi - re) / d, -1.0, 1.0)))
        return d, elev


def resolve_footprint(platform: Platform, deployment: DeploymentModel, n_devices: int) -> Footprint:
    h = platform.altitude_m
    area_m2 = None
    if deployment.density_per_km2 is not None:
        area_m2 = n_devices / deployment.density_per_km2 * 1e6
    if platform.kind is PlatformKind.UAV:
        if area_m2 is None:
            area_m2 = deployment.area_km2 * 1e6
        fp = Footprint(platform.kind, h, radius_m=math.sqrt(area_m2 / math.pi))
        rim = math.degrees(math.atan2(h, fp.radius_m))
        if rim < deployment.min_elevation_deg - 1e-9:
            raise ConfigError(
                f"UAV footprint of {fp.area_km2:.4g} km^2 puts its rim at {rim:.2f} deg, "
                f"below min_elevation_deg={deployment.min_elevation_deg:g}"
            )
        return fp
    cos_rim = math.cos(footprint_central_angle(h, deployment.min_elevation_deg))
    if area_m2 is None:
        return Footprint(platform.kind, h, cos_psi_max=cos_rim)
    cos_density = 1.0 - area_m2 / (2 * math.pi * EARTH_RADIUS_M**2)
    if cos_density < cos_rim:
        log.warning(
            "density %.4g/km^2 implies a footprint beyond the %.0f deg rim; clipping to the rim",
            deployment.density_per_km2, deployment.min_elevation_deg,
        )
        cos_density = cos_rim
    return Footprint(platform.kind, h, cos_psi_max=cos_density)


def deploy_devices(config: "ScenarioConfig", rng: np.random.Generator, n: int | None = None):
    """Slant distance and elevation of ``n`` (default ``n_devices``) devices."""
    fp = resolve_footprint(config.platform, config.deployment, config.n_devices)
    return fp.sample(rng, config.n_devices if n is None else n)


# --- configuration -------------------------------------------------------------


def default_underground(depth_m: float = 0.6, vwc_fraction: float = 0.1119) -> UndergroundSpec:
    """Gas, plastic pipe wall, soil and asphalt above a buried device."""
    soil = SoilProperties(vwc_fraction=vwc_fraction, clay_fraction=0.1686)
    layers = (
        {"name": "gas", "thickness_m": 0.15, "rel_permittivity": 1.0, "loss_tangent": 0.0},
        {"name": "plastic", "thickness_m": 0.05, "rel_permittivity": 3.0, "loss_tangent": 0.01},
        {"name": "soil", "thickness_m": depth_m},
        {"name": "asphalt", "thickness_m": 0.1, "rel_permittivity": 7.0, "loss_tangent": 0.03},
    )
    return UndergroundSpec(layers=layers, soil=soil)


def default_schemes() -> tuple[ModulationScheme, ...]:
    return tuple(LoRa(sf, frame_overhead_bytes=LORAWAN_MAC_OVERHEAD_BYTES) for sf in (7, 10, 12)) + (LrFhss(),)


@dataclass(frozen=True)
class ScenarioConfig:
    platform: Platform = PLATFORM_DEFAULTS[PlatformKind.UAV]
    environment: Environment = Environment.RURAL
    radio: RadioConfig = field(default_factory=RadioConfig)
    schemes: tuple[ModulationScheme, ...] = field(default_factory=default_schemes)
    period_s: float = 600.0
    payload_bytes: int = 10
    n_devices: int = 50_000
    underground: UndergroundSpec = field(default_factory=default_underground)
    deployment: DeploymentModel = field(default_factory=DeploymentModel)
    trials: int = 10_000
    seed: int = 0
    loss_mode: LossMode = LossMode.EXPECTED_DB
    shadowing: bool = True
    capture: bool = True
    # interferers received below the gateway sensitivity are not detected and do not collide
    sensitivity_filter: bool = True
    interference: str = "poisson"  # or "exhaustive"
    # "area": targets placed like every other device; "stratified": equal trials per bin
    target_placement: str = "area"
    bins: int = 20
    fixed_elevation_deg: float | None = None
    underground_loss_override_db: float | None = None
    scenario_id: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "environment", Environment(self.environment))
        object.__setattr__(self, "loss_mode", LossMode(self.loss_mode))
        if self.n_devices < 1:
            raise ConfigError(f"n_devices must be >= 1, got {self.n_devices}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not self.period_s > 0:
            raise ConfigError(f"period_s must be > 0, got {self.period_s}")
        if self.bins < 1:
            raise ConfigError(f"bins must be >= 1, got {self.bins}")
        if not self.schemes:
            raise ConfigError("at least one modulation scheme is required")
        if self.interference not in ("poisson", "exhaustive"):
            raise ConfigError(f"interference must be 'poisson' or 'exhaustive', got {self.interference!r}")
        if self.target_placement not in ("area", "stratified"):
            raise ConfigError(f"target_placement must be 'area' or 'stratified', got {self.target_placement!r}")
        if self.fixed_elevation_deg is not None and not (
            MIN_ELEVATION_DEG <= self.fixed_elevation_deg <= MAX_ELEVATION_DEG
        ):
            raise ConfigError(
                f"fixed_elevation_deg must lie in [{MIN_ELEVATION_DEG:g}, {MAX_ELEVATION_DEG:g}], "
                f"got {self.fixed_elevation_deg}"
            )
        if self.platform.kind is PlatformKind.UAV and self.fixed_elevation_deg is not None:
            raise ConfigError("fixed_elevation_deg is only supported for HAP and LEO platforms")
        names = [s.name for s in self.schemes]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate schemes in {names}")
        for s in self.schemes:
            if isinstance(s, LrFhss):
                s.fragment_count(self.payload_bytes)
            else:
                s.airtime_s(self.payload_bytes)

    def underground_loss_db(self) -> float:
        if self.underground_loss_override_db is not None:
            return float(self.underground_loss_override_db)
        return underground_path_loss_db(self.underground.build())


# --- statistics ----------------------------------------------------------------


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class BinStats:
    bin_low_m: float
    bin_high_m: float
    elevation_deg: float
    trials: int
    snr_ok: int
    sir_ok: int
    delivered: int

    @property
    def p_snr(self) -> float:
        return self.snr_ok / self.trials if self.trials else float("nan")

    @property
    def p_sir(self) -> float:
        return self.sir_ok / self.trials if self.trials else float("nan")

    @property
    def p_s(self) -> float:
        return self.delivered / self.trials if self.trials else float("nan")

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.delivered, self.trials)

    @property
    def mid_m(self) -> float:
        return 0.5 * (self.bin_low_m + self.bin_high_m)


@dataclass(frozen=True)
class SuccessStats:
    scheme: str
    bins: tuple[BinStats, ...]

    def _pooled(self, attr: str) -> float:
        n = self.trials
        return sum(getattr(b, attr) for b in self.bins) / n if n else float("nan")

    @property
    def trials(self) -> int:
        return sum(b.trials for b in self.bins)

    @property
    def p_snr(self) -> float:
        return self._pooled("snr_ok")

    @property
    def p_sir(self) -> float:
        return self._pooled("sir_ok")

    @property
    def p_s(self) -> float:
        """Scenario-wide success: all trials pooled across bins."""
        return self._pooled("delivered")

    def p_s_between(self, low_m: float, high_m: float) -> float:
        """Pooled success over the bins whose centres fall in the range."""
        sel = [b for b in self.bins if b.trials and low_m <= b.mid_m <= high_m]
        if not sel:
            raise ConfigError(f"no bins with centres in [{low_m}, {high_m}] m")
        return sum(b.delivered for b in sel) / sum(b.trials for b in sel)


# --- trial machinery ------------------------------------------------------------


def bin_edges(config: ScenarioConfig) -> np.ndarray:
    h = config.platform.altitude_m
    if config.fixed_elevation_deg is not None:
        d = slant_distance(h, config.fixed_elevation_deg)
        return np.array([d, d])
    fp = resolve_footprint(config.platform, config.deployment, config.n_devices)
    return np.linspace(h, fp.max_slant_m, config.bins + 1)


def _elevation(altitude_m: float, slant_m):
    return np.clip(elevation_from_slant(altitude_m, slant_m), MIN_ELEVATION_DEG, MAX_ELEVATION_DEG)


def bin_elevation_deg(config: ScenarioConfig, low_m: float, high_m: float) -> float:
    """Elevation seen from the bin's mid slant distance."""
    return float(_elevation(config.platform.altitude_m, 0.5 * (low_m + high_m)))


class _Engine:
    """Everything a trial needs, resolved once per scenario."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        c = config
        self.footprint = resolve_footprint(c.platform, c.deployment, c.n_devices)
        self.edges = bin_edges(c)
        self.n_bins = len(self.edges) - 1
        self.channel = AbovegroundChannel(c.platform, c.environment, c.radio.freq_hz, mode=c.loss_mode,
                                          shadowing=c.shadowing)
        self.pl_u = c.underground_loss_db()
        self.eirp_dbm = c.radio.tx_power_dbm + c.radio.ud_gain_dbi + c.platform.gateway_gain_dbi - self.pl_u
        self.others = c.n_devices - 1
        self.gamma_db = c.radio.sir_threshold_db
        self.schemes = [self._prepare(s) for s in c.schemes]

    def _prepare(self, scheme: ModulationScheme) -> dict:
        c = self.config
        prep = {
            "scheme": scheme,
            "noise_dbm": noise_floor_dbm(c.radio.noise_figure_db, scheme.noise_bandwidth_hz),
            "floor_dbm": scheme.sensitivity_dbm if c.sensitivity_filter else -math.inf,
        }
        msg_rate = self.others / c.period_s
        if isinstance(scheme, LoRa):
            toa = scheme.airtime_s(c.payload_bytes)
            prep["toa"] = toa
            prep["mean_hits"] = msg_rate * 2 * toa / scheme.channels
        else:
            p = scheme.profile
            nf = scheme.fragment_count(c.payload_bytes)
            th, tf = p.header_duration_s, p.fragment_duration_s
            lam_h, lam_f = p.header_replicas * msg_rate, nf * msg_rate
            mean_h = (lam_h * 2 * th + lam_f * (th + tf)) / p.obw_channels
            mean_f = (lam_f * 2 * tf + lam_h * (th + tf)) / p.obw_channels
            prep.update(
                nh=p.header_replicas,
                nf=nf,
                phi=scheme.fragments_needed(c.payload_bytes),
                mean_hits=np.array([mean_h] * p.header_replicas + [mean_f] * nf),
            )
        return prep

    # target placement is the first draw of every trial stream
    def place_target(self, rng: np.random.Generator, trial: int) -> tuple[int, float]:
        if self.config.fixed_elevation_deg is not None:
            rng.random()  # keep stream alignment with the other placements
            return 0, float(self.edges[0])
        if self.config.target_placement == "stratified":
            b = trial % self.n_bins
            lo, hi = self.edges[b], self.edges[b + 1]
            return b, lo + rng.random() * (hi - lo)
        d = float(self.footprint.sample(rng, 1)[0][0])
        b = int(np.clip(np.searchsorted(self.edges, d, side="right") - 1, 0, self.n_bins - 1))
        return b, d

    def rx_dbm(self, slant_m, rng) -> np.ndarray:
        h = self.config.platform.altitude_m
        return self.eirp_dbm - self.channel.sample(slant_m, _elevation(h, slant_m), rng)

    def run_trial(self, prep: dict, rng: np.random.Generator, d_target: float) -> tuple[bool, bool, bool]:
        if isinstance(prep["scheme"], LoRa):
            return self._lora_trial(prep, rng, d_target)
        return self._lrfhss_trial(prep, rng, d_target)

    def _interferers(self, rng, k: int) -> np.ndarray:
        d, _ = self.footprint.sample(rng, k)
        return self.rx_dbm(d, rng)

    def _lora_trial(self, prep, rng, d_target):
        scheme = prep["scheme"]
        rx_t = self.rx_dbm(np.array([d_target]), rng)
        if self.config.interference == "exhaustive":
            starts, chans = self._exhaustive_schedule(rng, 1, scheme.channels)
            hit = (chans[:, 0] == 0) & (np.abs(starts[:, 0]) < prep["toa"])
            rx_i = self._interferers(rng, int(hit.sum()))
        else:
            rx_i = self._interferers(rng, int(rng.poisson(prep["mean_hits"])))
        rx_i = rx_i[rx_i >= prep["floor_dbm"]]
        power = float(dbm_to_mw(rx_i).sum()) if rx_i.size else 0.0
        snr_ok, sir_ok = fragment_pass(rx_t - prep["noise_dbm"], scheme.snr_threshold_db, rx_t, power,
                                       rx_i.size, self.gamma_db, self.config.capture)
        snr_ok, sir_ok = bool(snr_ok[0]), bool(sir_ok[0])
        return snr_ok, sir_ok, snr_ok and sir_ok

    def _lrfhss_trial(self, prep, rng, d_target):
        scheme = prep["scheme"]
        nh, nf = prep["nh"], prep["nf"]
        n_frag = nh + nf
        # one independent link draw per fragment
        rx_t = self.rx_dbm(np.full(n_frag, d_target), rng)
        if self.config.interference == "exhaustive":
            device, frag_idx = self._exhaustive_lrfhss_hits(rng, scheme, nh, nf)
            # fragments from one device share its position but not their link draws
            uniq, inverse = np.unique(device, return_inverse=True)
            d, _ = self.footprint.sample(rng, uniq.size)
            rx_i = self.rx_dbm(d[inverse], rng)
        else:
            counts = rng.poisson(prep["mean_hits"])
            frag_idx = np.repeat(np.arange(n_frag), counts)
            rx_i = self._interferers(rng, frag_idx.size)
        keep = rx_i >= prep["floor_dbm"]
        power = np.bincount(frag_idx[keep], weights=dbm_to_mw(rx_i[keep]), minlength=n_frag)
        n_hit = np.bincount(frag_idx[keep], minlength=n_frag)
        snr_ok, sir_ok = fragment_pass(rx_t - prep["noise_dbm"], scheme.snr_threshold_db, rx_t, power, n_hit,
                                       self.gamma_db, self.config.capture)
        phi = prep["phi"]

        def delivered(ok):
            return bool(ok[:nh].any()) and int(ok[nh:].sum()) >= phi

        return delivered(snr_ok), delivered(sir_ok), delivered(snr_ok & sir_ok)

    # --- every-device scheduling -------------------------------------------

    def _exhaustive_schedule(self, rng, n_events: int, channels: int):
        """Start offsets (relative to the target start, wrapped into one
        period) and channels for every other device."""
        period = self.config.period_s
        starts = rng.uniform(-period / 2, period / 2, size=(self.others, 1))
        chans = rng.integers(0, channels, size=(self.others, n_events))
        return starts, chans

    def _exhaustive_lrfhss_hits(self, rng, scheme: LrFhss, nh: int, nf: int):
        """Device index and target fragment index of every time-and-channel
        overlap between the target plan and the plans of all other devices."""
        p = scheme.profile
        n = nh + nf
        durations = np.array([p.header_duration_s] * nh + [p.fragment_duration_s] * nf)
        offsets = np.concatenate([[0.0], np.cumsum(durations)[:-1]])
        target_ch = rng.integers(0, p.obw_channels, size=n)
        starts, chans = self._exhaustive_schedule(rng, n, p.obw_channels)
        i_start = starts + offsets  # (devices, n)
        i_end = i_start + durations
        t_start, t_end = offsets, offsets + durations
        overlap = (
            (i_start[:, :, None] < t_end[None, None, :])
            & (t_start[None, None, :] < i_end[:, :, None])
            & (chans[:, :, None] == target_ch[None, None, :])
        )
        device, _, frag = np.nonzero(overlap)
        return device, frag


def _run_chunk(config: ScenarioConfig, start: int, stop: int) -> np.ndarray:
    eng = _Engine(config)
    counts = np.zeros((len(eng.schemes), eng.n_bins, 4), dtype=np.int64)
    for t in range(start, stop):
        seq = np.random.SeedSequence([config.seed, t])
        for s, prep in enumerate(eng.schemes):
            rng = np.random.default_rng(seq)
            b, d = eng.place_target(rng, t)
            snr_ok, sir_ok, ok = eng.run_trial(prep, rng, d)
            counts[s, b] += (1, snr_ok, sir_ok, ok)
    return counts


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                workers = int(env)
            except ValueError as exc:
                raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
        else:
            workers = 1
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    return workers


def run_scenario(config: ScenarioConfig, workers: int | None = None) -> list[SuccessStats]:
    """Monte Carlo estimate of SNR, interference and overall success per scheme and bin."""
    workers = resolve_workers(workers)
    eng = _Engine(config)  # surfaces configuration errors before any trial
    bounds = np.linspace(0, config.trials, min(workers, config.trials) + 1).astype(int)
    chunks = list(zip(bounds[:-1], bounds[1:]))
    if len(chunks) == 1:
        counts = _run_chunk(config, 0, config.trials)
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = pool.map(_run_chunk, [config] * len(chunks), *zip(*chunks))
            counts = sum(parts)
    h = config.platform.altitude_m
    out = []
    for s, prep in enumerate(eng.schemes):
        bins = []
        for b in range(eng.n_bins):
            lo, hi = float(eng.edges[b]), float(eng.edges[b + 1])
            n, snr, sir, ok = (int(x) for x in counts[s, b])
            bins.append(BinStats(lo, hi, float(_elevation(h, 0.5 * (lo + hi))), n, snr, sir, ok))
        out.append(SuccessStats(prep["scheme"].name, tuple(bins)))
    return out


# --- closed-form companions -----------------------------------------------------


def fragment_success_by_bin(config: ScenarioConfig, scheme: ModulationScheme, points: int = 400) -> list[float]:
    """Probability that one fragment (or packet) clears the SNR threshold with
    no interference, averaged over each bin by the midpoint rule on slant
    distance. Uses the Gaussian shadowing of the loss models in closed form
    rather than sampling."""
    c = config
    eng_edges = bin_edges(c)
    h = c.platform.altitude_m
    pl_u = c.underground_loss_db()
    noise = noise_floor_dbm(c.radio.noise_figure_db, scheme.noise_bandwidth_hz)
    budget = c.radio.tx_power_dbm + c.radio.ud_gain_dbi + c.platform.gateway_gain_dbi - pl_u - noise
    max_loss = budget - scheme.snr_threshold_db
    cdf = np.vectorize(NormalDist().cdf)
    out = []
    for lo, hi in zip(eng_edges[:-1], eng_edges[1:]):
        u = (np.arange(points) + 0.5) / points
        d = lo + u * (hi - lo)
        if c.platform.kind is PlatformKind.UAV:
            mean = g2u_path_loss_db(c.environment, h, d, c.radio.freq_hz, 0.0)
            sigma = g2u_shadow_sigma_db(c.environment, h) if c.shadowing else 0.0
            p = _normal_below(max_loss, mean, sigma, cdf)
        else:
            elev = _elevation(h, d)
            p_los, s_los, s_nlos, clutter = EnvTables.load().columns(c.environment, elev)
            fs = free_space_loss_db(c.radio.freq_hz, d)
            if not c.shadowing:
                s_los = s_nlos = np.zeros_like(d)
            if c.loss_mode is LossMode.EXPECTED_DB:
                mean = fs + (1 - p_los) * clutter
                sigma = np.hypot(p_los * s_los, (1 - p_los) * s_nlos)
                p = _normal_below(max_loss, mean, sigma, cdf)
            else:
                p = p_los * _normal_below(max_loss, fs, s_los, cdf) + (1 - p_los) * _normal_below(
                    max_loss, fs + clutter, s_nlos, cdf
                )
        out.append(float(np.mean(p)))
    return out


def _normal_below(x, mean, sigma, cdf):
    mean = np.asarray(mean, dtype=float)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), mean.shape)
    safe = np.where(sigma > 0, sigma, 1.0)
    return np.where(sigma > 0, cdf((x - mean) / safe), (mean <= x).astype(float))


def analytical_by_bin(config: ScenarioConfig, scheme: LrFhss) -> list[float]:
    """Closed-form LR-FHSS success for each distance bin."""
    if not isinstance(scheme, LrFhss):
        raise ConfigError("the closed-form model covers LR-FHSS only")
    base = AnalyticalInputs.for_scheme(scheme, config.n_devices, config.period_s, config.payload_bytes)
    return [packet_success(replace(base, fragment_success=z)) for z in fragment_success_by_bin(config, scheme)]


# --- sweeps and selection -------------------------------------------------------

SWEEP_PARAMETERS = ("n_devices", "burial_depth", "vwc", "environment", "elevation")


def with_parameter(config: ScenarioConfig, parameter: str, value) -> ScenarioConfig:
    """Copy of ``config`` with one sweepable parameter changed."""
    if parameter == "n_devices":
        iv = int(value)
        if iv != float(value):
            raise ConfigError(f"n_devices must be an integer, got {value}")
        return replace(config, n_devices=iv)
    if parameter == "burial_depth":
        ug = config.underground
        layers = tuple(
            {**l, "thickness_m": float(value)} if l["name"] == ug.soil_layer else l for l in ug.layers
        )
        if all(l["name"] != ug.soil_layer for l in ug.layers):
            raise ConfigError(f"no layer named {ug.soil_layer!r} to resize")
        new = replace(config, underground=replace(ug, layers=layers))
        new.underground.build()
        return new
    if parameter == "vwc":
        ug = config.underground
        new = replace(config, underground=replace(ug, soil=replace(ug.soil, vwc_fraction=float(value))))
        new.underground.build()
        return new
    if parameter == "environment":
        new = replace(config, environment=Environment(value))
        _Engine(new)
        return new
    if parameter == "elevation":
        return replace(config, fixed_elevation_deg=float(value))
    raise ConfigError(f"unknown sweep parameter {parameter!r}; choose from {', '.join(SWEEP_PARAMETERS)}")


@dataclass(frozen=True)
class SweepPoint:
    parameter: str
    value: object
    stats: tuple[SuccessStats, ...] = ()
    error: str | None = None


def sweep(config: ScenarioConfig, parameter: str, values: Sequence, workers: int | None = None) -> list[SweepPoint]:
    """One scenario per value with the same seed; bad values become error entries."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"unknown sweep parameter {parameter!r}; choose from {', '.join(SWEEP_PARAMETERS)}")
    points = []
    for v in values:
        try:
            cfg = with_parameter(config, parameter, v)
            points.append(SweepPoint(parameter, v, tuple(run_scenario(cfg, workers))))
        except (ConfigError, DomainError, ValueError) as exc:
            log.warning("sweep %s=%s skipped: %s", parameter, v, exc)
            points.append(SweepPoint(parameter, v, error=str(exc)))
    return points


@dataclass(frozen=True)
class Ranking:
    scheme: str
    p_s: float
    airtime_s: float


def rank_schemes(config: ScenarioConfig, stats: Sequence[SuccessStats],
                 slant_range_m: tuple[float, float] | None = None) -> list[Ranking]:
    by_name = {s.name: s for s in config.schemes}
    rows = []
    for st in stats:
        p = st.p_s if slant_range_m is None else st.p_s_between(*slant_range_m)
        rows.append(Ranking(st.scheme, p, by_name[st.scheme].airtime_s(config.payload_bytes)))
    return sorted(rows, key=lambda r: (-r.p_s, r.airtime_s))


def select_best_modulation(config: ScenarioConfig, slant_range_m: tuple[float, float] | None = None,
                           workers: int | None = None) -> list[Ranking]:
    """Schemes ranked by bin-averaged success; equal success goes to the shorter airtime."""
    return rank_schemes(config, run_scenario(config, workers), slant_range_m)
