"""Aboveground path loss and slant geometry for UAV, HAP and LEO gateways."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError, DomainError, UnsupportedModelError

EARTH_RADIUS_M = 6_371_000.0
C0 = 299_792_458.0
MIN_ELEVATION_DEG = 10.0
MAX_ELEVATION_DEG = 90.0
REFERENCE_ANGLES = tuple(range(10, 91, 10))
UAV_MIN_LOS_ALTITUDE_M = 100.0


class PlatformKind(str, enum.Enum):
    UAV = "uav"
    HAP = "hap"
    LEO = "leo"


class Environment(str, enum.Enum):
    RURAL = "rural"
    URBAN = "urban"
    DENSE_URBAN = "dense_urban"


class LossMode(str, enum.Enum):
    EXPECTED_DB = "expected-db"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class Platform:
    kind: PlatformKind
    altitude_m: float
    gateway_gain_dbi: float

    def __post_init__(self):
        object.__setattr__(self, "kind", PlatformKind(self.kind))
        if not self.altitude_m > 0:
            raise ConfigError(f"altitude_m must be > 0, got {self.altitude_m}")
        if self.kind is PlatformKind.UAV and self.altitude_m < UAV_MIN_LOS_ALTITUDE_M:
            raise ConfigError(
                f"UAV altitude_m must be >= {UAV_MIN_LOS_ALTITUDE_M:g} for the full-LOS G2U model, "
                f"got {self.altitude_m}"
            )


PLATFORM_DEFAULTS = {
    PlatformKind.UAV: Platform(PlatformKind.UAV, 100.0, 2.0),
    PlatformKind.HAP: Platform(PlatformKind.HAP, 20_000.0, 17.0),
    PlatformKind.LEO: Platform(PlatformKind.LEO, 550_000.0, 35.0),
}


# --- geometry ---------------------------------------------------------------


def _check_elevation(elevation_deg) -> None:
    e = np.asarray(elevation_deg, dtype=float)
    if np.any(e < MIN_ELEVATION_DEG - 1e-9) or np.any(e > MAX_ELEVATION_DEG + 1e-9):
        raise DomainError(
            f"elevation must lie in [{MIN_ELEVATION_DEG:g}, {MAX_ELEVATION_DEG:g}] deg, got {elevation_deg}"
        )


def slant_distance(altitude_m, elevation_deg):
    """Line-of-sight range to a platform at ``altitude_m`` seen at ``elevation_deg``
    over a spherical Earth."""
    _check_elevation(elevation_deg)
    s = np.sin(np.radians(elevation_deg))
    h = np.asarray(altitude_m, dtype=float)
    re = EARTH_RADIUS_M
    d = np.sqrt(re * re * s * s + h * h + 2 * h * re) - re * s
    # exact at zenith, where the expression above loses digits to cancellation
    d = np.where(np.asarray(elevation_deg) == 90.0, h, d)
    return float(d) if d.ndim == 0 else d


def elevation_from_slant(altitude_m, slant_m):
    """Inverse of :func:`slant_distance` (degrees, not range-checked)."""
    h = np.asarray(altitude_m, dtype=float)
    d = np.asarray(slant_m, dtype=float)
    re = EARTH_RADIUS_M
    s = (h * h + 2 * h * re - d * d) / (2 * re * d)
    out = np.degrees(np.arcsin(np.clip(s, -1.0, 1.0)))
    return float(out) if out.ndim == 0 else out


def elevation_from_ground_offset(altitude_m, ground_offset_m, kind=PlatformKind.UAV):
    """Elevation of the platform seen from a point ``ground_offset_m`` away from
    its nadir. Flat Earth for UAVs, spherical cap (arc length) for HAP/LEO.

    Values below 10 deg mean the point is outside the footprint; callers
    check that rather than this function raising.
    """
    kind = PlatformKind(kind)
    h = np.asarray(altitude_m, dtype=float)
    x = np.asarray(ground_offset_m, dtype=float)
    if kind is PlatformKind.UAV:
        out = np.degrees(np.arctan2(h, x))
    else:
        re = EARTH_RADIUS_M
        psi = x / re
        d = np.sqrt(re * re + (re + h) ** 2 - 2 * re * (re + h) * np.cos(psi))
        s = np.where(d > 0, ((re + h) * np.cos(psi) - re) / np.where(d > 0, d, 1.0), 1.0)
        out = np.degrees(np.arcsin(np.clip(s, -1.0, 1.0)))
    return float(out) if out.ndim == 0 else out


def footprint_central_angle(altitude_m: float, min_elevation_deg: float = MIN_ELEVATION_DEG) -> float:
    """Earth-central angle (rad) between nadir and the footprint rim."""
    e = math.radians(min_elevation_deg)
    return math.acos(EARTH_RADIUS_M * math.cos(e) / (EARTH_RADIUS_M + altitude_m)) - e


def reference_angle(elevation_deg):
    """Nearest tabulated reference angle (10..90 in 10 deg steps)."""
    e = np.asarray(elevation_deg, dtype=float)
    ref = np.clip(np.floor(e / 10.0 + 0.5) * 10.0, 10.0, 90.0).astype(int)
    return int(ref) if ref.ndim == 0 else ref


# --- 3GPP tables --------------------------------------------------------------


@dataclass(frozen=True)
class EnvRow:
    p_los: float
    sigma_los_db: float
    sigma_nlos_db: float
    clutter_nlos_db: float


class EnvTables:
    """LOS probability, shadow-fading spreads and NLOS clutter loss per
    (environment, reference elevation). Lookup is nearest reference angle."""

    def __init__(self, rows: dict[tuple[Environment, int], EnvRow], version: str = ""):
        self._rows = dict(rows)
        self.version = version
        for env in Environment:
            ps = [self._rows[(env, a)].p_los for a in REFERENCE_ANGLES if (env, a) in self._rows]
            if any(b < a for a, b in zip(ps, ps[1:])):
                raise ConfigError(f"p_los must be nondecreasing in elevation for {env.value}")

    @classmethod
    def from_text(cls, text: str) -> "EnvTables":
        version = ""
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                if "asset_version:" in line:
                    version = line.split("asset_version:", 1)[1].strip()
                continue
            if line.strip():
                body.append(line)
        rows = {}
        for rec in csv.DictReader(io.StringIO("\n".join(body))):
            key = (Environment(rec["environment"]), int(rec["elevation_deg"]))
            row = EnvRow(
                float(rec["p_los"]),
                float(rec["sigma_los_db"]),
                float(rec["sigma_nlos_db"]),
                float(rec["clutter_nlos_db"]),
            )
            if not 0.0 <= row.p_los <= 1.0:
                raise ConfigError(f"p_los out of [0, 1] at {key}")
            rows[key] = row
        return cls(rows, version)

    @classmethod
    def load(cls, path=None) -> "EnvTables":
        if path is None:
            text = resources.files("u2ntn.data").joinpath("ntn_tables.csv").read_text()
        else:
            with open(path) as fh:
                text = fh.read()
        return cls.from_text(text)

    def lookup(self, env, elevation_deg) -> EnvRow:
        key = (Environment(env), reference_angle(elevation_deg))
        try:
            return self._rows[key]
        except KeyError:
            raise ConfigError(f"no table entry for {key[0].value} at {key[1]} deg") from None

    def columns(self, env, elevation_deg):
        """Vectorised lookup returning (p_los, sigma_los, sigma_nlos, clutter) arrays."""
        env = Environment(env)
        ref = np.atleast_1d(reference_angle(elevation_deg))
        table = np.full((91, 4), np.nan)
        for (e, a), r in self._rows.items():
            if e is env:
                table[a] = (r.p_los, r.sigma_los_db, r.sigma_nlos_db, r.clutter_nlos_db)
        vals = table[ref]
        if np.isnan(vals).any():
            raise ConfigError(f"missing table entries for {env.value}")
        return vals[:, 0], vals[:, 1], vals[:, 2], vals[:, 3]


# --- path loss ------------------------------------------------------------------


def free_space_loss_db(freq_hz, distance_m):
    return 20 * np.log10(freq_hz) + 20 * np.log10(distance_m) + 20 * math.log10(4 * math.pi / C0)


def g2u_shadow_sigma_db(env, altitude_m):
    env = Environment(env)
    if env is Environment.RURAL:
        return 4.2 * np.exp(-0.0046 * altitude_m)
    if env is Environment.URBAN:
        return 4.64 * np.exp(-0.0066 * altitude_m)
    raise UnsupportedModelError(f"no ground-to-UAV model for {env.value}")


def g2u_path_loss_db(env, altitude_m, slant_distance_m, freq_hz, shadow_draw=0.0):
    """Ground-to-UAV loss. ``shadow_draw`` is a standard-normal variate scaled
    by the altitude-dependent spread; pass 0 to disable shadowing."""
    env = Environment(env)
    sigma = g2u_shadow_sigma_db(env, altitude_m)
    d = np.asarray(slant_distance_m, dtype=float)
    if np.any(d < altitude_m * (1 - 1e-12)):
        raise DomainError("ground-to-UAV distance cannot be shorter than the altitude")
    if env is Environment.RURAL:
        slope = max(23.9 - 1.8 * math.log10(altitude_m), 20.0)
        loss = slope * np.log10(d) + 20 * math.log10(40 * math.pi * freq_hz / 3) - 180
    else:
        loss = -152 + 22 * np.log10(d) + 20 * math.log10(freq_hz)
    return loss + sigma * np.asarray(shadow_draw, dtype=float)


def g2x_path_loss_db(
    env,
    tables: EnvTables,
    elevation_deg,
    slant_distance_m,
    freq_hz,
    mode=LossMode.EXPECTED_DB,
    shadow_draws=(0.0, 0.0),
    los_draw=None,
):
    """Ground-to-HAP/satellite loss: free space + shadowing + clutter.

    ``shadow_draws`` are standard-normal variates for the LOS and NLOS
    branches. In expected-db mode the two branch losses are weighted by the
    LOS probability; in sampled mode ``los_draw`` (uniform on [0, 1)) picks
    one branch.
    """
    mode = LossMode(mode)
    p_los, s_los, s_nlos, clutter = tables.columns(env, elevation_deg)
    fs = free_space_loss_db(freq_hz, np.asarray(slant_distance_m, dtype=float))
    z_los, z_nlos = (np.asarray(z, dtype=float) for z in shadow_draws)
    los_branch = s_los * z_los
    nlos_branch = s_nlos * z_nlos + clutter
    if mode is LossMode.EXPECTED_DB:
        extra = p_los * los_branch + (1 - p_los) * nlos_branch
    else:
        if los_draw is None:
            raise ValueError("sampled mode needs a los_draw")
        extra = np.where(np.asarray(los_draw) < p_los, los_branch, nlos_branch)
    out = fs + extra
    if np.ndim(elevation_deg) == 0 and np.ndim(slant_distance_m) == 0:
        return float(np.asarray(out).reshape(-1)[0])
    return out


class AbovegroundChannel:
    """Vectorised loss sampler bound to a platform, environment and frequency."""

    def __init__(self, platform: Platform, env, freq_hz: float, tables: EnvTables | None = None,
                 mode=LossMode.EXPECTED_DB, shadowing: bool = True):
        self.platform = platform
        self.env = Environment(env)
        self.freq_hz = freq_hz
        self.mode = LossMode(mode)
        self.shadowing = shadowing
        if platform.kind is PlatformKind.UAV:
            g2u_shadow_sigma_db(self.env, platform.altitude_m)
            self.tables = None
        else:
            self.tables = tables if tables is not None else EnvTables.load()
            self.tables.columns(self.env, 45.0)

    def sample(self, slant_m, elevation_deg, rng: np.random.Generator):
        slant_m = np.asarray(slant_m, dtype=float)
        n = slant_m.shape
        if self.platform.kind is PlatformKind.UAV:
            z = rng.standard_normal(n) if self.shadowing else np.zeros(n)
            return g2u_path_loss_db(self.env, self.platform.altitude_m, slant_m, self.freq_hz, z)
        if self.shadowing:
            z_los, z_nlos = rng.standard_normal(n), rng.standard_normal(n)
        else:
            z_los = z_nlos = np.zeros(n)
        u = rng.random(n) if self.mode is LossMode.SAMPLED else None
        return np.asarray(g2x_path_loss_db(self.env, self.tables, elevation_deg, slant_m, self.freq_hz,
                                           self.mode, (z_los, z_nlos), u), dtype=float).reshape(n)
