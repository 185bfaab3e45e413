"""TOML scenario documents: strict parsing, defaults, presets and round trip.

Every key carries its unit in its name (``altitude_m``, ``freq_hz``,
``period_s``). Unknown keys are rejected; a key whose stem matches a known
key with a different unit suffix is reported as a unit mismatch.
"""

from __future__ import annotations

import logging
import math
from dataclasses import replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import tomlkit

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .ntn import MIN_ELEVATION_DEG, PLATFORM_DEFAULTS, Environment, LossMode, Platform, PlatformKind
from .radio import LRFHSS_PROFILES, LORAWAN_MAC_OVERHEAD_BYTES, LoRa, LrFhss, RadioConfig
from .scenario import DeploymentModel, ScenarioConfig, default_underground
from .underground import SoilProperties, UndergroundSpec

log = logging.getLogger(__name__)

PRESET_SUFFIX = ".preset"

_TABLE4_UNDERGROUND = default_underground()

# section -> key -> (type, default); None default means "optional, absent"
SCHEMA: dict[str, dict[str, tuple[type, Any]]] = {
    "platform": {
        "kind": (str, "uav"),
        "altitude_m": (float, None),
        "gateway_gain_dbi": (float, None),
    },
    "environment": {
        "kind": (str, "rural"),
        "loss_mode": (str, LossMode.EXPECTED_DB.value),
        "shadowing": (bool, True),
    },
    "radio": {
        "freq_hz": (float, 433e6),
        "tx_power_dbm": (float, 14.0),
        "ud_gain_dbi": (float, 2.15),
        "noise_figure_db": (float, 6.0),
        "sir_threshold_db": (float, 6.0),
    },
    "lora": {
        "enabled": (bool, True),
        "sf": (list, [7, 10, 12]),
        "bw_hz": (float, 125_000.0),
        "channels": (int, 80),
        "coding_rate": (str, "4/5"),
        "preamble_symbols": (int, 8),
        "mac_overhead_bytes": (int, LORAWAN_MAC_OVERHEAD_BYTES),
    },
    "lrfhss": {
        "enabled": (bool, True),
        "profile": (str, "DR8"),
        "snr_threshold_db": (float, 4.0),
        "sensitivity_dbm": (float, -137.0),
        "tail_bits": (int, 6),
    },
    "underground": {
        "dielectric_model": (str, "mironov"),
        "multipath_margin_db": (float, 27.0),
        "soil_layer": (str, "soil"),
        "soil_rel_permittivity": (float, None),
        "soil_attenuation_np_per_m": (float, None),
        "loss_override_db": (float, None),
        "layers": (list, [dict(layer) for layer in _TABLE4_UNDERGROUND.layers]),
    },
    "soil": {
        "vwc_fraction": (float, 0.1119),
        "clay_fraction": (float, 0.1686),
        "sand_fraction": (float, 0.5),
        "bulk_density_g_cm3": (float, 1.5),
        "particle_density_g_cm3": (float, 2.66),
    },
    "traffic": {
        "period_s": (float, 600.0),
        "payload_bytes": (int, 10),
        "pattern": (str, "periodic"),
    },
    "deployment": {
        "n_devices": (int, 50_000),
        "area_km2": (float, 1.0),
        "density_per_km2": (float, None),
        "min_elevation_deg": (float, MIN_ELEVATION_DEG),
        "fixed_elevation_deg": (float, None),
        "target_placement": (str, "area"),
    },
    "run": {
        "scenario_id": (str, "scenario"),
        "trials": (int, 10_000),
        "seed": (int, 0),
        "capture": (bool, True),
        "sensitivity_filter": (bool, True),
        "interference": (str, "poisson"),
        "bins": (int, 20),
    },
}

LAYER_KEYS = {
    "name": str,
    "thickness_m": float,
    "rel_permittivity": float,
    "loss_tangent": float,
    "attenuation_np_per_m": float,
}

_UNIT_SUFFIXES = ("_m", "_km", "_hz", "_mhz", "_ghz", "_dbm", "_dbi", "_db", "_s", "_ms", "_deg", "_rad",
                  "_fraction", "_percent", "_km2", "_np_per_m", "_g_cm3", "_bytes")


def _stem(key: str) -> str:
    for suf in sorted(_UNIT_SUFFIXES, key=len, reverse=True):
        if key.endswith(suf):
            return key[: -len(suf)]
    return key


def _unknown_key_error(where: str, key: str, known) -> ConfigError:
    matches = [k for k in known if _stem(k) == _stem(key) and k != key]
    if matches:
        return ConfigError(f"unit mismatch for {where}.{key}: expected {where}.{matches[0]}")
    return ConfigError(f"unknown key {where}.{key}; allowed: {', '.join(sorted(known))}")


def _coerce(where: str, value, kind: type):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{where} must be finite, got {value}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}")
        return value
    if kind is list:
        if not isinstance(value, list):
            value = [value]
        return list(value)
    raise AssertionError(kind)


def normalize_document(doc: dict, log_overrides: bool = True) -> dict:
    """Validate keys and types and fill defaults, logging every override."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a table of sections")
    for section in doc:
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]; allowed: {', '.join(SCHEMA)}")
    out: dict[str, dict] = {}
    for section, keys in SCHEMA.items():
        given = doc.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in given:
            if key not in keys:
                raise _unknown_key_error(section, key, keys)
        out[section] = {}
        for key, (kind, default) in keys.items():
            if key in given:
                value = _coerce(f"{section}.{key}", given[key], kind)
                if log_overrides and default is not None and value != default:
                    log.info("override %s.%s = %r (default %r)", section, key, value, default)
            else:
                value = default
            if value is not None:
                out[section][key] = value
    out["underground"]["layers"] = [_normalize_layer(i, l) for i, l in enumerate(out["underground"]["layers"])]
    return out


def _normalize_layer(index: int, layer) -> dict:
    where = f"underground.layers[{index}]"
    if not isinstance(layer, dict):
        raise ConfigError(f"{where} must be a table")
    for key in layer:
        if key not in LAYER_KEYS:
            raise _unknown_key_error(where, key, LAYER_KEYS)
    for key in ("name", "thickness_m"):
        if key not in layer:
            raise ConfigError(f"{where} needs {key}")
    return {k: _coerce(f"{where}.{k}", v, LAYER_KEYS[k]) for k, v in layer.items()}


def _parse_coding_rate(text: str) -> int:
    try:
        fr = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"lora.coding_rate must look like '4/5', got {text!r}") from exc
    if fr.numerator != 4 or not 5 <= fr.denominator <= 8:
        raise ConfigError(f"lora.coding_rate must be one of 4/5, 4/6, 4/7, 4/8, got {text!r}")
    return fr.denominator - 4


def _choice(where: str, value: str, enum_cls):
    try:
        return enum_cls(value)
    except ValueError as exc:
        allowed = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"{where} must be one of {allowed}, got {value!r}") from exc


def build_config(doc: dict, log_overrides: bool = True) -> ScenarioConfig:
    """ScenarioConfig from a (possibly sparse) document."""
    d = normalize_document(doc, log_overrides)
    p = d["platform"]
    kind = _choice("platform.kind", p["kind"], PlatformKind)
    base = PLATFORM_DEFAULTS[kind]
    for key in ("altitude_m", "gateway_gain_dbi"):
        if log_overrides and key in p and p[key] != getattr(base, key):
            log.info("override platform.%s = %r (%s default %r)", key, p[key], kind.value, getattr(base, key))
    platform = Platform(kind, p.get("altitude_m", base.altitude_m), p.get("gateway_gain_dbi", base.gateway_gain_dbi))

    env = d["environment"]
    environment = _choice("environment.kind", env["kind"], Environment)
    loss_mode = _choice("environment.loss_mode", env["loss_mode"], LossMode)

    r = d["radio"]
    radio = RadioConfig(r["freq_hz"], r["tx_power_dbm"], r["ud_gain_dbi"], r["noise_figure_db"], r["sir_threshold_db"])

    schemes = []
    lo = d["lora"]
    if lo["enabled"]:
        cr = _parse_coding_rate(lo["coding_rate"])
        for sf in lo["sf"]:
            sf = _coerce("lora.sf", sf, int)
            schemes.append(LoRa(sf, lo["bw_hz"], lo["channels"], cr, lo["preamble_symbols"],
                                frame_overhead_bytes=lo["mac_overhead_bytes"]))
    fh = d["lrfhss"]
    if fh["enabled"]:
        if fh["profile"] not in LRFHSS_PROFILES:
            raise ConfigError(f"lrfhss.profile must be one of {', '.join(LRFHSS_PROFILES)}, got {fh['profile']!r}")
        schemes.append(LrFhss(LRFHSS_PROFILES[fh["profile"]], fh["snr_threshold_db"], fh["sensitivity_dbm"],
                              fh["tail_bits"]))
    if not schemes:
        raise ConfigError("enable at least one of [lora] or [lrfhss]")

    ug, soil = d["underground"], d["soil"]
    soil_props = SoilProperties(
        soil["vwc_fraction"], soil["clay_fraction"], soil["sand_fraction"], soil["bulk_density_g_cm3"],
        soil["particle_density_g_cm3"], radio.freq_hz,
    )
    underground = UndergroundSpec(
        layers=tuple(ug["layers"]),
        soil=soil_props,
        dielectric_model=ug["dielectric_model"],
        multipath_margin_db=ug["multipath_margin_db"],
        soil_layer=ug["soil_layer"],
        soil_permittivity_override=ug.get("soil_rel_permittivity"),
        soil_attenuation_override=ug.get("soil_attenuation_np_per_m"),
    )

    t = d["traffic"]
    if t["pattern"] != "periodic":
        raise ConfigError(f"traffic.pattern must be 'periodic', got {t['pattern']!r}")

    dep = d["deployment"]
    deployment = DeploymentModel(dep["area_km2"], dep["min_elevation_deg"], dep.get("density_per_km2"))
    if deployment.density_per_km2 is not None and "area_km2" in doc.get("deployment", {}):
        log.warning("both area_km2 and density_per_km2 set; density wins")

    run = d["run"]
    cfg = ScenarioConfig(
        platform=platform,
        environment=environment,
        radio=radio,
        schemes=tuple(schemes),
        period_s=t["period_s"],
        payload_bytes=t["payload_bytes"],
        n_devices=dep["n_devices"],
        underground=underground,
        deployment=deployment,
        trials=run["trials"],
        seed=run["seed"],
        loss_mode=loss_mode,
        shadowing=env["shadowing"],
        capture=run["capture"],
        sensitivity_filter=run["sensitivity_filter"],
        interference=run["interference"],
        bins=run["bins"],
        fixed_elevation_deg=dep.get("fixed_elevation_deg"),
        target_placement=dep["target_placement"],
        underground_loss_override_db=ug.get("loss_override_db"),
        scenario_id=run["scenario_id"],
    )
    underground.build()  # surface dielectric-model and layer errors now
    return cfg


def to_document(cfg: ScenarioConfig) -> dict:
    """Inverse of :func:`build_config` (fully explicit document)."""
    loras = [s for s in cfg.schemes if isinstance(s, LoRa)]
    fhss = [s for s in cfg.schemes if isinstance(s, LrFhss)]
    if len(fhss) > 1 or len({(s.bw_hz, s.channels, s.cr, s.preamble_symbols, s.frame_overhead_bytes)
                             for s in loras}) > 1:
        raise ConfigError("only one LoRa parameter set and one LR-FHSS profile can be written to a document")
    ug = cfg.underground
    doc = {
        "platform": {
            "kind": cfg.platform.kind.value,
            "altitude_m": cfg.platform.altitude_m,
            "gateway_gain_dbi": cfg.platform.gateway_gain_dbi,
        },
        "environment": {
            "kind": cfg.environment.value,
            "loss_mode": cfg.loss_mode.value,
            "shadowing": cfg.shadowing,
        },
        "radio": {
            "freq_hz": cfg.radio.freq_hz,
            "tx_power_dbm": cfg.radio.tx_power_dbm,
            "ud_gain_dbi": cfg.radio.ud_gain_dbi,
            "noise_figure_db": cfg.radio.noise_figure_db,
            "sir_threshold_db": cfg.radio.sir_threshold_db,
        },
        "lora": {"enabled": bool(loras)},
        "lrfhss": {"enabled": bool(fhss)},
        "underground": {
            "dielectric_model": ug.dielectric_model,
            "multipath_margin_db": ug.multipath_margin_db,
            "soil_layer": ug.soil_layer,
            "layers": [dict(l) for l in ug.layers],
        },
        "soil": {
            "vwc_fraction": ug.soil.vwc_fraction,
            "clay_fraction": ug.soil.clay_fraction,
            "sand_fraction": ug.soil.sand_fraction,
            "bulk_density_g_cm3": ug.soil.bulk_density_g_cm3,
            "particle_density_g_cm3": ug.soil.particle_density_g_cm3,
        },
        "traffic": {"period_s": cfg.period_s, "payload_bytes": cfg.payload_bytes, "pattern": "periodic"},
        "deployment": {
            "n_devices": cfg.n_devices,
            "area_km2": cfg.deployment.area_km2,
            "min_elevation_deg": cfg.deployment.min_elevation_deg,
            "target_placement": cfg.target_placement,
        },
        "run": {
            "scenario_id": cfg.scenario_id,
            "trials": cfg.trials,
            "seed": cfg.seed,
            "capture": cfg.capture,
            "sensitivity_filter": cfg.sensitivity_filter,
            "interference": cfg.interference,
            "bins": cfg.bins,
        },
    }
    if loras:
        s0 = loras[0]
        doc["lora"].update(
            sf=[s.sf for s in loras], bw_hz=s0.bw_hz, channels=s0.channels, coding_rate=f"4/{4 + s0.cr}",
            preamble_symbols=s0.preamble_symbols, mac_overhead_bytes=s0.frame_overhead_bytes,
        )
    if fhss:
        f = fhss[0]
        doc["lrfhss"].update(profile=f.profile.name, snr_threshold_db=f.snr_threshold_db,
                             sensitivity_dbm=f.sensitivity_dbm, tail_bits=f.tail_bits)
    optional = {
        ("underground", "soil_rel_permittivity"): ug.soil_permittivity_override,
        ("underground", "soil_attenuation_np_per_m"): ug.soil_attenuation_override,
        ("underground", "loss_override_db"): cfg.underground_loss_override_db,
        ("deployment", "density_per_km2"): cfg.deployment.density_per_km2,
        ("deployment", "fixed_elevation_deg"): cfg.fixed_elevation_deg,
    }
    for (section, key), value in optional.items():
        if value is not None:
            doc[section][key] = value
    return doc


def dumps(cfg: ScenarioConfig) -> str:
    return tomlkit.dumps(to_document(cfg))


def loads(text: str) -> ScenarioConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return build_config(doc)


# --- presets -------------------------------------------------------------------


def preset_names() -> list[str]:
    root = resources.files("u2ntn.presets")
    return sorted(p.name[: -len(PRESET_SUFFIX)] for p in root.iterdir() if p.name.endswith(PRESET_SUFFIX))


def preset_text(name: str) -> str:
    stem = name[: -len(PRESET_SUFFIX)] if name.endswith(PRESET_SUFFIX) else name
    if stem not in preset_names():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return resources.files("u2ntn.presets").joinpath(stem + PRESET_SUFFIX).read_text(encoding="utf-8")


def parse_config(source: str | Path) -> ScenarioConfig:
    """Load a config file, falling back to a shipped preset of that name."""
    path = Path(source)
    if path.is_file():
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
    elif path.parent == Path(".") and (path.name in preset_names() or path.name.removesuffix(PRESET_SUFFIX)
                                       in preset_names()):
        text = preset_text(path.name)
    else:
        raise ConfigError(f"no such config file or preset: {source}")
    return loads(text)


def apply_overrides(cfg: ScenarioConfig, assignments: list[str]) -> ScenarioConfig:
    """Apply ``section.key=value`` overrides (TOML literal values) via the document form."""
    if not assignments:
        return cfg
    doc = to_document(cfg)
    for item in assignments:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        lhs, rhs = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        try:
            value = tomllib.loads(f"v = {rhs.strip()}")["v"]
        except tomllib.TOMLDecodeError:
            value = rhs.strip()
        doc.setdefault(section, {})[key] = value
        log.info("override %s.%s = %r (command line)", section, key, value)
    if "platform" in doc and any(a.startswith("platform.kind=") for a in assignments):
        # a new platform kind brings its own altitude and gain unless set explicitly
        for key in ("altitude_m", "gateway_gain_dbi"):
            if not any(a.startswith(f"platform.{key}=") for a in assignments):
                doc["platform"].pop(key, None)
    return build_config(doc, log_overrides=False)


def with_run_options(cfg: ScenarioConfig, trials: int | None = None, seed: int | None = None,
                     mode: str | None = None) -> ScenarioConfig:
    changes = {}
    if trials is not None:
        changes["trials"] = trials
    if seed is not None:
        changes["seed"] = seed
    if mode is not None:
        changes["loss_mode"] = _choice("--mode", mode, LossMode)
    return replace(cfg, **changes) if changes else cfg
