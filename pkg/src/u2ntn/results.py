"""Byte-stable CSV output with a JSON metadata companion."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .errors import ConfigError, OutputError
from .scenario import ScenarioConfig, SuccessStats

SCHEMA_VERSION = "1"
RESULT_COLUMNS = (
    "scenario_id", "scheme", "bin_low_m", "bin_high_m", "elevation_deg",
    "p_snr", "p_sir", "p_s", "ci_low", "ci_high", "trials",
)
ANALYTICAL_COLUMNS = (
    "scenario_id", "scheme", "n_devices", "bin_low_m", "bin_high_m", "elevation_deg", "zeta", "p_fhss",
)


def format_number(value, digits: int) -> str:
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return "nan"
    text = f"{value:.{digits}f}"
    return "0." + "0" * digits if text == "-0." + "0" * digits else text


def result_rows(scenario_id: str, stats: Iterable[SuccessStats]) -> list[tuple[str, ...]]:
    rows = []
    for s in stats:
        for b in s.bins:
            lo, hi = b.ci
            rows.append((
                scenario_id, s.scheme, format_number(b.bin_low_m, 3), format_number(b.bin_high_m, 3), format_number(b.elevation_deg, 4),
                format_number(b.p_snr, 6), format_number(b.p_sir, 6), format_number(b.p_s, 6), format_number(lo, 6), format_number(hi, 6), str(b.trials),
            ))
    return rows


def format_csv(columns: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
        if any("," in f or "\n" in f for f in row):
            raise ConfigError(f"CSV fields must not contain commas or newlines: {row}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def run_metadata(config: ScenarioConfig, command: str, extra: dict | None = None) -> dict:
    meta = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "command": command,
        "scenario_id": config.scenario_id,
        "seed": config.seed,
        "trials": config.trials,
        "platform": config.platform.kind.value,
        "environment": config.environment.value,
        "loss_mode": config.loss_mode.value,
        "shadowing": config.shadowing,
        "capture": config.capture,
        "sensitivity_filter": config.sensitivity_filter,
        "interference": config.interference,
        "target_placement": config.target_placement,
        "n_devices": config.n_devices,
        "schemes": [s.name for s in config.schemes],
    }
    if extra:
        meta.update(extra)
    return meta


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[str]], meta: dict) -> Path:
    """Write ``path`` and ``path.meta.json``; raises OutputError when unwritable."""
    path = Path(path)
    text = format_csv(columns, rows)
    meta_path = path.with_name(path.name + ".meta.json")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        with open(meta_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps({**meta, "columns": list(columns)}, sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def emit_results(stats: Sequence[SuccessStats], path: str | Path, config: ScenarioConfig,
                 command: str = "simulate") -> Path:
    return write_csv(path, RESULT_COLUMNS, result_rows(config.scenario_id, stats), run_metadata(config, command))
