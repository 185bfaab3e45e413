"""Command-line entry point: ``u2ntn simulate|sweep|analytical|select|presets``.

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage or
configuration error. Failures print one JSON object on a single stderr line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import apply_overrides, parse_config, preset_names, preset_text, with_run_options
from .errors import ConfigError, DomainError, UnsupportedModelError
from .ntn import LossMode
from .radio import LrFhss
from .results import ANALYTICAL_COLUMNS, RESULT_COLUMNS, format_number, format_csv, result_rows, run_metadata, write_csv
from .scenario import (
    SWEEP_PARAMETERS,
    ScenarioConfig,
    analytical_by_bin,
    bin_edges,
    bin_elevation_deg,
    fragment_success_by_bin,
    rank_schemes,
    run_scenario,
    sweep,
)

log = logging.getLogger("u2ntn")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_run_flags(p: argparse.ArgumentParser, monte_carlo: bool = True) -> None:
    p.add_argument("config", help="config file path or shipped preset name")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                   help="log config overrides and progress")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--out", type=Path, help="CSV output path (default: stdout, no metadata file)")
    p.add_argument("--mode", choices=[m.value for m in LossMode], help="aboveground loss evaluation")
    if monte_carlo:
        p.add_argument("--trials", type=int, help="Monte Carlo trials")
        p.add_argument("--seed", type=int, help="root RNG seed")
        p.add_argument("--workers", type=int, help="worker processes (default: $U2NTN_WORKERS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="u2ntn", description="Underground-to-NTN LoRaWAN uplink reliability.")
    parser.add_argument("--version", action="version", version=f"u2ntn {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="log config overrides and progress")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sim = sub.add_parser("simulate", help="Monte Carlo success per scheme and distance bin")
    _add_run_flags(sim)
    sim.add_argument("--plot", type=Path, help="also draw P_s against slant distance (needs matplotlib)")

    sw = sub.add_parser("sweep", help="repeat simulate over one parameter")
    _add_run_flags(sw)
    sw.add_argument("--param", required=True, choices=SWEEP_PARAMETERS)
    sw.add_argument("--values", required=True, nargs="+", help="values, space or comma separated")
    sw.add_argument("--plot", type=Path, help="also draw scheme-averaged P_s against the swept value")

    an = sub.add_parser("analytical", help="closed-form LR-FHSS success without capture")
    _add_run_flags(an, monte_carlo=False)
    an.add_argument("--n-devices", nargs="+", help="device counts to evaluate (default: config value)")

    sel = sub.add_parser("select", help="rank schemes by success, ties to the shorter airtime")
    _add_run_flags(sel)
    sel.add_argument("--range-km", nargs=2, type=float, metavar=("LOW", "HIGH"),
                     help="rank on the slant-distance window only")

    pre = sub.add_parser("presets", help="shipped scenario presets")
    pre_sub = pre.add_subparsers(dest="presets_command", parser_class=_Parser)
    pre_sub.add_parser("list", help="print preset names")
    show = pre_sub.add_parser("show", help="print a preset document")
    show.add_argument("name")
    return parser


def _split_values(items: Sequence[str]) -> list[str]:
    return [v for item in items for v in item.split(",") if v.strip()]


def _parse_value(parameter: str, text: str):
    if parameter == "environment":
        return text.strip()
    try:
        return float(text)
    except ValueError as exc:
        raise UsageError(f"--values for {parameter} must be numbers, got {text!r}") from exc


def _load(args) -> ScenarioConfig:
    cfg = parse_config(args.config)
    cfg = apply_overrides(cfg, args.overrides)
    return with_run_options(cfg, getattr(args, "trials", None), getattr(args, "seed", None), args.mode)


def _emit(args, columns, rows, cfg: ScenarioConfig, extra: dict | None = None) -> None:
    if args.out is None:
        sys.stdout.write(format_csv(columns, rows))
    else:
        write_csv(args.out, columns, rows, run_metadata(cfg, args.command, extra))
        log.info("wrote %s", args.out)


def _plot(path: Path, series: dict[str, tuple[list[float], list[float]]], xlabel: str, title: str) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise RuntimeError("--plot needs matplotlib (pip install 'artifact[plot]')") from exc
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, (x, y) in series.items():
        ax.plot(x, y, marker="o", label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("P_s")
    ax.set_ylim(0, 1)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if path.suffix.lower() == ".svg" else None)
    plt.close(fig)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    stats = run_scenario(cfg, args.workers)
    _emit(args, RESULT_COLUMNS, result_rows(cfg.scenario_id, stats), cfg)
    for s in stats:
        log.info("%s: P_s=%.4f over %d trials", s.scheme, s.p_s, s.trials)
    if args.plot:
        series = {s.scheme: ([b.mid_m / 1e3 for b in s.bins], [b.p_s for b in s.bins]) for s in stats}
        _plot(args.plot, series, "slant distance (km)", cfg.scenario_id)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    values = [_parse_value(args.param, v) for v in _split_values(args.values)]
    points = sweep(cfg, args.param, values, args.workers)
    rows = []
    for pt in points:
        rows.extend(result_rows(f"{cfg.scenario_id}[{args.param}={pt.value}]", pt.stats))
    errors = {str(pt.value): pt.error for pt in points if pt.error}
    _emit(args, RESULT_COLUMNS, rows, cfg, {"sweep_parameter": args.param, "sweep_values": [str(v) for v in values],
                                           "sweep_errors": errors})
    for v, msg in errors.items():
        print(json.dumps({"warning": "sweep_point_failed", "value": v, "message": msg}), file=sys.stderr)
    if args.plot:
        ok = [pt for pt in points if not pt.error]
        names = [s.scheme for s in ok[0].stats] if ok else []
        series = {n: ([pt.value for pt in ok], [next(s.p_s for s in pt.stats if s.scheme == n) for pt in ok])
                  for n in names}
        _plot(args.plot, series, args.param, cfg.scenario_id)
    if errors and len(errors) == len(points):
        raise RuntimeError("every sweep point failed")
    return EXIT_OK


def cmd_analytical(args) -> int:
    cfg = _load(args)
    schemes = [s for s in cfg.schemes if isinstance(s, LrFhss)]
    if not schemes:
        raise ConfigError("analytical needs [lrfhss] enabled = true")
    counts = [int(float(v)) for v in _split_values(args.n_devices)] if args.n_devices else [cfg.n_devices]
    rows = []
    for scheme in schemes:
        zetas = fragment_success_by_bin(cfg, scheme)
        for n in counts:
            c = replace(cfg, n_devices=n)
            edges = bin_edges(c)
            for b, p in enumerate(analytical_by_bin(c, scheme)):
                lo, hi = float(edges[b]), float(edges[b + 1])
                rows.append((
                    cfg.scenario_id, scheme.name, str(n), format_number(lo, 3), format_number(hi, 3),
                    format_number(bin_elevation_deg(c, lo, hi), 4),
                    format_number(zetas[b] if len(zetas) == len(edges) - 1 else float("nan"), 6), format_number(p, 6),
                ))
    _emit(args, ANALYTICAL_COLUMNS, rows, cfg, {"n_devices_values": counts})
    return EXIT_OK


def cmd_select(args) -> int:
    cfg = _load(args)
    window = None
    if args.range_km:
        lo, hi = args.range_km
        if not 0 <= lo < hi:
            raise UsageError("--range-km needs 0 <= LOW < HIGH")
        window = (lo * 1e3, hi * 1e3)
    ranking = rank_schemes(cfg, run_scenario(cfg, args.workers), window)
    rows = [(cfg.scenario_id, str(i + 1), r.scheme, format_number(r.p_s, 6), format_number(r.airtime_s, 6))
            for i, r in enumerate(ranking)]
    _emit(args, ("scenario_id", "rank", "scheme", "p_s", "airtime_s"), rows, cfg,
          {"range_km": list(args.range_km) if args.range_km else None})
    log.info("selected %s", ranking[0].scheme)
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.presets_command == "show":
        sys.stdout.write(preset_text(args.name))
        return EXIT_OK
    if args.presets_command != "list":
        raise UsageError("presets needs a subcommand: list or show")
    for name in preset_names():
        print(name)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "analytical": cmd_analytical,
    "select": cmd_select,
    "presets": cmd_presets,
}


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message, "exit": code}), file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("missing subcommand")
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except (ConfigError, UnsupportedModelError) as exc:
        return _fail(EXIT_USAGE, "config", str(exc))
    except (DomainError, OSError, RuntimeError, ValueError) as exc:
        return _fail(EXIT_RUNTIME, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
