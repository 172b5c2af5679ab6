"""Command-line front end: ``cvqkd-arf {point,sweep,surface,validate}``.

Exit status
-----------
0 success; 2 usage error; 3 config parse error; 4 validation error
(bad parameter, domain or sample size); 5 numerical failure (quadrature
did not converge, or a surface cell failed); 6 a ``validate`` check
failed; 7 file I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .channel import ClampStats, aperture_fraction, beam_radius, safe_fraction
from .config import ScenarioConfig, load_config
from .errors import (
    ConfigParseError,
    ConvergenceError,
    DegenerateConfigError,
    DomainError,
    ModelError,
    SampleSizeError,
    ValidationError,
)
from .sweep import SweepSpec, find_optimum, sweep_surface, sweep_threshold
from .validation import run_checks

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_NUMERICAL = 5
EXIT_CHECK = 6
EXIT_IO = 7

SWEEP_COLUMNS = ["r_th_m", "i_bar_bits", "k_bar_bits", "k_bar_floored_bits", "accept_prob",
                 "err_est"]
MC_COLUMNS = ["mc_i_bar_bits", "mc_k_bar_bits", "mc_stderr_i_bits", "mc_stderr_k_bits"]
SURFACE_COLUMNS = ["w_m"] + SWEEP_COLUMNS + ["error"]


class _UsageError(Exception):
    pass


def fmt(x: float) -> str:
    """17 significant digits: round-trips every double."""
    return format(float(x), ".17g")


def _write_text(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(header: List[str], rows: List[List[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _scenario(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.clamped_k:
        cfg = dataclasses.replace(cfg, clamped_k=True)
    return cfg


def _to_meters(values, cfg: ScenarioConfig, theta_units: bool):
    """Threshold values as r_th in metres; angles in microradians if requested."""
    if theta_units:
        return [cfg.geometry.z_link * float(v) * 1e-6 for v in values]
    return [float(v) for v in values]


def _grid(values: Optional[str], lo: float, hi: float, n: int, log: bool, name: str):
    if values:
        try:
            return [float(v) for v in values.split(",")]
        except ValueError:
            raise _UsageError(f"--{name}-values must be a comma-separated list of numbers")
    if n < 1:
        raise _UsageError(f"--{name}-points must be >= 1")
    if n == 1:
        return [lo]
    if log:
        if not (lo > 0 and hi > 0):
            raise _UsageError(f"log-spaced --{name} grid needs positive bounds")
        return list(np.logspace(math.log10(lo), math.log10(hi), n))
    return list(np.linspace(lo, hi, n))


def _rth_grid(args, cfg):
    grid = _grid(args.rth_values, args.rth_min, args.rth_max, args.rth_points, True, "rth")
    return _to_meters(grid, cfg, args.theta_units)


def cmd_point(args) -> int:
    cfg = _scenario(args)
    r_th = _to_meters([args.r_th], cfg, args.theta_units)[0]
    stats = ClampStats()
    p = cfg.averager(stats=stats).point(r_th)
    report = {
        "r_th_m": p.r_th,
        "w_rx_m": beam_radius(cfg.geometry),
        "a0": aperture_fraction(cfg.geometry),
        "a_safe": safe_fraction(cfg.geometry),
        "accept_prob": p.accept_prob,
        "i_bar_bits": p.i_bar,
        "k_bar_bits": p.k_bar,
        "k_bar_floored_bits": p.k_bar_floored,
        "err_est_bits": p.err_est,
        "clamp_events": stats.count,
    }
    _write_text(args.out, _json_text(report))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _scenario(args)
    spec = SweepSpec(_rth_grid(args, cfg), cfg, mc_check=args.mc_samples)
    result = sweep_threshold(spec)
    header = list(SWEEP_COLUMNS)
    rows = []
    for k, p in enumerate(result.points):
        row = [fmt(p.r_th), fmt(p.i_bar), fmt(p.k_bar), fmt(p.k_bar_floored),
               fmt(p.accept_prob), fmt(p.err_est)]
        if result.mc is not None:
            mc = result.mc[k]
            row += [fmt(mc.i_bar), fmt(mc.k_bar), fmt(mc.stderr_i), fmt(mc.stderr_k)]
        rows.append(row)
    if result.mc is not None:
        header += MC_COLUMNS
    _write_text(args.out, _csv_text(header, rows))
    return EXIT_OK


def _summary_path(args) -> Optional[str]:
    if args.summary:
        return args.summary
    if args.out and args.out != "-":
        return os.path.splitext(args.out)[0] + ".json"
    return None


def cmd_surface(args) -> int:
    cfg = _scenario(args)
    waist = _grid(args.w_values, args.w_min, args.w_max, args.w_points, False, "w")
    spec = SweepSpec(_rth_grid(args, cfg), cfg, waist_grid=waist, waist_mode=args.waist_mode)
    surface = sweep_surface(spec, workers=args.workers)

    rows = []
    for c in surface.cells:
        if c.error is None:
            rows.append([fmt(c.w), fmt(c.r_th), fmt(c.i_bar), fmt(c.k_bar),
                         fmt(max(0.0, c.k_bar)), fmt(c.accept_prob), fmt(c.err_est), ""])
        else:
            rows.append([fmt(c.w), fmt(c.r_th), "", "", "", "", "", c.error])
    _write_text(args.out, _csv_text(SURFACE_COLUMNS, rows))

    summary = {
        "waist_mode": surface.waist_mode,
        "n_waist": len(surface.waist_grid),
        "n_rth": len(surface.rth_grid),
        "failed_cells": len(surface.failures),
        "secure_region_fraction": surface.secure_region_fraction,
        "optimum": None,
        "config": cfg.to_dict(),
    }
    if surface.optimum is not None:
        opt = surface.optimum
        summary["optimum"] = {"w_m": opt.w, "r_th_m": opt.r_th, "k_bar_bits": opt.k_bar}
        if args.refine:
            ref = find_optimum(surface, refine=True)
            summary["refined_optimum"] = {"w_m": ref.w, "r_th_m": ref.r_th,
                                          "k_bar_bits": ref.k_bar}
    text = _json_text(summary)
    path = _summary_path(args)
    if path is None:
        sys.stderr.write(text)
    else:
        _write_text(path, text)
    for c in surface.failures:
        sys.stderr.write(f"cell w={fmt(c.w)} r_th={fmt(c.r_th)} failed: {c.error}\n")
    return EXIT_NUMERICAL if surface.failures else EXIT_OK


def cmd_validate(args) -> int:
    cfg = _scenario(args)
    lines: List[str] = []

    def report(check):
        lines.append(check.line())
        print(check.line(), flush=True)

    results = run_checks(cfg, args.mc_samples, report)
    failed = [c for c in results if not c.passed]
    tail = f"{len(results) - len(failed)}/{len(results)} checks passed"
    print(tail)
    if args.out:
        _write_text(args.out, "\n".join(lines + [tail]) + "\n")
    return EXIT_CHECK if failed else EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="TOML scenario file (defaults if omitted)")
    p.add_argument("--out", metavar="PATH", help="output file ('-' or omitted: stdout)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--clamped-k", action="store_true",
                   help="integrate max(K, 0) instead of the signed key rate")
    p.add_argument("--theta-units", action="store_true",
                   help="thresholds are angles in microradians (r_th = Z_L * theta)")


def _add_rth_grid(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rth-min", type=float, default=1e-3, help="smallest threshold (default 1e-3)")
    p.add_argument("--rth-max", type=float, default=1.0, help="largest threshold (default 1)")
    p.add_argument("--rth-points", type=int, default=60, help="log-spaced points (default 60)")
    p.add_argument("--rth-values", help="explicit comma-separated thresholds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvqkd-arf",
        description="Key-rate model for a CV-QKD free-space link with an angular "
                    "rejection filter.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("point", help="metrics at a single threshold (JSON)")
    _add_common(p)
    p.add_argument("--r-th", type=float, required=True, help="threshold (m, or urad)")
    p.set_defaults(func=cmd_point)

    p = sub.add_parser("sweep", help="K_bar versus threshold (CSV)")
    _add_common(p)
    _add_rth_grid(p)
    p.add_argument("--mc-samples", type=int, help="add a Monte Carlo cross-check")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("surface", help="K_bar over beam radius x threshold (CSV + JSON)")
    _add_common(p)
    _add_rth_grid(p)
    p.add_argument("--w-min", type=float, default=0.01, help="smallest beam radius (default 0.01)")
    p.add_argument("--w-max", type=float, default=0.3, help="largest beam radius (default 0.3)")
    p.add_argument("--w-points", type=int, default=40, help="linear points (default 40)")
    p.add_argument("--w-values", help="explicit comma-separated beam radii")
    p.add_argument("--waist-mode", choices=("receiver", "waist"), default="receiver",
                   help="grid values are w(Z_L) (receiver) or the transmitter waist w0")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--refine", action="store_true", help="add a refined optimum to the JSON")
    p.add_argument("--summary", metavar="PATH",
                   help="JSON summary path (default: --out with .json suffix, else stderr)")
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("validate", help="run the self-check battery")
    _add_common(p)
    p.add_argument("--mc-samples", type=int, default=1_000_000,
                   help="Monte Carlo samples (>= 1e5, default 1e6)")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except ConfigParseError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_PARSE
    except (ValidationError, SampleSizeError, DomainError, DegenerateConfigError) as exc:
        sys.stderr.write(f"invalid input: {exc}\n")
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except ModelError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERICAL
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
