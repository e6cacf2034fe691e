"""Command-line front end: simulate, calibrate, estimate, fisher, grid, diagnose.

Exit codes: 0 success, 1 validation error, 2 partial grid failure,
3 total failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from qord import io
from qord.config import load_config
from qord.errors import ConfigError, FitError, InputError
from qord.estimation import extract_rotation, fit_calibration, hwp_to_bias
from qord.fisher import fi_curve, fisher_summary
from qord.protocol import (
    RunPlan,
    noise_diagnostics,
    prediction_overlay,
    run_experiment_grid,
    simulate_run,
    simulate_sweep,
)
from qord.sample import Sample

log = logging.getLogger("qord")

EXIT_OK, EXIT_VALIDATION, EXIT_PARTIAL, EXIT_FAILURE = 0, 1, 2, 3


def _resolve(base: Path, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else base / p


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, "simulate")
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    sample = None
    if not cfg.blank and cfg.concentration_g_per_ml > 0:
        sample = Sample(cfg.concentration_g_per_ml, cfg.path_length_dm, cfg.dispersion_model())
    plan = RunPlan(
        scheme=cfg.scheme, sample=sample, delta_lambda=cfg.delta_lambda_nm, bias_phase=cfg.bias_phase,
        visibility=cfg.visibility, pair_rate=cfg.pair_rate, bin_duration=cfg.bin_duration_s,
        n_bins=cfg.n_bins, rng_seed=cfg.seed, pump=cfg.pump_nm, drift=cfg.drift,
    )
    out = _out_dir(args)
    if cfg.bias_sweep:
        entries = []
        for k, (bias, data) in enumerate(simulate_sweep(plan, cfg.bias_sweep)):
            path, _ = io.write_counts(out / f"{cfg.name}_{k:03d}.csv", data)
            entries.append({"counts": path.name, "bias_phase_rad": bias})
        (out / f"{cfg.name}_sweep.yaml").write_text(
            "sweep:\n" + "".join(f"  - counts: {e['counts']}\n    bias_phase_rad: {e['bias_phase_rad']!r}\n"
                                 for e in entries))
        log.info("wrote %d sweep settings to %s", len(entries), out)
    else:
        data = simulate_run(plan)
        path, _ = io.write_counts(out / f"{cfg.name}.csv", data)
        log.info("wrote %s (%d bins, %d pairs)", path, data.n_bins, int(data.n_pairs))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config, "calibrate")
    base = Path(args.config).parent
    sweep = []
    for i, entry in enumerate(cfg.sweep):
        data = io.read_counts(_resolve(base, entry.counts))
        if entry.hwp_angle is not None:
            bias = float(hwp_to_bias(entry.hwp_angle, cfg.hwp_slope, cfg.hwp_offset))
        elif entry.bias_phase is not None:
            bias = entry.bias_phase
        else:
            bias = data.meta.bias_phase
        sweep.append((bias, data))
    curve = fit_calibration(sweep)
    out = _out_dir(args)
    (out / "calibration.json").write_text(io.dumps(io.calibration_record(curve)))
    log.info("pooled visibility %.4f +- %.4f over %d settings (reduced chi2 %.2f)",
             curve.visibility, curve.visibility_err, curve.n_settings, curve.reduced_chi2)
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = load_config(args.config, "estimate")
    base = Path(args.config).parent
    visibility = cfg.visibility
    if cfg.calibration is not None:
        visibility = io.read_calibration_visibility(_resolve(base, cfg.calibration))
    records = []
    for pair in cfg.pairs:
        ref = io.read_counts(_resolve(base, pair.reference))
        smp = io.read_counts(_resolve(base, pair.sample))
        est = extract_rotation(ref, smp, visibility=visibility)
        records.append(io.estimate_record(est))
        log.info("%s %s: %.5f +- %.5f deg (ratio to classical CRB %.3f)", est.meta.scheme.value,
                 est.parameter.value, est.value_deg, est.std_error_deg, est.ratio_to_classical_crb)
    io.write_jsonl(_out_dir(args) / "estimates.jsonl", records)
    return EXIT_OK


def cmd_fisher(args) -> int:
    cfg = load_config(args.config, "fisher")
    grid = np.linspace(cfg.grid.min, cfg.grid.max, cfg.grid.points)
    curve = fi_curve(cfg.visibility, cfg.bias_phase, grid)
    out = _out_dir(args)
    io.write_table(out / "fi_curve.csv", curve.COLUMNS, curve.rows())
    summary = fisher_summary(curve)
    (out / "fisher_summary.json").write_text(io.dumps(summary))
    log.info("max FI %.3f rad^-2, enhancement ratio %.3f, break-even visibility %.4f",
             summary["max_fi_exp"], summary["enhancement_ratio"], summary["break_even_visibility"])
    return EXIT_OK


def cmd_grid(args) -> int:
    cfg = load_config(args.config, "grid")
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    grid_cfg = cfg.build()
    result = run_experiment_grid(grid_cfg, workers=cfg.workers)
    out = _out_dir(args)
    io.write_grid_bundle(result, out, cfg.write_counts, overlay=prediction_overlay(grid_cfg))
    for row in io.rotation_rows(result):
        if row["status"] == "ok":
            log.info("%-4s C=%.2f dl=%5.2f nm: %+.5f +- %.5f deg (model %+.5f)", row["scheme"],
                     row["concentration_g_per_ml"], row["delta_lambda_nm"], row["estimate_deg"],
                     row["std_error_deg"], row["prediction_deg"])
    if result.n_failed == len(result.cells):
        log.error("all %d grid cells failed", result.n_failed)
        return EXIT_FAILURE
    if result.n_failed:
        log.error("%d of %d grid cells failed", result.n_failed, len(result.cells))
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = load_config(args.config, "diagnose")
    base = Path(args.config).parent
    report = []
    for name in cfg.counts:
        data = io.read_counts(_resolve(base, name))
        chans = noise_diagnostics(data)
        report.append({
            "counts": name,
            "n_bins": data.n_bins,
            "channels": [{"channel": c.channel, "mean": c.mean, "variance": c.variance,
                          "fano": c.fano if math.isfinite(c.fano) else None,
                          "fano_err": c.fano_err, "overdispersed": c.overdispersed} for c in chans],
        })
        for c in chans:
            log.info("%s %s: Fano %.3f +- %.3f%s", name, c.channel, c.fano, c.fano_err,
                     "  OVERDISPERSED" if c.overdispersed else "")
    (_out_dir(args) / "noise.json").write_text(io.dumps(report))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "estimate": cmd_estimate,
    "fisher": cmd_fisher,
    "grid": cmd_grid,
    "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qord", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__name__.replace("cmd_", ""))
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--quiet", action="store_true", help="only report errors")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        log.error("--seed must be a 64-bit unsigned integer")
        return EXIT_VALIDATION
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_VALIDATION
    except InputError as exc:
        log.error("input error: %s", exc)
        return EXIT_VALIDATION
    except FitError as exc:
        log.error("fit failed: %s %s", exc, exc.diagnostics)
        return EXIT_FAILURE
    except ValueError as exc:
        log.error("error: %s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
