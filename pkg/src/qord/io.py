"""File formats: coincidence CSV + JSON sidecar, estimate JSON lines, tables, manifests.

Machine-facing files carry radians with unit-suffixed field names. All
writers are deterministic (fixed key order, shortest round-trip floats) so
repeated runs produce byte-identical output.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from qord.errors import InputError
from qord.estimation import CalibrationCurve, CoincidenceSet, Estimate, SetMetadata
from qord.measurement import Scheme

COUNTS_HEADER = ("bin_index", "n_hh", "n_hv", "n_vh", "n_vv")
SIDECAR_FIELDS = ("scheme", "bias_phase_rad", "visibility", "lambda1_nm", "lambda2_nm",
                  "sample_label", "bin_duration_s")
ESTIMATE_FIELDS = (
    "parameter", "value_rad", "value_deg", "std_error_rad", "std_error_deg",
    "std_error_combined_rad", "value_pooled_rad", "std_error_pooled_rad", "n_pairs",
    "n_bins", "fi_used_per_rad2", "crb_sigma_rad", "crb_sigma_deg", "ratio_to_classical_crb",
    "theta_reference_rad", "theta_sample_rad",
    "scheme", "bias_phase_rad", "lambda1_nm", "lambda2_nm", "sample_label", "concentration_g_per_ml",
)
ROTATION_FIELDS = (
    "scheme", "parameter", "concentration_g_per_ml", "delta_lambda_nm", "lambda1_nm", "lambda2_nm",
    "estimate_rad", "std_error_rad", "std_error_combined_rad", "prediction_rad",
    "estimate_deg", "std_error_deg", "prediction_deg", "ratio_to_classical_crb", "status",
)


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_counts(path, counts: CoincidenceSet) -> tuple[Path, Path]:
    path = Path(path)
    arr = np.asarray(counts.counts)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise InputError("only integer counts can be written to a counts file")
        arr = arr.astype(np.int64)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COUNTS_HEADER)
    for i, row in enumerate(arr.tolist()):
        w.writerow([i, *row])
    path.write_text(buf.getvalue())
    meta = counts.meta
    side = {
        "scheme": meta.scheme.value if meta else None,
        "bias_phase_rad": _num(meta.bias_phase) if meta else None,
        "visibility": _num(meta.visibility) if meta else None,
        "lambda1_nm": _num(meta.lambda1) if meta else None,
        "lambda2_nm": _num(meta.lambda2) if meta else None,
        "sample_label": meta.sample_label if meta else "",
        "bin_duration_s": _num(counts.bin_duration),
        "concentration_g_per_ml": _num(meta.concentration) if meta else None,
        "is_blank": bool(meta.is_blank) if meta else False,
        "seed": meta.seed if meta else None,
    }
    spath = sidecar_path(path)
    spath.write_text(dumps(side))
    return path, spath


def _field(data, key, path, kind, required=True):
    if key not in data or data[key] is None:
        if required:
            raise InputError(f"{path}: missing field '{key}'")
        return None
    value = data[key]
    try:
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            value = float(value)
            if not math.isfinite(value):
                raise ValueError
        elif kind is str:
            value = str(value)
        elif kind is bool:
            if not isinstance(value, bool):
                raise TypeError
    except (TypeError, ValueError):
        raise InputError(f"{path}: field '{key}' has invalid value {data[key]!r}") from None
    return value


def read_metadata(path) -> tuple[SetMetadata, float]:
    spath = sidecar_path(path)
    if not spath.exists():
        raise InputError(f"{spath}: metadata sidecar not found")
    try:
        data = json.loads(spath.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{spath}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InputError(f"{spath}: expected a JSON object")
    try:
        scheme = Scheme.parse(_field(data, "scheme", spath, str))
    except ValueError:
        raise InputError(f"{spath}: field 'scheme' has invalid value {data.get('scheme')!r}") from None
    meta = SetMetadata(
        scheme=scheme,
        bias_phase=_field(data, "bias_phase_rad", spath, float),
        lambda1=_field(data, "lambda1_nm", spath, float),
        lambda2=_field(data, "lambda2_nm", spath, float),
        sample_label=_field(data, "sample_label", spath, str),
        visibility=_field(data, "visibility", spath, float, required=False),
        concentration=_field(data, "concentration_g_per_ml", spath, float, required=False),
        is_blank=bool(_field(data, "is_blank", spath, bool, required=False) or False),
        seed=data.get("seed"),
    )
    duration = _field(data, "bin_duration_s", spath, float)
    if meta.visibility is not None and not 0 < meta.visibility <= 1:
        raise InputError(f"{spath}: field 'visibility' must lie in (0, 1]")
    if not duration > 0:
        raise InputError(f"{spath}: field 'bin_duration_s' must be positive")
    return meta, duration


def read_counts(path) -> CoincidenceSet:
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: counts file not found")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty counts file")
        if tuple(h.strip() for h in header) != COUNTS_HEADER:
            raise InputError(f"{path}: header must be {','.join(COUNTS_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise InputError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            try:
                vals = [int(x) for x in row]
            except ValueError:
                raise InputError(f"{path}:{lineno}: counts must be integers") from None
            if min(vals[1:]) < 0:
                raise InputError(f"{path}:{lineno}: counts must be non-negative")
            rows.append(vals[1:])
    if not rows:
        raise InputError(f"{path}: counts file has no bins")
    meta, duration = read_metadata(path)
    return CoincidenceSet(np.array(rows, dtype=np.int64), duration, meta)


def estimate_record(est: Estimate) -> dict:
    meta = est.meta
    rec = {
        "parameter": est.parameter.value,
        "value_rad": _num(est.value),
        "value_deg": _num(est.value_deg),
        "std_error_rad": _num(est.std_error),
        "std_error_deg": _num(est.std_error_deg),
        "std_error_combined_rad": _num(est.std_error_combined),
        "value_pooled_rad": _num(est.value_pooled),
        "std_error_pooled_rad": _num(est.std_error_pooled),
        "n_pairs": int(round(est.n_pairs)),
        "n_bins": est.n_bins,
        "fi_used_per_rad2": _num(est.fi_used),
        "crb_sigma_rad": _num(est.crb_sigma),
        "crb_sigma_deg": _num(est.crb_sigma_deg),
        "ratio_to_classical_crb": _num(est.ratio_to_classical_crb),
        "theta_reference_rad": _num(est.theta_reference),
        "theta_sample_rad": _num(est.theta_sample),
        "scheme": meta.scheme.value if meta else None,
        "bias_phase_rad": _num(meta.bias_phase) if meta else None,
        "lambda1_nm": _num(meta.lambda1) if meta else None,
        "lambda2_nm": _num(meta.lambda2) if meta else None,
        "sample_label": meta.sample_label if meta else None,
        "concentration_g_per_ml": _num(meta.concentration) if meta else None,
    }
    assert tuple(rec) == ESTIMATE_FIELDS
    return rec


def write_jsonl(path, records) -> Path:
    path = Path(path)
    path.write_text("".join(json.dumps(r, allow_nan=False) + "\n" for r in records))
    return path


def read_jsonl(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def _cell(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return "" if v is None else v


def write_table(path, fields, rows) -> Path:
    """CSV with a fixed header; rows are dicts or sequences in header order."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(f) for f in fields]
        w.writerow([_cell(v) for v in row])
    Path(path).write_text(buf.getvalue())
    return Path(path)


def read_table(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def calibration_record(curve: CalibrationCurve) -> dict:
    return {
        "visibility": _num(curve.visibility),
        "visibility_err": _num(curve.visibility_err),
        "n_settings": curve.n_settings,
        "reduced_chi2": _num(curve.reduced_chi2),
        "phase_consistent": curve.phase_consistent(),
        "channels": {
            name: {
                "amplitude_per_s": _num(c.amplitude), "amplitude_err": _num(c.amplitude_err),
                "visibility": _num(c.visibility), "visibility_err": _num(c.visibility_err),
                "phase_rad": _num(c.phase), "phase_err_rad": _num(c.phase_err),
                "chi2": _num(c.chi2), "dof": c.dof,
            }
            for name, c in curve.channels.items()
        },
    }


def read_calibration_visibility(path) -> float:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise InputError(f"{path}: calibration file not found") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from None
    v = _field(data, "visibility", path, float)
    if not 0 < v <= 1:
        raise InputError(f"{path}: field 'visibility' must lie in (0, 1]")
    return v


def rotation_rows(result) -> list[dict]:
    """Result table rows (scheme, concentration, delta_lambda) for a grid result."""
    rows = []
    for cell in result.cells:
        key = cell.key
        est = cell.estimate
        pair_meta = est.meta if est is not None else None
        pred = cell.prediction
        rows.append({
            "scheme": key.scheme.value,
            "parameter": "mean" if key.scheme is Scheme.PHI else "difference",
            "concentration_g_per_ml": key.concentration,
            "delta_lambda_nm": key.delta_lambda,
            "lambda1_nm": pair_meta.lambda1 if pair_meta else None,
            "lambda2_nm": pair_meta.lambda2 if pair_meta else None,
            "estimate_rad": est.value if est else None,
            "std_error_rad": est.std_error if est else None,
            "std_error_combined_rad": est.std_error_combined if est else None,
            "prediction_rad": pred,
            "estimate_deg": est.value_deg if est else None,
            "std_error_deg": est.std_error_deg if est else None,
            "prediction_deg": math.degrees(pred) if pred is not None else None,
            "ratio_to_classical_crb": est.ratio_to_classical_crb if est else None,
            "status": cell.status,
        })
    return rows


def write_grid_bundle(result, out_dir, write_counts_files: bool = True, overlay=None) -> dict:
    """Write counts, estimates, result table, predictions and manifest for a grid run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counts_dir = out / "counts"
    if write_counts_files:
        counts_dir.mkdir(exist_ok=True)
    manifest_cells = []
    records = []
    for cell in result.cells:
        entry = {"cell": cell.key.label, "scheme": cell.key.scheme.value,
                 "concentration_g_per_ml": cell.key.concentration,
                 "delta_lambda_nm": cell.key.delta_lambda, "status": cell.status,
                 "error": cell.error, "files": {}, "seeds": {}}
        for role, plan, data in (("blank", cell.blank_plan, cell.blank), ("sample", cell.sample_plan, cell.sample)):
            if plan is not None:
                entry["seeds"][role] = int(plan.rng_seed)
            if data is not None and write_counts_files:
                name = f"{cell.key.label}_{role}.csv"
                write_counts(counts_dir / name, data)
                entry["files"][role] = f"counts/{name}"
        if cell.estimate is not None:
            rec = estimate_record(cell.estimate)
            records.append({"cell": cell.key.label, **rec})
        manifest_cells.append(entry)
    write_jsonl(out / "estimates.jsonl", records)
    write_table(out / "rotation_table.csv", ROTATION_FIELDS, rotation_rows(result))
    if overlay is not None:
        fields = tuple(overlay[0]) if overlay else ()
        write_table(out / "predictions.csv", fields, overlay)
    cfg = result.config
    manifest = {
        "master_seed": int(cfg.seed),
        "n_cells": len(result.cells),
        "n_failed": result.n_failed,
        "n_datasets": sum(len(c["files"]) for c in manifest_cells),
        "cells": manifest_cells,
    }
    (out / "manifest.json").write_text(dumps(manifest))
    return manifest
