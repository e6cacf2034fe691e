"""From coincidence counts to fringe phases and rotations.

Calibration fits a sinusoid per coincidence channel against the bias phase;
point estimation inverts the fringe under the four-outcome multinomial; the
rotation is read off as the phase shift between a blank (water) run and a
sample run taken at the same settings.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from qord.errors import FitError, InputError, MetadataError
from qord.fisher import CHAIN_FACTOR, IDEAL_CLASSICAL_FI, Parameter, fringe_fisher
from qord.measurement import HALF_FRINGE, Scheme
from qord.state import OUTCOMES
from qord.errors import VisibilityWarning

CONTRAST_TOLERANCE = 0.02
MIN_CALIBRATION_SETTINGS = 8


@dataclass(frozen=True)
class SetMetadata:
    scheme: Scheme
    bias_phase: float  # rad
    lambda1: float  # nm
    lambda2: float  # nm
    sample_label: str = ""
    visibility: float | None = None
    concentration: float | None = None  # g/ml, None for unknown
    is_blank: bool = False
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))


@dataclass(frozen=True)
class CoincidenceSet:
    """Per-bin (HH, HV, VH, VV) counts.

    Counts are normally integers; float arrays are accepted for noiseless
    expected-count data.
    """

    counts: np.ndarray
    bin_duration: float = 1.0
    meta: SetMetadata | None = None

    def __post_init__(self):
        arr = np.asarray(self.counts)
        if arr.ndim == 1 and arr.size == 4:
            arr = arr.reshape(1, 4)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise InputError(f"counts must have shape (n_bins, 4), got {arr.shape}")
        if arr.shape[0] == 0:
            raise InputError("coincidence set has no bins")
        if not np.issubdtype(arr.dtype, np.number):
            raise InputError("counts must be numeric")
        if np.any(arr < 0):
            raise InputError("counts must be non-negative")
        if not self.bin_duration > 0:
            raise InputError("bin duration must be positive")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def n_bins(self) -> int:
        return self.counts.shape[0]

    @property
    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def n_pairs(self) -> float:
        return float(self.counts.sum())


# ---------------------------------------------------------------- calibration


@dataclass(frozen=True)
class ChannelFit:
    channel: str
    amplitude: float  # counts per second
    visibility: float
    phase: float  # rad
    amplitude_err: float
    visibility_err: float
    phase_err: float
    chi2: float
    dof: int


@dataclass(frozen=True)
class CalibrationCurve:
    channels: dict[str, ChannelFit]
    visibility: float
    visibility_err: float
    n_settings: int

    def phase_consistent(self, nsigma: float = 3.0) -> bool:
        """HH/VV phases differ from HV/VH phases by pi within nsigma fit errors."""
        ok = True
        for same in ("HH", "VV"):
            for mixed in ("HV", "VH"):
                a, b = self.channels[same], self.channels[mixed]
                gap = _wrap(b.phase - a.phase - math.pi)
                ok &= abs(gap) <= nsigma * math.hypot(a.phase_err, b.phase_err) + 1e-12
        return bool(ok)

    @property
    def reduced_chi2(self) -> float:
        chi2 = sum(c.chi2 for c in self.channels.values())
        dof = sum(c.dof for c in self.channels.values())
        return chi2 / dof if dof > 0 else float("nan")


def _wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


def hwp_to_bias(angle, slope: float = 1.0, offset: float = 0.0):
    """Linear map from a waveplate setting to the bias phase, alpha0 = slope * angle + offset."""
    return slope * np.asarray(angle, dtype=float) + offset


def _check_sweep(settings: np.ndarray):
    distinct = np.unique(np.round(np.mod(settings, 2 * np.pi), 12))
    if distinct.size <= 1:
        raise InputError("calibration sweep is degenerate: all bias settings equal")
    if distinct.size < MIN_CALIBRATION_SETTINGS:
        raise InputError(
            f"calibration needs >= {MIN_CALIBRATION_SETTINGS} distinct bias settings, got {distinct.size}"
        )
    span = settings.max() - settings.min()
    spacing = span / (distinct.size - 1)
    if span + spacing < 2 * np.pi - 1e-9:
        raise InputError("calibration sweep must cover at least one full fringe")


def _fit_channel(name, alpha0, counts, exposure, max_nfev):
    weights = 1.0 / np.sqrt(np.maximum(counts, 1.0))

    # linear start: N = T (a + b cos + c sin)
    design = exposure[:, None] * np.column_stack([np.ones_like(alpha0), np.cos(alpha0), np.sin(alpha0)])
    coef, *_ = np.linalg.lstsq(design * weights[:, None], counts * weights, rcond=None)
    a, b, c = coef
    amp0 = max(a, 1e-12)
    vis0 = float(np.clip(math.hypot(b, c) / amp0, 1e-6, 1.0))
    phase0 = math.atan2(-c, b)

    def residuals(p):
        amp, vis, ph = p
        return (exposure * amp * (1.0 + vis * np.cos(alpha0 + ph)) - counts) * weights

    res = least_squares(
        residuals, [amp0, vis0, phase0],
        bounds=([0.0, 0.0, -np.inf], [np.inf, 1.0, np.inf]),
        method="trf", x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev,
    )
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitError(
            f"calibration fit for channel {name} did not converge: {res.message}",
            {"channel": name, "status": int(res.status), "nfev": int(res.nfev), "x": res.x.tolist()},
        )
    amp, vis, ph = res.x
    jac = res.jac
    try:
        cov = np.linalg.inv(jac.T @ jac)
        errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        errs = np.full(3, np.nan)
    chi2 = float(np.sum(res.fun ** 2))
    return ChannelFit(name, float(amp), float(vis), float(_wrap(ph)),
                      float(errs[0]), float(errs[1]), float(errs[2]),
                      chi2, int(counts.size - 3))


def fit_calibration(sweep: Sequence[tuple[float, CoincidenceSet]], max_nfev: int = 200) -> CalibrationCurve:
    """Poisson-weighted sinusoid fit N_i(a0) = A_i (1 + v_i cos(a0 + phi_i)) per channel."""
    if not sweep:
        raise InputError("empty calibration sweep")
    alpha0 = np.array([float(a) for a, _ in sweep])
    _check_sweep(alpha0)
    counts = np.array([s.totals for _, s in sweep], dtype=float)
    exposure = np.array([s.n_bins * s.bin_duration for _, s in sweep], dtype=float)

    fits = {name: _fit_channel(name, alpha0, counts[:, i], exposure, max_nfev)
            for i, name in enumerate(OUTCOMES)}
    vis = np.array([f.visibility for f in fits.values()])
    err = np.array([f.visibility_err for f in fits.values()])
    if np.all(np.isfinite(err)) and np.all(err > 0):
        w = 1.0 / err ** 2
        pooled = float(np.sum(w * vis) / np.sum(w))
        pooled_err = float(1.0 / math.sqrt(np.sum(w)))
    else:
        pooled = float(vis.mean())
        pooled_err = 0.0 if np.all(err == 0) else float("nan")
    return CalibrationCurve(fits, pooled, pooled_err, int(alpha0.size))


# ------------------------------------------------------------ point estimates


def _choose_branch(base, reference_theta):
    # arccos gives [0, pi]; the mirror branch 2pi - base is used when the
    # operating point sits in (pi, 2pi)
    ref = float(np.mod(reference_theta, 2 * np.pi))
    if ref > np.pi:
        return 2 * np.pi - base
    return base


def theta_from_counts(counts: np.ndarray, visibility: float, reference_theta: float = HALF_FRINGE):
    """Vectorised fringe inversion; returns (theta, contrast/V) per row. Rows with no counts give nan."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=-1)
    same = counts[..., 0] + counts[..., 3]
    mixed = counts[..., 1] + counts[..., 2]
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = (same - mixed) / (visibility * total)
    theta = _choose_branch(np.arccos(np.clip(ratio, -1.0, 1.0)), reference_theta)
    return theta, ratio


def estimate_theta(counts, visibility: float, reference_theta: float = HALF_FRINGE) -> tuple[float, float]:
    """Maximum-likelihood fringe phase from pooled counts and its Cramer-Rao sigma."""
    arr = counts.counts if isinstance(counts, CoincidenceSet) else np.asarray(counts, dtype=float)
    totals = np.asarray(arr, dtype=float).reshape(-1, 4).sum(axis=0)
    n = totals.sum()
    if n <= 0:
        raise InputError("cannot estimate a phase from zero counts")
    theta, ratio = theta_from_counts(totals, visibility, reference_theta)
    if abs(ratio) > 1.0 + CONTRAST_TOLERANCE:
        warnings.warn(
            f"contrast/visibility = {float(ratio):.4f} exceeds 1 by more than {CONTRAST_TOLERANCE}; "
            "visibility is inconsistent with the data",
            VisibilityWarning, stacklevel=2,
        )
    info = fringe_fisher(visibility, float(theta))
    sigma = math.inf if info <= 0 else 1.0 / math.sqrt(n * info)
    return float(theta), sigma


@dataclass(frozen=True)
class Estimate:
    """Rotation estimate; angles in radians (see the *_deg properties)."""

    parameter: Parameter
    value: float
    std_error: float
    n_pairs: float
    fi_used: float
    crb_sigma: float
    ratio_to_classical_crb: float
    std_error_combined: float
    value_pooled: float
    std_error_pooled: float
    theta_reference: float
    theta_sample: float
    n_bins: int
    per_bin: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    meta: SetMetadata | None = None

    @property
    def value_deg(self) -> float:
        return math.degrees(self.value)

    @property
    def std_error_deg(self) -> float:
        return math.degrees(self.std_error)

    @property
    def crb_sigma_deg(self) -> float:
        return math.degrees(self.crb_sigma)


def _check_pair(reference: CoincidenceSet, sample: CoincidenceSet, scheme):
    ma, mb = reference.meta, sample.meta
    if ma is None or mb is None:
        if scheme is None:
            raise MetadataError("scheme unknown: no metadata on the coincidence sets")
        return Scheme.parse(scheme)
    if ma.scheme is not mb.scheme:
        raise MetadataError(f"scheme mismatch: reference {ma.scheme.value}, sample {mb.scheme.value}")
    if abs(ma.bias_phase - mb.bias_phase) > 1e-9:
        raise MetadataError("bias phase mismatch between reference and sample")
    if abs(ma.lambda1 - mb.lambda1) > 1e-6 or abs(ma.lambda2 - mb.lambda2) > 1e-6:
        raise MetadataError("wavelength mismatch between reference and sample")
    if scheme is not None and Scheme.parse(scheme) is not ma.scheme:
        raise MetadataError(f"requested scheme {scheme} does not match metadata {ma.scheme.value}")
    return ma.scheme


def _sem(x):
    x = x[np.isfinite(x)]
    if x.size < 2:
        return math.nan
    return float(np.std(x, ddof=1) / math.sqrt(x.size))


def extract_rotation(reference: CoincidenceSet, sample: CoincidenceSet, scheme=None,
                     visibility: float | None = None) -> Estimate:
    """Blank-vs-sample rotation: mean rotation (phi) or rotation difference (psi).

    The headline value and standard error come from per-bin phase estimates
    of the sample set, referenced to the blank set's mean phase.
    `std_error_combined` folds in the blank set's own standard error.
    """
    scheme = _check_pair(reference, sample, scheme)
    if not scheme.is_quantum:
        raise MetadataError("rotation extraction needs the phi or psi scheme")
    if visibility is None:
        visibility = (sample.meta.visibility if sample.meta else None) or 1.0
    bias = sample.meta.bias_phase if sample.meta else HALF_FRINGE
    # operating point branch: blank runs sit at the bias phase
    ref_theta, ref_sigma = estimate_theta(reference, visibility, bias)
    smp_theta, smp_sigma = estimate_theta(sample, visibility, bias)

    ref_bins, _ = theta_from_counts(reference.counts, visibility, bias)
    smp_bins, _ = theta_from_counts(sample.counts, visibility, bias)
    ref_bins = ref_bins[reference.counts.sum(axis=1) > 0]
    smp_bins = smp_bins[sample.counts.sum(axis=1) > 0]
    ref_mean = float(np.mean(ref_bins))

    factor = CHAIN_FACTOR[scheme]
    # theta = bias - 4 mean (phi), theta = bias + 2 diff (psi)
    sign = -1.0 if scheme is Scheme.PHI else 1.0
    per_bin = sign * (smp_bins - ref_mean) / factor
    parameter = Parameter.MEAN if scheme is Scheme.PHI else Parameter.DIFFERENCE

    pooled_value = sign * (smp_theta - ref_theta) / factor
    pooled_err = math.hypot(ref_sigma, smp_sigma) / factor

    sem = _sem(per_bin)
    if math.isnan(sem):
        sem = smp_sigma / factor
    ref_sem = _sem(ref_bins)
    ref_sem = ref_sigma if math.isnan(ref_sem) else ref_sem
    combined = math.hypot(sem, ref_sem / factor)

    n = sample.n_pairs
    fi_used = factor ** 2 * float(fringe_fisher(visibility, smp_theta))
    crb = math.inf if fi_used <= 0 else 1.0 / math.sqrt(n * fi_used)
    est = Estimate(
        parameter=parameter, value=float(np.mean(per_bin)), std_error=sem, n_pairs=n,
        fi_used=fi_used, crb_sigma=crb, ratio_to_classical_crb=math.nan,
        std_error_combined=combined, value_pooled=pooled_value, std_error_pooled=pooled_err,
        theta_reference=ref_theta, theta_sample=smp_theta, n_bins=int(per_bin.size),
        per_bin=per_bin, meta=sample.meta,
    )
    return replace(est, ratio_to_classical_crb=compare_to_classical_crb(est, n))


def classical_crb_sigma(parameter, n_pairs: float) -> float:
    """Ideal classical uncertainty (rad) for n_pairs linearly polarized photon pairs."""
    parameter = Parameter.parse(parameter)
    if parameter is Parameter.THETA:
        raise InputError("classical bound is defined for the mean or difference rotation")
    return 1.0 / math.sqrt(n_pairs * IDEAL_CLASSICAL_FI[parameter.value])


def compare_to_classical_crb(estimate: Estimate, n_pairs: float | None = None) -> float:
    """Experimental standard error divided by the ideal classical Cramer-Rao sigma."""
    n = estimate.n_pairs if n_pairs is None else n_pairs
    if not n > 0:
        raise InputError("n_pairs must be positive")
    return estimate.std_error / classical_crb_sigma(estimate.parameter, n)
