"""Seeded Poisson simulation of the acquisition protocol and the full measurement grid."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from qord.errors import ConfigError, DomainError, InputError
from qord.estimation import CoincidenceSet, Estimate, SetMetadata, extract_rotation
from qord.measurement import HALF_FRINGE, FringeModel, Scheme, outcome_probabilities
from qord.sample import DispersionModel, Sample, default_sucrose_model, mean_and_difference, wavelength_pair
from qord.state import DEFAULT_PUMP_NM, OUTCOMES

DEFAULT_PAIR_RATE = 1.837e4  # detected coincidences per second
DEFAULT_BINS = 420  # seven minutes of one-second bins
MIN_DIAGNOSTIC_BINS = 30

SCHEME_INDEX = {Scheme.PHI: 0, Scheme.PSI: 1, Scheme.CLASSICAL: 2}


@dataclass(frozen=True)
class RunPlan:
    scheme: Scheme
    sample: Sample | None = None  # None means a water blank
    delta_lambda: float = 0.0
    bias_phase: float = HALF_FRINGE
    visibility: float = 1.0
    pair_rate: float = DEFAULT_PAIR_RATE
    bin_duration: float = 1.0
    n_bins: int = DEFAULT_BINS
    rng_seed: int = 0
    pump: float = DEFAULT_PUMP_NM
    drift: float = 0.0  # fractional linear rate change over the run (diagnostics only)

    def __post_init__(self):
        try:
            object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.pair_rate > 0:
            raise ConfigError("pair_rate must be positive")
        if self.n_bins < 1:
            raise ConfigError("n_bins must be >= 1")
        if not self.bin_duration > 0:
            raise ConfigError("bin_duration must be positive")
        if not 0 < self.visibility <= 1:
            raise ConfigError("visibility must lie in (0, 1]")
        if abs(self.drift) >= 2:
            raise ConfigError("drift must keep the rate positive (|drift| < 2)")

    @property
    def is_blank(self) -> bool:
        return self.sample is None or self.sample.is_blank


def run_rotations(plan: RunPlan) -> tuple[float, float]:
    """(mean, difference) rotation in radians seen by this run."""
    pair = wavelength_pair(plan.delta_lambda, plan.pump)
    if plan.is_blank:
        return 0.0, 0.0
    mean_deg, diff_deg = mean_and_difference(plan.sample, pair)
    return math.radians(mean_deg), math.radians(diff_deg)


def run_probabilities(plan: RunPlan) -> np.ndarray:
    try:
        mean, diff = run_rotations(plan)
    except DomainError as exc:
        raise ConfigError(f"invalid run plan: {exc}") from exc
    model = FringeModel(plan.scheme, plan.bias_phase, plan.visibility)
    return outcome_probabilities(model, mean, diff)


def _metadata(plan: RunPlan) -> SetMetadata:
    pair = wavelength_pair(plan.delta_lambda, plan.pump)
    sample = plan.sample
    return SetMetadata(
        scheme=plan.scheme, bias_phase=float(plan.bias_phase),
        lambda1=pair.lambda1, lambda2=pair.lambda2,
        sample_label="water" if plan.is_blank else sample.label,
        visibility=float(plan.visibility),
        concentration=0.0 if plan.is_blank else float(sample.concentration),
        is_blank=plan.is_blank, seed=int(plan.rng_seed),
    )


def _bin_means(plan: RunPlan) -> np.ndarray:
    mu = plan.pair_rate * plan.bin_duration
    if plan.n_bins == 1 or plan.drift == 0:
        return np.full(plan.n_bins, mu)
    ramp = np.linspace(-0.5, 0.5, plan.n_bins)
    return mu * (1.0 + plan.drift * ramp)


def simulate_run(plan: RunPlan) -> CoincidenceSet:
    """Poisson total per bin, split multinomially over (HH, HV, VH, VV)."""
    probs = run_probabilities(plan)
    rng = np.random.default_rng(plan.rng_seed)
    totals = rng.poisson(_bin_means(plan))
    counts = rng.multinomial(totals, probs)
    return CoincidenceSet(counts.astype(np.int64), plan.bin_duration, _metadata(plan))


def expected_counts(plan: RunPlan) -> CoincidenceSet:
    """Noiseless expected counts for the plan (float-valued)."""
    probs = run_probabilities(plan)
    counts = _bin_means(plan)[:, None] * probs[None, :]
    return CoincidenceSet(counts, plan.bin_duration, _metadata(plan))


def simulate_sweep(plan: RunPlan, bias_phases: Sequence[float], noiseless: bool = False):
    """Calibration sweep: one run per bias phase, with independent child seeds."""
    children = np.random.SeedSequence(plan.rng_seed).spawn(len(bias_phases))
    out = []
    for bias, child in zip(bias_phases, children):
        seed = int(child.generate_state(1, np.uint64)[0])
        sub = replace(plan, bias_phase=float(bias), rng_seed=seed)
        out.append((float(bias), expected_counts(sub) if noiseless else simulate_run(sub)))
    return out


# ---------------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class ChannelNoise:
    channel: str
    mean: float
    variance: float
    fano: float
    fano_err: float  # sampling sigma of the Fano factor for Poisson counts

    @property
    def z(self) -> float:
        return (self.fano - 1.0) / self.fano_err

    @property
    def overdispersed(self) -> bool:
        return self.z > 3.0


def noise_diagnostics(counts: CoincidenceSet) -> list[ChannelNoise]:
    n = counts.n_bins
    if n < MIN_DIAGNOSTIC_BINS:
        raise InputError(f"noise diagnostics need >= {MIN_DIAGNOSTIC_BINS} bins, got {n}")
    data = np.asarray(counts.counts, dtype=float)
    means = data.mean(axis=0)
    variances = data.var(axis=0, ddof=1)
    err = math.sqrt(2.0 / (n - 1))
    out = []
    for i, name in enumerate(OUTCOMES):
        fano = variances[i] / means[i] if means[i] > 0 else math.nan
        out.append(ChannelNoise(name, float(means[i]), float(variances[i]), float(fano), err))
    return out


# ----------------------------------------------------------------------- grid


@dataclass(frozen=True)
class GridConfig:
    schemes: tuple[Scheme, ...] = (Scheme.PHI, Scheme.PSI)
    concentrations: tuple[float, ...] = (0.2, 0.4)
    delta_lambdas: tuple[float, ...] = (3.0, 7.0, 11.0, 15.0, 19.0)
    bias_phase: float = HALF_FRINGE
    visibility: float = 0.92
    pair_rate: float = DEFAULT_PAIR_RATE
    bin_duration: float = 1.0
    n_bins: int = DEFAULT_BINS
    seed: int = 0
    path_length: float = 0.2
    pump: float = DEFAULT_PUMP_NM
    model: DispersionModel = field(default_factory=default_sucrose_model)
    rate_overrides: dict = field(default_factory=dict)  # cell key -> pairs/s
    blank_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(Scheme.parse(s) for s in self.schemes))
        object.__setattr__(self, "concentrations", tuple(float(c) for c in self.concentrations))
        object.__setattr__(self, "delta_lambdas", tuple(float(d) for d in self.delta_lambdas))


@dataclass(frozen=True)
class CellKey:
    scheme: Scheme
    concentration: float
    delta_lambda: float
    index: tuple[int, int, int]

    @property
    def label(self) -> str:
        return f"{self.scheme.value}_c{self.concentration:g}_dl{self.delta_lambda:g}"


@dataclass
class CellResult:
    key: CellKey
    status: str
    blank_plan: RunPlan | None = None
    sample_plan: RunPlan | None = None
    blank: CoincidenceSet | None = None
    sample: CoincidenceSet | None = None
    estimate: Estimate | None = None
    prediction: float | None = None  # rad, mean (phi) or difference (psi)
    error: str | None = None


def cell_seed(master: int, key: CellKey, role: int) -> int:
    """Per-run seed from the master seed and the cell coordinates; independent of execution order."""
    ss = np.random.SeedSequence(master, spawn_key=(*key.index, role))
    return int(ss.generate_state(1, np.uint64)[0])


def grid_cells(config: GridConfig) -> list[CellKey]:
    return [
        CellKey(s, c, d, (SCHEME_INDEX[s], ic, idl))
        for s in config.schemes
        for ic, c in enumerate(config.concentrations)
        for idl, d in enumerate(config.delta_lambdas)
    ]


def cell_plans(config: GridConfig, key: CellKey) -> tuple[RunPlan, RunPlan]:
    rate = float(config.rate_overrides.get(key.label, config.pair_rate))
    base = RunPlan(
        scheme=key.scheme, delta_lambda=key.delta_lambda, bias_phase=config.bias_phase,
        visibility=config.visibility, pair_rate=rate, bin_duration=config.bin_duration,
        n_bins=config.n_bins, pump=config.pump,
    )
    blank = replace(base, sample=None, rng_seed=cell_seed(config.seed, key, 0))
    if config.blank_only:
        sample_spec = None
    else:
        sample_spec = Sample(key.concentration, config.path_length, config.model)
    sample = replace(base, sample=sample_spec, rng_seed=cell_seed(config.seed, key, 1))
    return blank, sample


def _prediction(config: GridConfig, key: CellKey) -> float:
    if config.blank_only:
        return 0.0
    s = Sample(key.concentration, config.path_length, config.model)
    mean, diff = mean_and_difference(s, wavelength_pair(key.delta_lambda, config.pump))
    return math.radians(mean if key.scheme is Scheme.PHI else diff)


def run_cell(config: GridConfig, key: CellKey) -> CellResult:
    try:
        if not key.scheme.is_quantum:
            raise ConfigError("grid cells need the phi or psi scheme")
        blank_plan, sample_plan = cell_plans(config, key)
        blank = simulate_run(blank_plan)
        sample = simulate_run(sample_plan)
        est = extract_rotation(blank, sample, key.scheme, config.visibility)
        return CellResult(key, "ok", blank_plan, sample_plan, blank, sample, est, _prediction(config, key))
    except (ValueError, ArithmeticError) as exc:
        return CellResult(key, "failed", error=f"{type(exc).__name__}: {exc}")


def _run_cell_args(args):
    return run_cell(*args)


@dataclass
class GridResult:
    config: GridConfig
    cells: list[CellResult]

    @property
    def n_failed(self) -> int:
        return sum(c.status != "ok" for c in self.cells)

    @property
    def estimates(self) -> list[Estimate]:
        return [c.estimate for c in self.cells if c.estimate is not None]


def run_experiment_grid(config: GridConfig, workers: int = 1) -> GridResult:
    """All schemes x concentrations x wavelength separations, each with a blank and a sample run."""
    keys = grid_cells(config)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell_args, [(config, k) for k in keys]))
    else:
        cells = [run_cell(config, k) for k in keys]
    # pool.map preserves order; keys are already in coordinate order
    return GridResult(config, cells)


def prediction_overlay(config: GridConfig, delta_lambdas: Sequence[float] | None = None) -> list[dict]:
    """Model curves for every concentration: mean and difference rotation in rad and deg."""
    dls = config.delta_lambdas if delta_lambdas is None else delta_lambdas
    rows = []
    for c in config.concentrations:
        s = Sample(c, config.path_length, config.model)
        for dl in dls:
            pair = wavelength_pair(dl, config.pump)
            mean, diff = mean_and_difference(s, pair)
            rows.append({
                "concentration_g_per_ml": c, "delta_lambda_nm": float(dl),
                "lambda1_nm": pair.lambda1, "lambda2_nm": pair.lambda2,
                "mean_rotation_rad": math.radians(mean), "difference_rotation_rad": math.radians(diff),
                "mean_rotation_deg": mean, "difference_rotation_deg": diff,
            })
    return rows
