"""YAML run configurations for the command-line tools.

Angles are given in degrees (``*_deg``) or radians (``*_rad``). Validation
errors are reported with the line number of the offending key.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from qord.errors import ConfigError
from qord.measurement import HALF_FRINGE
from qord.sample import DispersionModel, default_sucrose_model
from qord.state import DEFAULT_PUMP_NM


def _line_map(text: str) -> dict[tuple, int]:
    root = yaml.compose(text, Loader=yaml.SafeLoader)
    lines: dict[tuple, int] = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = path + (k.value,)
                lines[key] = k.start_mark.line + 1
                walk(v, key)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                key = path + (i,)
                lines[key] = item.start_mark.line + 1
                walk(item, key)

    if root is not None:
        lines[()] = root.start_mark.line + 1
        walk(root, ())
    return lines


def _line_for(loc: tuple, lines: dict) -> int | None:
    loc = tuple(x for x in loc if not (isinstance(x, str) and x.startswith("function-")))
    for n in range(len(loc), -1, -1):
        if loc[:n] in lines:
            return lines[loc[:n]]
    return None


class _Base(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DrudeTermConfig(_Base):
    A: float
    lambda0: float = Field(ge=0, lt=700)


class DispersionConfig(_Base):
    name: str = "custom"
    terms: list[DrudeTermConfig] = Field(min_length=1)

    def build(self) -> DispersionModel:
        return DispersionModel.from_mapping(self.model_dump())


def _angle(data: dict, stem: str, default=None):
    """Collapse `<stem>_deg` / `<stem>_rad` into radians under `<stem>`."""
    if not isinstance(data, dict):
        return data
    deg, rad = f"{stem}_deg", f"{stem}_rad"
    if deg in data and rad in data:
        raise ValueError(f"give only one of {deg} or {rad}")
    data = dict(data)
    if deg in data:
        v = data.pop(deg)
        data[stem] = [math.radians(x) for x in v] if isinstance(v, list) else math.radians(v)
    elif rad in data:
        data[stem] = data.pop(rad)
    elif default is not None:
        data.setdefault(stem, default)
    return data


class _SampleFields(_Base):
    path_length_dm: float = Field(0.2, gt=0)
    pump_nm: float = Field(DEFAULT_PUMP_NM, gt=0)
    dispersion: Optional[DispersionConfig] = None

    def dispersion_model(self) -> DispersionModel:
        return self.dispersion.build() if self.dispersion else default_sucrose_model()


class SimulateConfig(_SampleFields):
    scheme: Literal["phi", "psi", "classical"]
    visibility: float = Field(1.0, gt=0, le=1)
    bias_phase: float = HALF_FRINGE
    bias_sweep: Optional[list[float]] = None
    delta_lambda_nm: float = Field(0.0, ge=0, le=20)
    concentration_g_per_ml: float = Field(0.0, ge=0)
    blank: bool = False
    pair_rate: float = Field(1.837e4, gt=0)
    bin_duration_s: float = Field(1.0, gt=0)
    n_bins: int = Field(420, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    drift: float = 0.0
    name: str = "run"

    @model_validator(mode="before")
    @classmethod
    def _angles(cls, data):
        return _angle(_angle(data, "bias_phase"), "bias_sweep")


class SweepEntry(_Base):
    counts: str
    bias_phase: Optional[float] = None
    hwp_angle: Optional[float] = None

    @model_validator(mode="before")
    @classmethod
    def _angles(cls, data):
        return _angle(_angle(data, "bias_phase"), "hwp_angle")


class CalibrateConfig(_Base):
    sweep: list[SweepEntry] = Field(min_length=1)
    hwp_slope: float = 1.0
    hwp_offset: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def _angles(cls, data):
        return _angle(data, "hwp_offset")


class EstimatePair(_Base):
    reference: str
    sample: str


class EstimateConfig(_Base):
    pairs: list[EstimatePair] = Field(min_length=1)
    calibration: Optional[str] = None
    visibility: Optional[float] = Field(None, gt=0, le=1)


class GridSpec(_Base):
    min: float = -math.pi / 2
    max: float = math.pi / 2
    points: int = Field(361, ge=2)

    @model_validator(mode="before")
    @classmethod
    def _angles(cls, data):
        return _angle(_angle(data, "min"), "max")

    @model_validator(mode="after")
    def _range(self):
        if not self.min < self.max:
            raise ValueError("grid min must be below max")
        if max(abs(self.min), abs(self.max)) > math.pi / 2 + 1e-12:
            raise ValueError("grid must lie within +-90 degrees")
        return self


class FisherConfig(_Base):
    visibility: float = Field(gt=0, le=1)
    bias_phase: float = HALF_FRINGE
    grid: GridSpec = GridSpec()

    @model_validator(mode="before")
    @classmethod
    def _angles(cls, data):
        return _angle(data, "bias_phase")


class GridFileConfig(_SampleFields):
    schemes: list[Literal["phi", "psi"]] = Field(["phi", "psi"], min_length=1)
    concentrations_g_per_ml: list[float] = Field([0.2, 0.4], min_length=1)
    delta_lambdas_nm: list[float] = Field([3.0, 7.0, 11.0, 15.0, 19.0], min_length=1)
    bias_phase: float = HALF_FRINGE
    visibility: float = Field(0.92, gt=0, le=1)
    pair_rate: float = Field(1.837e4, gt=0)
    rate_overrides: dict[str, float] = {}
    bin_duration_s: float = Field(1.0, gt=0)
    n_bins: int = Field(420, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    blank_only: bool = False
    workers: int = Field(1, ge=1)
    write_counts: bool = True

    @model_validator(mode="before")
    @classmethod
    def _angles(cls, data):
        return _angle(data, "bias_phase")

    @field_validator("concentrations_g_per_ml")
    @classmethod
    def _conc(cls, v):
        if any(c < 0 for c in v):
            raise ValueError("concentrations must be >= 0")
        return v

    @field_validator("delta_lambdas_nm")
    @classmethod
    def _dl(cls, v):
        if any(not 0 <= d <= 20 for d in v):
            raise ValueError("delta_lambda values must lie in [0, 20] nm")
        return v

    def build(self):
        from qord.protocol import GridConfig

        return GridConfig(
            schemes=tuple(self.schemes), concentrations=tuple(self.concentrations_g_per_ml),
            delta_lambdas=tuple(self.delta_lambdas_nm), bias_phase=self.bias_phase,
            visibility=self.visibility, pair_rate=self.pair_rate, bin_duration=self.bin_duration_s,
            n_bins=self.n_bins, seed=self.seed, path_length=self.path_length_dm, pump=self.pump_nm,
            model=self.dispersion_model(), rate_overrides=dict(self.rate_overrides),
            blank_only=self.blank_only,
        )


class DiagnoseConfig(_Base):
    counts: list[str] = Field(min_length=1)


SCHEMAS = {
    "simulate": SimulateConfig,
    "calibrate": CalibrateConfig,
    "estimate": EstimateConfig,
    "fisher": FisherConfig,
    "grid": GridFileConfig,
    "diagnose": DiagnoseConfig,
}


def parse_config(text: str, schema: type[BaseModel], source: str | None = None):
    try:
        data = yaml.safe_load(text)
        lines = _line_map(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", line, source) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", lines.get(()), source)
    try:
        return schema.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(err["loc"])
        field = ".".join(str(x) for x in loc) or "<root>"
        raise ConfigError(f"{field}: {err['msg']}", _line_for(loc, lines), source) from None


def load_config(path, command: str):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, SCHEMAS[command], str(path))
