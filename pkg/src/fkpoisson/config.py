"""Run configuration: YAML file validated against a strict schema.

Unknown keys are errors.  Every error message starts with the dotted path of
the offending field, e.g. ``model.sigma: Field required``.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .classify import PotentialProblem
from .expr import ExprError, parse
from .sde import DiffusionModel

__all__ = ["ConfigError", "RunConfig", "load_config", "config_hash", "build_problem"]


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Strict):
    dimension: int = Field(ge=1)
    drift: list[str]
    sigma: list[list[str]]


class Case1Section(_Strict):
    epsilon: float = Field(gt=0)
    c1: str


class SimulationSection(_Strict):
    dt: float = Field(1e-3, gt=0)
    seed: int = Field(ge=0, lt=2**64)
    N: int = Field(100_000, ge=2)
    burn_in: Optional[float] = Field(None, ge=0)
    thinning: float = Field(0.1, gt=0)
    total_time: float = Field(10_000.0, gt=0)
    antithetic: bool = False


class SolveSection(_Strict):
    points: list[list[float]] = Field(default_factory=lambda: [[1.0]])
    T: Union[Literal["auto"], float] = "auto"
    tol: float = Field(0.01, gt=0)
    rate_source: Literal["auto", "pilot"] = "auto"
    pilot_T: float = Field(10.0, gt=0)
    pilot_N: int = Field(4000, ge=2)

    @field_validator("T")
    @classmethod
    def _positive_T(cls, v):
        if v != "auto" and not v > 0:
            raise ValueError("T must be 'auto' or a positive number")
        return v


class DiagnosticsSection(_Strict):
    beta_grid: list[float] = Field(default_factory=lambda: [-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15])
    T_grid: list[float] = Field(default_factory=lambda: [10.0, 20.0])
    lmgf_N: int = Field(20_000, ge=2)
    h: float = Field(0.05, gt=0)
    tv_times: list[float] = Field(default_factory=lambda: [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0])
    tv_points: Optional[list[list[float]]] = None
    tv_N: int = Field(20_000, ge=4)
    probe_radii: list[float] = Field(default_factory=lambda: [10.0, 20.0, 50.0])
    gamma: float = Field(0.25, ge=0)
    gamma_guard: float = Field(0.5, gt=0)
    moment_times: list[float] = Field(default_factory=lambda: [1.0, 2.0, 5.0, 10.0])
    deviation_delta: float = Field(0.5, gt=0)
    deviation_times: list[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0, 6.0, 8.0])
    ensemble_N: int = Field(20_000, ge=2)

    @model_validator(mode="after")
    def _gamma(self):
        if not self.gamma < self.gamma_guard:
            raise ValueError(f"gamma={self.gamma} must stay below gamma_guard={self.gamma_guard}")
        return self

    @field_validator("beta_grid")
    @classmethod
    def _beta_grid(cls, v):
        if not any(b == 0 for b in v):
            raise ValueError("beta grid must contain 0")
        if not any(b > 0 and -b in v for b in v):
            raise ValueError("beta grid must contain a symmetric pair +-h")
        return sorted(v)

    @field_validator("T_grid", "tv_times", "moment_times", "deviation_times")
    @classmethod
    def _increasing(cls, v):
        if not v or any(t <= 0 for t in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("must be a non-empty increasing list of positive times")
        return v

    @field_validator("probe_radii")
    @classmethod
    def _radii(cls, v):
        if any(b <= a for a, b in zip(v, v[1:])) or max(v) < 10:
            raise ValueError("radii must increase and reach at least 10")
        return v


class CrosscheckSection(_Strict):
    T_split: float = Field(1.0, ge=0)
    ball_center: Optional[list[float]] = None
    ball_radius: float = Field(1.0, gt=0)
    ball_point: Optional[list[float]] = None
    ball_t_max: float = Field(100.0, gt=0)
    growth_gamma: float = Field(0.5, ge=0)
    growth_radii: list[float] = Field(default_factory=lambda: [0.0, 1.0, 2.0, 3.0, 4.0])
    growth_N: int = Field(20_000, ge=2)
    centering_budget: int = Field(20_000, ge=2)


class OracleSection(_Strict):
    interval: tuple[float, float] = (-6.0, 6.0)
    n: int = Field(4096, ge=4)

    @field_validator("interval")
    @classmethod
    def _interval(cls, v):
        if not v[1] > v[0]:
            raise ValueError("interval must satisfy left < right")
        return v


class OutputSection(_Strict):
    directory: str = "fkpoisson-out"
    formats: list[Literal["json", "csv"]] = Field(default_factory=lambda: ["json", "csv"])


class RunConfig(_Strict):
    model: ModelSection
    potential: str
    source: str
    case1: Optional[Case1Section] = None
    simulation: SimulationSection
    solve: SolveSection = Field(default_factory=SolveSection)
    diagnostics: DiagnosticsSection = Field(default_factory=DiagnosticsSection)
    crosscheck: CrosscheckSection = Field(default_factory=CrosscheckSection)
    oracle: OracleSection = Field(default_factory=OracleSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _shapes(self):
        d = self.model.dimension
        if len(self.model.drift) != d:
            raise ValueError(f"model.drift: expected {d} expressions, got {len(self.model.drift)}")
        if len(self.model.sigma) != d:
            raise ValueError(f"model.sigma: expected {d} rows, got {len(self.model.sigma)}")
        widths = {len(r) for r in self.model.sigma}
        if len(widths) != 1 or 0 in widths:
            raise ValueError("model.sigma: rows must be non-empty and of equal length")
        for i, p in enumerate(self.solve.points):
            if len(p) != d:
                raise ValueError(f"solve.points.{i}: expected {d} coordinates")
        return self


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"])
        msg = e["msg"].removeprefix("Value error, ")
        lines.append(f"{loc}: {msg}" if loc else msg)
    return "\n".join(lines)


def _check_expressions(cfg: RunConfig) -> None:
    d = cfg.model.dimension
    fields = [(f"model.drift.{i}", s) for i, s in enumerate(cfg.model.drift)]
    fields += [(f"model.sigma.{i}.{j}", s) for i, row in enumerate(cfg.model.sigma) for j, s in enumerate(row)]
    fields += [("potential", cfg.potential), ("source", cfg.source)]
    if cfg.case1 is not None:
        fields.append(("case1.c1", cfg.case1.c1))
    for path, src in fields:
        try:
            parse(src, d)
        except ExprError as e:
            raise ConfigError(f"{path}: {e}") from e


def validate(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_validation(e)) from None
    _check_expressions(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}") from e
    return validate(data)


def config_hash(cfg: RunConfig) -> str:
    """Digest of everything that can change a result; the output location is left out."""
    canon = json.dumps(cfg.model_dump(mode="json", exclude={"output"}), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def build_problem(cfg: RunConfig) -> PotentialProblem:
    d = cfg.model.dimension
    model = DiffusionModel.from_strings(cfg.model.drift, cfg.model.sigma, d)
    c1 = cfg.case1.c1 if cfg.case1 else None
    eps = cfg.case1.epsilon if cfg.case1 else None
    return PotentialProblem.from_strings(model, cfg.potential, cfg.source, c1, eps)
