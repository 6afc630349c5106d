"""Run configuration read from TOML files.

Unknown keys anywhere in the file are rejected.
"""

import math
import os
import tomllib
from pathlib import Path
from typing import Any

from loguru import logger
from pydantic import Field, ValidationError, model_validator
from typing_extensions import Annotated

from bosefield.exceptions import BFInvalidParameter
from bosefield.field import ModelParams
from bosefield.models import BoseFieldBaseModel
from bosefield.results import ResultFormat
from bosefield.sampler import InitMode, MoveParams

WORKERS_ENV = "BOSEFIELD_WORKERS"


class ModelSection(BoseFieldBaseModel):
    """Physical parameters; the cutoff is derived from mu + T when unset."""

    atoms: Annotated[float, Field(gt=0)]
    coupling: Annotated[float, Field(ge=0)] = 0.0
    temperature: Annotated[float, Field(ge=0)]
    cutoff: Annotated[int | None, Field(ge=0)] = None

    def params(self, cutoff: int, temperature: float | None = None) -> ModelParams:
        return ModelParams(
            atoms=self.atoms,
            coupling=self.coupling,
            temperature=self.temperature if temperature is None else temperature,
            cutoff=cutoff,
        )


class SamplerSection(BoseFieldBaseModel):
    """Chain schedule in sweeps of K + 1 proposals and the move tuning."""

    theta_scale: Annotated[float, Field(gt=0, le=math.pi / 2)] = 0.3
    phase_scale: Annotated[float, Field(gt=0, le=math.pi)] = math.pi
    target_acceptance: Annotated[float, Field(gt=0, lt=1)] = 0.5
    adaptation_interval: Annotated[int, Field(ge=1)] = 1000
    burn_in_sweeps: Annotated[int, Field(ge=0)] = 200_000
    sweeps: Annotated[int, Field(ge=1, description="post burn-in sweeps")] = 50_000
    thinning_sweeps: Annotated[int, Field(ge=1)] = 5
    n_chains: Annotated[int, Field(ge=0)] = 4
    base_seed: int | None = None
    init: InitMode = InitMode.THERMAL_RANDOM
    minimizer_sweeps: Annotated[int, Field(ge=0, description="T = 0 minimizer length")] = 20_000

    @model_validator(mode="after")
    def check_seed(self) -> "SamplerSection":
        if self.n_chains > 0 and self.base_seed is None:
            msg = "sampler.base_seed is required when n_chains > 0"
            raise ValueError(msg)
        return self

    def move_params(self) -> MoveParams:
        return MoveParams(
            theta_scale=self.theta_scale,
            phase_scale=self.phase_scale,
            target_acceptance=self.target_acceptance,
            adaptation_interval=self.adaptation_interval,
        )

    def seeds(self) -> list[int]:
        """Return base_seed + chain index for every chain."""
        if self.n_chains == 0:
            return []
        assert self.base_seed is not None
        return [self.base_seed + index for index in range(self.n_chains)]


class GridSection(BoseFieldBaseModel):
    extent_factor: Annotated[float, Field(ge=1)] = 1.5
    oversample: Annotated[float, Field(ge=1)] = 4.0


class GPESection(BoseFieldBaseModel):
    dtau: Annotated[float, Field(gt=0)] = 1e-3
    tol: Annotated[float, Field(gt=0)] = 1e-9
    max_iterations: Annotated[int, Field(ge=1)] = 200_000


class AnalysisSection(BoseFieldBaseModel):
    histogram_bins: Annotated[int | None, Field(ge=1)] = None
    symmetric_g1: bool = False
    reference_points: Annotated[int, Field(ge=3)] = 2001


class SweepSection(BoseFieldBaseModel):
    temperatures: list[Annotated[float, Field(ge=0)]] = []


class OutputSection(BoseFieldBaseModel):
    directory: Path = Path("results")
    format: ResultFormat = ResultFormat.TSV
    overwrite: bool = False


class RunConfig(BoseFieldBaseModel):
    """Complete description of a run or sweep."""

    model: ModelSection
    sampler: SamplerSection = SamplerSection(n_chains=0)
    grid: GridSection = GridSection()
    gpe: GPESection = GPESection()
    analysis: AnalysisSection = AnalysisSection()
    sweep: SweepSection = SweepSection()
    output: OutputSection = OutputSection()
    workers: Annotated[int | None, Field(ge=1)] = None

    @classmethod
    def from_file(cls, filename: Path | str) -> "RunConfig":
        """Load and validate a TOML configuration file."""
        path = Path(filename)
        try:
            with open(path, "rb") as f_in:
                data = tomllib.load(f_in)
        except OSError as e:
            msg = f"Cannot read config {path}: {e}"
            raise BFInvalidParameter(msg) from e
        except tomllib.TOMLDecodeError as e:
            msg = f"Malformed TOML in {path}: {e}"
            raise BFInvalidParameter(msg) from e
        config = cls.from_dict(data)
        logger.debug("Loaded config from {}", path)
        return config

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            msg = f"Invalid configuration: {e}"
            raise BFInvalidParameter(msg) from e

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Return a copy with dotted keys such as `sampler.base_seed` replaced.

        None values are ignored.
        """
        data = self.model_dump()
        for key, value in overrides.items():
            if value is None:
                continue
            section, _, field = key.partition(".")
            if field:
                data[section][field] = value
            else:
                data[section] = value
        return RunConfig.from_dict(data)

    def worker_count(self) -> int:
        """Return the worker count; BOSEFIELD_WORKERS wins over the config."""
        value = os.environ.get(WORKERS_ENV)
        if value is not None:
            try:
                workers = int(value)
            except ValueError as e:
                msg = f"{WORKERS_ENV} must be a positive integer, got {value!r}"
                raise BFInvalidParameter(msg) from e
            if workers < 1:
                msg = f"{WORKERS_ENV} must be a positive integer, got {value!r}"
                raise BFInvalidParameter(msg)
            return workers
        if self.workers is not None:
            return self.workers
        return max(1, min(self.sampler.n_chains, os.cpu_count() or 1))

    def fingerprint(self) -> dict[str, Any]:
        """Return the JSON form that identifies the physics of the run."""
        data = self.model_dump(mode="json")
        data.pop("output")
        data.pop("workers")
        return data
