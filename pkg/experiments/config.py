"""
Run configuration: flat key = value files, command-line overrides and validated settings
"""

import math
from enum import Enum
from itertools import pairwise

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from kernels.config import DEFAULT_KERNEL_CONFIG, KernelConfig
from models.errors import ConfigError, InvalidArgumentError
from models.types import ScaleParams
from transport.semidiscrete import GRID_CAP, default_grid_m


class SolverSettings(BaseModel):
    """Tolerances handed to the semi-discrete solver"""

    model_config = ConfigDict(frozen=True)

    mass_tol: float = Field(default=1e-8, ge=1e-10, le=1e-2)
    max_iters: int = Field(default=200, ge=1)
    method: str = "newton"

    @field_validator("method")
    @classmethod
    def _known_method(cls, value: str) -> str:
        if value not in ("newton", "diagonal"):
            raise ValueError(f"solver_method must be 'newton' or 'diagonal', got {value!r}")
        return value


DEFAULT_SOLVER = SolverSettings()


class TimeRule(str, Enum):
    FIXED = "fixed"
    T_N = "t_n"
    R_N_SQ = "r_n_sq"
    SCALED_T_N = "scaled_t_n"


class ExperimentConfig(BaseModel):
    """One estimator swept over a list of sample sizes"""

    model_config = ConfigDict(frozen=True)

    quantity: str
    n_list: tuple[int, ...]
    t_rule: TimeRule | None = None  # None for quantities without a heat time
    t_value: float | None = None  # the fixed t, or the factor c of c * t_n
    grid_m: int | None = None
    grid_cap: int = GRID_CAP
    replicas: int = Field(default=32, ge=2)
    seed: int = Field(default=0, ge=0, lt=2**64)
    kernel: KernelConfig = DEFAULT_KERNEL_CONFIG
    solver: SolverSettings = DEFAULT_SOLVER

    @field_validator("n_list")
    @classmethod
    def _increasing(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value:
            raise ValueError("n_list must not be empty")
        if value[0] < 1 or any(b <= a for a, b in pairwise(value)):
            raise ValueError(f"n_list must be strictly increasing positive integers, got {value}")
        return value

    @model_validator(mode="after")
    def _times_above_r_n_sq(self) -> "ExperimentConfig":
        if self.t_rule in (TimeRule.FIXED, TimeRule.SCALED_T_N) and self.t_value is None:
            raise ValueError(f"t_rule {self.t_rule.value} needs t_value")
        for n in self.n_list:
            t = self.time_for(n)
            if t is not None and t < 1.0 / n:
                raise ValueError(f"t={t:.6g} at n={n} violates t >= r_n^2 = 1/n")
        return self

    def time_for(self, n: int) -> float | None:
        scales = ScaleParams.for_n(n)
        if self.t_rule is None:
            return None
        if self.t_rule == TimeRule.FIXED:
            return self.t_value
        if self.t_rule == TimeRule.T_N:
            return scales.t_n
        if self.t_rule == TimeRule.R_N_SQ:
            return scales.r_n_sq
        return self.t_value * scales.t_n

    def grid_for(self, n: int) -> int:
        return self.grid_m or default_grid_m(n, self.grid_cap)


# --- flat key = value files ---------------------------------------------------------------------

_LIST_KEYS = {"n_list"}
_BOOL_KEYS = {"keep_replicas"}
_KERNEL_KEYS = ("target_accuracy", "crossover_time", "ewald_sigma", "max_modes")


class RunSettings(BaseModel):
    """Resolved run settings; None means 'use the subcommand default'"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=20240917, ge=0, lt=2**64)
    replicas: int | None = Field(default=None, ge=2)
    n_list: tuple[int, ...] | None = None
    grid_m: int | None = Field(default=None, ge=16)
    grid_cap: int = Field(default=GRID_CAP, ge=16)
    threads: int | None = Field(default=None, ge=1)
    keep_replicas: bool = False
    out_dir: str = "results"
    mass_tol: float = Field(default=1e-8, ge=1e-10, le=1e-2)
    max_iters: int = Field(default=200, ge=1)
    solver_method: str = "newton"
    target_accuracy: float = DEFAULT_KERNEL_CONFIG.target_accuracy
    crossover_time: float = DEFAULT_KERNEL_CONFIG.crossover_time
    ewald_sigma: float = DEFAULT_KERNEL_CONFIG.ewald_sigma
    max_modes: int = DEFAULT_KERNEL_CONFIG.max_modes
    t_value: float | None = Field(default=None, gt=0.0)
    s_value: float | None = Field(default=None, gt=0.0)
    trace_k_min: int = Field(default=5, ge=1)
    trace_k_max: int = Field(default=12, ge=2)
    path_nodes: int = Field(default=8, ge=0)

    @field_validator("n_list")
    @classmethod
    def _increasing(cls, value):
        if value is not None and (
            not value or value[0] < 1 or any(b <= a for a, b in pairwise(value))
        ):
            raise ValueError(f"n_list must be strictly increasing positive integers, got {value}")
        return value

    @model_validator(mode="after")
    def _consistent(self) -> "RunSettings":
        if self.trace_k_min >= self.trace_k_max:
            raise ValueError("trace_k_min must be below trace_k_max")
        SolverSettings(mass_tol=self.mass_tol, max_iters=self.max_iters, method=self.solver_method)
        self.kernel_config()
        return self

    def kernel_config(self) -> KernelConfig:
        return KernelConfig(
            target_accuracy=self.target_accuracy,
            crossover_time=self.crossover_time,
            ewald_sigma=self.ewald_sigma,
            max_modes=self.max_modes,
        )

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(
            mass_tol=self.mass_tol, max_iters=self.max_iters, method=self.solver_method
        )

    def experiment(
        self,
        quantity: str,
        default_n: tuple[int, ...],
        default_replicas: int,
        t_rule: TimeRule | None = None,
        t_value: float | None = None,
    ) -> ExperimentConfig:
        """ExperimentConfig for one estimator, with subcommand defaults filled in"""
        try:
            return ExperimentConfig(
                quantity=quantity,
                n_list=self.n_list or default_n,
                t_rule=t_rule,
                t_value=t_value,
                grid_m=self.grid_m,
                grid_cap=self.grid_cap,
                replicas=self.replicas or default_replicas,
                seed=self.seed,
                kernel=self.kernel_config(),
                solver=self.solver_settings(),
            )
        except ValidationError as e:
            raise InvalidArgumentError(f"{quantity}: {_first_message(e)}") from e

    def echo(self) -> dict:
        """Config dictionary that reproduces the run"""
        data = self.model_dump()
        if data["n_list"] is not None:
            data["n_list"] = list(data["n_list"])
        return data


KNOWN_KEYS = tuple(RunSettings.model_fields)


def _first_message(error: ValidationError) -> str:
    first = error.errors()[0]
    return str(first.get("msg", error))


def parse_config_text(text: str) -> dict[str, object]:
    """
    Parse 'key = value' lines; '#' starts a comment, blank lines are ignored

    Args:
        text: File contents

    Returns:
        Raw values keyed by name (lists split on commas)

    Raises:
        ConfigError: Malformed line or unknown key, naming the key
    """
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key '{key}'", key=key)
        if key in _LIST_KEYS:
            values[key] = [item.strip() for item in value.split(",") if item.strip()]
        elif key in _BOOL_KEYS:
            values[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            values[key] = value
    return values


def load_config_file(path: str | None) -> dict[str, object]:
    """Read and parse a config file; no path means no file values"""
    if path is None:
        return {}
    try:
        with open(path) as f:
            return parse_config_text(f.read())
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e


def build_settings(file_values: dict[str, object], overrides: dict[str, object]) -> RunSettings:
    """Merge environment kernel settings, file values and command-line overrides (later wins)"""
    try:
        env_kernel = KernelConfig.from_env()
    except ValueError as e:
        raise ConfigError(f"invalid MATCHLAB_* kernel setting: {e}") from e
    merged: dict[str, object] = {key: getattr(env_kernel, key) for key in _KERNEL_KEYS}
    merged.update(file_values)
    for key, value in overrides.items():
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown config key '{key}'", key=key)
        if value is not None:
            merged[key] = value
    try:
        return RunSettings(**merged)
    except ValidationError as e:
        first = e.errors()[0]
        key = str(first["loc"][0]) if first.get("loc") else None
        raise ConfigError(f"invalid value for '{key}': {first['msg']}", key=key) from e


def trace_times(settings: RunSettings) -> list[float]:
    """t = 4^-k for k = trace_k_min..trace_k_max"""
    return [math.pow(4.0, -k) for k in range(settings.trace_k_min, settings.trace_k_max + 1)]
