"""
Type definitions for records passed between matchlab packages using NamedTuple
Provides type safety and a dictionary form for CSV/JSONL export
"""

import math
from typing import Any, NamedTuple


CSV_FIELDS = ["quantity", "n", "t", "m", "R", "mean", "stderr", "seed", "runtime_seconds"]


class ScaleParams(NamedTuple):
    """Scales attached to a sample size: r_n = n^-1/2 and t_n = (ln n)^3 / n"""

    n: int
    r_n: float
    t_n: float

    @property
    def r_n_sq(self) -> float:
        return 1.0 / self.n

    @classmethod
    def for_n(cls, n: int) -> "ScaleParams":
        """Scales for sample size n (natural logarithm)"""
        return cls(n=n, r_n=n**-0.5, t_n=math.log(n) ** 3 / n)


class EstimatorRecord(NamedTuple):
    """One Monte Carlo estimate with its parameters; s is set only for two-time estimates"""

    quantity: str
    n: int
    t: float | None
    m: int | None
    R: int
    mean: float
    stderr: float
    seed: int
    runtime_seconds: float
    extras: dict[str, Any] | None = None
    replica_values: tuple[float, ...] | None = None
    s: float | None = None

    def to_csv_row(self) -> dict[str, Any]:
        """Row for the fixed CSV schema"""
        return {
            "quantity": self.quantity,
            "n": self.n,
            "t": "" if self.t is None else repr(float(self.t)),
            "m": "" if self.m is None else self.m,
            "R": self.R,
            "mean": repr(float(self.mean)),
            "stderr": repr(float(self.stderr)),
            "seed": self.seed,
            "runtime_seconds": f"{self.runtime_seconds:.3f}",
        }

    def to_dict(self, keep_replicas: bool = False) -> dict[str, Any]:
        """Convert to dictionary for JSONL export"""
        result = {
            "quantity": self.quantity,
            "n": self.n,
            "t": self.t,
            "m": self.m,
            "R": self.R,
            "mean": self.mean,
            "stderr": self.stderr,
            "seed": self.seed,
            "runtime_seconds": self.runtime_seconds,
        }
        if self.s is not None:
            result["s"] = self.s
        if self.extras is not None:
            result["extras"] = self.extras
        if keep_replicas and self.replica_values is not None:
            result["replica_values"] = list(self.replica_values)
        return result

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EstimatorRecord":
        """Create from a JSONL dictionary"""
        replicas = data.get("replica_values")
        return cls(
            quantity=data["quantity"],
            n=int(data["n"]),
            t=data.get("t"),
            m=data.get("m"),
            R=int(data["R"]),
            mean=float(data["mean"]),
            stderr=float(data["stderr"]),
            seed=int(data["seed"]),
            runtime_seconds=float(data.get("runtime_seconds", 0.0)),
            extras=data.get("extras"),
            replica_values=tuple(replicas) if replicas is not None else None,
            s=data.get("s"),
        )


class RateFit(NamedTuple):
    """Least-squares line through estimator means"""

    slope: float
    intercept: float
    residuals: tuple[float, ...]
    regressor: str = "ln_n"

    @property
    def residual_band(self) -> float:
        return max(self.residuals) - min(self.residuals) if self.residuals else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residuals": list(self.residuals),
            "regressor": self.regressor,
        }


class CheckResult(NamedTuple):
    """Outcome of one acceptance or self-check"""

    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": self.name,
            "value": repr(float(self.value)),
            "tolerance": repr(float(self.tolerance)),
            "passed": self.passed,
            "detail": self.detail,
        }


class KernelInequalityRow(NamedTuple):
    """Scaled kernel functionals at one heat time

    sup_scaled is sqrt(t) times the sup of |grad q_t| over the ball of radius sqrt(t) about 0.
    """

    t: float
    fourth_moment_scaled: float
    sup_scaled: float
    change_kernel_energy: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "t": repr(float(self.t)),
            "fourth_moment_scaled": repr(float(self.fourth_moment_scaled)),
            "sup_scaled": repr(float(self.sup_scaled)),
            "change_kernel_energy": repr(float(self.change_kernel_energy)),
        }


class TransportIntegrals(NamedTuple):
    """Pixel-quadrature integrals of an optimal plan against the linearization field"""

    disp_sq_mean: float
    map_poisson_err: float
    nmap_err: float
    quasi_orth: float
    ftc_lhs: float
    dirichlet_quadrature: float
    path_energy: float | None = None
    path_deviation: float | None = None
    path_ftc: float | None = None
    suboptimal_remainder: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {key: value for key, value in self._asdict().items() if value is not None}
