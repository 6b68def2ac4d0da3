"""
Truncation and quadrature settings for the torus kernels
"""

import math
import os

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator


class KernelConfig(BaseModel):
    """Immutable evaluation settings shared by every kernel call"""

    model_config = ConfigDict(frozen=True)

    target_accuracy: float = Field(default=1e-10, gt=0.0)
    crossover_time: float = Field(default=1.0 / (2.0 * math.pi), gt=0.0, lt=1.0)
    ewald_sigma: float = Field(default=1.0 / (4.0 * math.pi**2), gt=0.0, lt=1.0)
    max_modes: int = Field(default=4096, ge=1)
    radial_nodes: int = Field(default=64, ge=8)
    angular_nodes: int = Field(default=128, ge=8)
    mollifier_cutoff: float = Field(default=24.0, gt=0.0)

    @field_validator("target_accuracy")
    @classmethod
    def _accuracy_in_range(cls, value: float) -> float:
        if value > 1e-6:
            raise ValueError(f"target_accuracy must lie in (0, 1e-6], got {value}")
        return value

    def refined(self) -> "KernelConfig":
        """Copy with doubled quadrature resolution, used for self-convergence checks"""
        return self.model_copy(
            update={
                "radial_nodes": 2 * self.radial_nodes,
                "angular_nodes": 2 * self.angular_nodes,
            }
        )

    @classmethod
    def from_env(cls) -> "KernelConfig":
        """Build a config from MATCHLAB_* environment variables, falling back to defaults"""
        load_dotenv()
        defaults = cls()
        return cls(
            target_accuracy=float(
                os.getenv("MATCHLAB_TARGET_ACCURACY", str(defaults.target_accuracy))
            ),
            crossover_time=float(os.getenv("MATCHLAB_CROSSOVER_TIME", str(defaults.crossover_time))),
            ewald_sigma=float(os.getenv("MATCHLAB_EWALD_SIGMA", str(defaults.ewald_sigma))),
            max_modes=int(os.getenv("MATCHLAB_MAX_MODES", str(defaults.max_modes))),
        )


DEFAULT_KERNEL_CONFIG = KernelConfig()
