"""
Deterministic kernel functionals: t * int |grad q_t|^4, sqrt(t) * sup over B_sqrt(t)(0) of |grad q_t|,
int |grad q_t - grad(eta_sqrt(t) * q_0)|^2
"""

import math

import numpy as np

from models.errors import AccuracyError, InvalidArgumentError
from models.types import KernelInequalityRow

from .config import DEFAULT_KERNEL_CONFIG, KernelConfig
from .green import mollifier_transform
from .heat import check_time, grad_q
from .spectral import (
    FOUR_PI_SQ,
    fourier_radius,
    gradient_weights,
    grid_size_for,
    grid_synthesis,
    q_coefficients,
)


DEFAULT_T_GRID = tuple(4.0**-k for k in range(4, 8))
MIN_T = 1e-5
MAX_T = 0.25
MAX_QUADRATURE_GRID = 4096

CSV_COLUMNS = ["t", "fourth_moment_scaled", "sup_scaled", "change_kernel_energy"]


def fourth_moment(t: float, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG) -> float:
    """int |grad q_t|^4 by the trapezoidal rule on a grid that is exact for the truncation"""
    t = check_time(t)
    K = fourier_radius(t, cfg.target_accuracy, cfg.max_modes, 1)
    m = grid_size_for(K, factor=2)
    if m > MAX_QUADRATURE_GRID:
        raise AccuracyError(
            f"fourth-moment quadrature at t={t:.3e} needs a {m}^2 grid "
            f"(limit {MAX_QUADRATURE_GRID}^2)",
            required=m,
            limit=MAX_QUADRATURE_GRID,
        )
    w1, w2 = gradient_weights(q_coefficients(t, K))
    g1 = grid_synthesis(w1, m)
    g2 = grid_synthesis(w2, m)
    return float(np.mean((g1 * g1 + g2 * g2) ** 2))


def ball_sup_gradient(
    t: float, radius: float, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG, rings: int = 64
) -> float:
    """max of |grad q_t| over a polar grid filling the ball B_radius(0)"""
    radii = radius * np.arange(1, rings + 1) / rings
    angles = 2.0 * math.pi * np.arange(32) / 32
    pts = np.array([(r * math.cos(a), r * math.sin(a)) for r in radii for a in angles])
    grads = grad_q(t, pts, cfg)
    return float(np.max(np.hypot(grads[:, 0], grads[:, 1])))


def change_kernel_energy(t: float, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG) -> float:
    """int |grad q_t - grad(eta_sqrt(t) * q_0)|^2 by Parseval

    Equals sum_{k != 0} (exp(-4 pi^2 |k|^2 t) - eta_hat(sqrt(t)|k|))^2 / (4 pi^2 |k|^2).
    """
    t = check_time(t)
    r = math.sqrt(t)
    K = int(math.ceil(cfg.mollifier_cutoff / r))
    if K > cfg.max_modes:
        raise AccuracyError(
            f"change-of-kernel sum at t={t:.3e} needs radius {K} > max_modes={cfg.max_modes}",
            required=K,
            limit=cfg.max_modes,
        )
    total = 0.0
    for k1 in range(0, K + 1):
        span = int(math.isqrt(max(0, K * K - k1 * k1)))
        k2 = np.arange(-span, span + 1, dtype=float)
        ksq = k1 * k1 + k2 * k2
        if k1 == 0:
            ksq = ksq[ksq > 0]
        diff = np.exp(-FOUR_PI_SQ * ksq * t) - mollifier_transform(r * np.sqrt(ksq), cfg)
        row = float(np.sum(diff * diff / (FOUR_PI_SQ * ksq)))
        total += row if k1 == 0 else 2.0 * row
    return total


def kernel_inequality_report(
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG, t_grid: tuple[float, ...] = DEFAULT_T_GRID
) -> list[KernelInequalityRow]:
    """Scaled kernel functionals over a grid of heat times

    Args:
        cfg: Kernel settings
        t_grid: Heat times inside [1e-5, 0.25]

    Returns:
        One KernelInequalityRow per heat time, in the order given; sup_scaled is taken over the
        ball of radius sqrt(t) about the origin
    """
    rows = []
    for t in t_grid:
        if not (MIN_T <= t <= MAX_T):
            raise InvalidArgumentError(f"report times must lie in [{MIN_T}, {MAX_T}], got {t}")
        root = math.sqrt(t)
        rows.append(
            KernelInequalityRow(
                t=float(t),
                fourth_moment_scaled=t * fourth_moment(t, cfg),
                sup_scaled=root * ball_sup_gradient(t, root, cfg),
                change_kernel_energy=change_kernel_energy(t, cfg),
            )
        )
    return rows


def column_ratio(rows: list[KernelInequalityRow], column: str) -> float:
    """max / min of one report column over the t-grid"""
    values = [getattr(row, column) for row in rows]
    return max(values) / min(values)
