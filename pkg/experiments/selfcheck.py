"""
Internal oracles for the kernels and the transport solver

Each check compares two independent evaluations of the same quantity and returns a CheckResult;
nothing here prints, the recorder reports the outcome.
"""

import math

import numpy as np

from geometry.torus import grid_nodes
from kernels.config import DEFAULT_KERNEL_CONFIG, KernelConfig
from kernels.green import green_gradient, mollified_green_gradient
from kernels.heat import (
    grad_q,
    heat_kernel,
    heat_kernel_fourier,
    heat_kernel_images,
    hess_q,
    q_kernel,
)
from kernels.inequalities import DEFAULT_T_GRID, column_ratio, kernel_inequality_report
from models.field import pairing_value, sample_from_points, sample_stream, sample_uniform
from models.types import CheckResult
from transport.integrals import transport_integrals
from transport.oracle import exact_oracle
from transport.semidiscrete import default_grid_m, solve


FD_STEP = 1e-5
LATTICE_SITES = ((0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75))
INEQUALITY_COLUMNS = (
    ("fourth_moment_scaled", "fourth_moment_scaled", "t * int |grad q_t|^4"),
    ("sup_scaled", "sup_ball_sqrt_t_scaled", "sqrt(t) * sup over B_sqrt(t)(0) of |grad q_t|"),
    ("change_kernel_energy", "change_kernel_energy", "int |grad q_t - grad(eta_sqrt(t) * q_0)|^2"),
)


def _check(name: str, value: float, tolerance: float, detail: str = "") -> CheckResult:
    return CheckResult(name=name, value=float(value), tolerance=tolerance, passed=bool(value <= tolerance), detail=detail)


def _log_uniform(rng: np.random.Generator, low: float, high: float, size: int) -> np.ndarray:
    return np.exp(rng.uniform(math.log(low), math.log(high), size))


def representation_gap(seed: int, cfg: KernelConfig, count: int = 100) -> float:
    """max |Fourier p_t(x) - image-sum p_t(x)| over random t in [1e-4, 1] and x"""
    rng = sample_stream(seed, 1)
    times = _log_uniform(rng, 1e-4, 1.0, count)
    points = rng.uniform(-0.5, 0.5, (count, 2))
    return max(
        abs(heat_kernel_fourier(t, x, cfg) - heat_kernel_images(t, x, cfg))
        for t, x in zip(times, points, strict=True)
    )


def gradient_fd_gap(seed: int, cfg: KernelConfig, count: int = 50) -> float:
    """max componentwise |grad_q - central difference of q_kernel|"""
    rng = sample_stream(seed, 2)
    times = _log_uniform(rng, 1e-2, 1.0, count)
    points = rng.uniform(-0.5, 0.5, (count, 2))
    worst = 0.0
    for t, x in zip(times, points, strict=True):
        shifts = FD_STEP * np.eye(2)
        fd = (q_kernel(t, x + shifts, cfg) - q_kernel(t, x - shifts, cfg)) / (2.0 * FD_STEP)
        worst = max(worst, float(np.max(np.abs(grad_q(t, x, cfg) - fd))))
    return worst


def laplacian_gap(seed: int, cfg: KernelConfig, count: int = 50) -> float:
    """max |trace hess q_t(x) + p_t(x) - 1|"""
    rng = sample_stream(seed, 3)
    times = _log_uniform(rng, 1e-3, 1.0, count)
    points = rng.uniform(-0.5, 0.5, (count, 2))
    return max(
        abs(float(np.trace(hess_q(t, x, cfg))) + heat_kernel(t, x, cfg) - 1.0)
        for t, x in zip(times, points, strict=True)
    )


def kernel_self_checks(seed: int, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG) -> list[CheckResult]:
    """
    Cross-representation, finite-difference and identity checks of the kernel layer

    Args:
        seed: Seed of the random evaluation points
        cfg: Kernel settings under test

    Returns:
        One CheckResult per check, in a fixed order
    """
    checks = [
        _check("heat_kernel_representations", representation_gap(seed, cfg), 1e-10),
        _check("grad_q_finite_difference", gradient_fd_gap(seed, cfg), 1e-6),
        _check("laplacian_identity", laplacian_gap(seed, cfg), 1e-8),
    ]

    nodes = grid_nodes(64)
    checks.append(_check("heat_kernel_mass", abs(float(np.mean(heat_kernel(0.05, nodes, cfg))) - 1.0), 1e-8))
    checks.append(_check("q_kernel_mean_zero", abs(float(np.mean(q_kernel(0.02, nodes, cfg)))), 1e-8))
    grad_mean = np.mean(grad_q(0.02, nodes, cfg), axis=0)
    checks.append(_check("grad_q_mean_zero", float(np.max(np.abs(grad_mean))), 1e-8))

    x = np.array([0.3, 0.1])
    limit_gap = float(np.max(np.abs(grad_q(1e-7, x, cfg) - green_gradient(x, cfg))))
    checks.append(_check("green_gradient_limit", limit_gap, 1e-4))

    rng = sample_stream(seed, 4)
    radii = rng.uniform(1e-3, 0.05, 20)
    angles = rng.uniform(0.0, 2.0 * math.pi, 20)
    near = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    singular = -near / (2.0 * math.pi * radii[:, None] ** 2)
    constant = float(np.max(np.linalg.norm(green_gradient(near, cfg) - singular, axis=1) / radii))
    checks.append(_check("green_singularity_constant", constant, 1.0, "recorded C in |err| <= C|x|"))

    r = 0.1
    checks.append(
        _check("mollifier_origin", float(np.max(np.abs(mollified_green_gradient(r, np.zeros(2), cfg)))), 1e-12)
    )
    far = np.array([[0.35, 0.1], [-0.3, 0.32], [0.05, -0.45]])
    far_gap = np.linalg.norm(mollified_green_gradient(r, far, cfg) - green_gradient(far, cfg), axis=1)
    scaled = float(np.max(far_gap * np.sum(far * far, axis=1) / r))
    checks.append(_check("mollifier_far_field", scaled, 1.0, "recorded C in |err| <= C r/|z|^2"))
    z = np.array([0.07, -0.04])
    refine_gap = float(
        np.max(np.abs(mollified_green_gradient(r, z, cfg) - mollified_green_gradient(r, z, cfg.refined())))
    )
    checks.append(_check("mollifier_refinement", refine_gap, 1e-7))

    rows = kernel_inequality_report(cfg, DEFAULT_T_GRID)
    for column, label, detail in INEQUALITY_COLUMNS:
        checks.append(_check(f"kernel_inequality_{label}_ratio", column_ratio(rows, column), 10.0, detail))
    return checks


def solver_self_checks(seed: int, instances: int = 20) -> list[CheckResult]:
    """
    Compare the semi-discrete solver with the exact oracle and with analytic costs

    Args:
        seed: Seed of the random instances
        instances: Number of oracle comparisons (n <= 8, m = 16)

    Returns:
        CheckResults for the oracle gap, dual monotonicity, mass residual, the analytic costs and
        the pushforward identity
    """
    rng = sample_stream(seed, 5)
    cost_gap = 0.0
    dual_drop = 0.0
    residual_excess = 0.0
    for replica in range(instances):
        n = int(rng.integers(1, 9))
        sample = sample_uniform(n, seed, replica)
        sol = solve(sample, 16)
        cost_gap = max(cost_gap, abs(sol.cost - exact_oracle(sample, 16).cost))
        history = np.asarray(sol.dual_history)
        if history.size > 1:
            dual_drop = max(dual_drop, float(np.max(history[:-1] - history[1:])))
        residual_excess = max(residual_excess, sol.mass_residual - 1e-8 / n)
    checks = [
        _check("oracle_cost_gap", cost_gap, 1e-8),
        _check("dual_monotone", dual_drop, 1e-9),
        _check("mass_residual_excess", max(residual_excess, 0.0), 0.0),
    ]

    single = solve(sample_from_points([[0.0, 0.0]], seed), 256)
    checks.append(_check("single_point_cost", abs(single.cost - 1.0 / 6.0), 1e-4))
    coarse, fine = (
        abs(solve(sample_from_points([[0.0, 0.0]], seed), m).cost - 1.0 / 6.0) for m in (64, 128)
    )
    checks.append(
        _check("pixel_refinement_ratio", fine / coarse, 0.5, "single-point cost error, m=128 over m=64")
    )
    lattice = solve(sample_from_points(LATTICE_SITES, seed), 256)
    checks.append(_check("lattice_cost", abs(lattice.cost - 1.0 / 24.0), 1e-4))

    pushforward_gap = 0.0
    for replica in range(10):
        n = int(rng.integers(2, 65))
        sample = sample_uniform(n, seed + 1, replica)
        sol = solve(sample, default_grid_m(n))
        integrals = transport_integrals(sol, sample, 0.01, path_nodes=0)
        pushforward_gap = max(pushforward_gap, abs(integrals.ftc_lhs - pairing_value(sample, 0.01)))
    checks.append(_check("pushforward_identity", pushforward_gap, 1e-6))
    return checks
