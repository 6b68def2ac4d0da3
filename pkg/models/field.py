"""
Empirical measure of a uniform sample and the linearization field f_{n,t}

f_{n,t}(y) = (1/n) sum_i q_t(y - X_i) is the mean-zero solution of -Laplacian f = p_t * (mu_n - 1).
Direct summation over the sample is the reference path; Fourier evaluation through the structure
factor mu_hat_k = (1/n) sum_i exp(-2 pi i k.X_i) is used for bulk and grid evaluations.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from geometry.torus import TorusPoint, grid_nodes, nearest_image_array
from kernels.config import DEFAULT_KERNEL_CONFIG, KernelConfig
from kernels.green import (
    check_radius,
    far_from_lattice,
    green_gradient,
    mollified_gradient_weights,
    mollified_green_gradient,
)
from kernels.heat import check_time, grad_q, hess_q, q_kernel, q_zero_at_origin
from kernels.spectral import (
    fourier_radius,
    gradient_weights,
    grid_size_for,
    grid_synthesis,
    hessian_weights,
    q_coefficients,
    separable_sum,
    structure_factor,
)

from .errors import InvalidArgumentError


# Sample size up to which double sums are evaluated pair by pair
PAIRS_THRESHOLD = 64
# Kernel evaluations per block in direct sums
_PAIR_BLOCK = 200_000

_METHODS = ("auto", "pairs", "direct", "spectral")


@dataclass(frozen=True, eq=False)
class PointSample:
    """i.i.d. uniform points on the torus, reproducible from (seed, replica_index)"""

    points: np.ndarray  # shape (n, 2), read-only
    seed: int
    replica_index: int = 0
    _spectra: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    def torus_points(self) -> list[TorusPoint]:
        return [TorusPoint(float(a), float(b)) for a, b in self.points]

    def spectrum(self, K: int) -> np.ndarray:
        """Structure factor on the (2K+1)^2 mode block, cached per K"""
        if K not in self._spectra:
            self._spectra[K] = structure_factor(self.points, K)
        return self._spectra[K]


def sample_stream(seed: int, replica_index: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, replica_index)"""
    if seed < 0 or replica_index < 0:
        raise InvalidArgumentError(
            f"seed and replica index must be unsigned, got ({seed}, {replica_index})"
        )
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, replica_index])))


def sample_uniform(n: int, seed: int, replica_index: int = 0) -> PointSample:
    """
    Draw n i.i.d. uniform points

    Args:
        n: Sample size, n >= 1
        seed: Unsigned 64-bit base seed
        replica_index: Replica counter, selects an independent stream

    Returns:
        PointSample that regenerates bit-for-bit from the same arguments
    """
    if n < 1:
        raise InvalidArgumentError(f"sample size must be at least 1, got {n}")
    points = sample_stream(seed, replica_index).random((n, 2))
    points.flags.writeable = False
    return PointSample(points=points, seed=seed, replica_index=replica_index)


def sample_from_points(points: ArrayLike, seed: int = 0, replica_index: int = 0) -> PointSample:
    """Wrap explicit coordinates (already in [0, 1)) as a sample"""
    arr = np.array(points, dtype=float).reshape(-1, 2)
    if arr.shape[0] < 1:
        raise InvalidArgumentError("a sample needs at least one point")
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise InvalidArgumentError("sample coordinates must lie in [0, 1)")
    arr.flags.writeable = False
    return PointSample(points=arr, seed=seed, replica_index=replica_index)


def _query_points(y: ArrayLike) -> tuple[np.ndarray, bool]:
    arr = np.asarray(y, dtype=float)
    if arr.ndim not in (1, 2) or arr.shape[-1] != 2:
        raise InvalidArgumentError(f"expected a 2-vector or an (N, 2) array, got shape {arr.shape}")
    return np.atleast_2d(arr), arr.ndim == 1


def _direct_mean(kernel, t: float, sample: PointSample, y: np.ndarray, cfg: KernelConfig):
    """(1/n) sum_i kernel(t, y - X_i) for every row of y"""
    n = sample.n
    block = max(1, _PAIR_BLOCK // n)
    parts = []
    for start in range(0, y.shape[0], block):
        ys = y[start : start + block]
        disp = nearest_image_array(ys[:, None, :], sample.points[None, :, :]).reshape(-1, 2)
        values = np.asarray(kernel(t, disp, cfg))
        parts.append(values.reshape((ys.shape[0], n) + values.shape[1:]).mean(axis=1))
    return np.concatenate(parts, axis=0)


def f_value(
    sample: PointSample, t: float, y: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG
):
    """f_{n,t}(y) = (1/n) sum_i q_t(y - X_i); float for one point, (N,) for a batch"""
    t = check_time(t)
    ys, scalar = _query_points(y)
    values = _direct_mean(q_kernel, t, sample, ys, cfg)
    return float(values[0]) if scalar else values


def grad_f(sample: PointSample, t: float, y: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG):
    """
    Gradient of f_{n,t} in y

    Args:
        sample: Point sample
        t: Heat time, t > 0
        y: Query point (2-vector) or batch (N, 2)
        cfg: Kernel settings

    Returns:
        Array of shape (2,) or (N, 2)
    """
    t = check_time(t)
    ys, scalar = _query_points(y)
    values = _direct_mean(grad_q, t, sample, ys, cfg)
    return values[0] if scalar else values


def hess_f(sample: PointSample, t: float, y: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG):
    """Hessian of f_{n,t}; shape (2, 2) or (N, 2, 2)"""
    t = check_time(t)
    ys, scalar = _query_points(y)
    values = _direct_mean(hess_q, t, sample, ys, cfg)
    return values[0] if scalar else values


# --- Fourier-side evaluation -------------------------------------------------------------------


def field_coefficients(
    sample: PointSample, t: float, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG, order: int = 1
) -> np.ndarray:
    """Fourier coefficients mu_hat_k * c_k(t) of f_{n,t}, truncated for derivatives up to `order`"""
    t = check_time(t)
    K = fourier_radius(t, cfg.target_accuracy / 4.0, cfg.max_modes, order)
    return q_coefficients(t, K) * sample.spectrum(K)


def grad_f_spectral(
    sample: PointSample, t: float, y: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG
):
    """grad f_{n,t} from its Fourier series at arbitrary points"""
    ys, scalar = _query_points(y)
    w1, w2 = gradient_weights(field_coefficients(sample, t, cfg))
    values = np.column_stack([separable_sum(w1, ys), separable_sum(w2, ys)])
    return values[0] if scalar else values


def gradient_on_grid(
    sample: PointSample,
    t: float,
    m: int,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    offset: float = 0.0,
) -> np.ndarray:
    """grad f_{n,t} on the m x m grid ((j1 + offset)/m, (j2 + offset)/m), row-major (m^2, 2)"""
    w1, w2 = gradient_weights(field_coefficients(sample, t, cfg))
    g1 = grid_synthesis(w1, m, offset)
    g2 = grid_synthesis(w2, m, offset)
    return np.column_stack([g1.ravel(), g2.ravel()])


def _check_method(method: str) -> str:
    if method not in _METHODS:
        raise InvalidArgumentError(f"method must be one of {_METHODS}, got {method!r}")
    return method


def _pair_mean(sample: PointSample, t: float, cfg: KernelConfig) -> float:
    """(1/n^2) sum_{i,j} q_t(X_i - X_j)"""
    return float(np.mean(_direct_mean(q_kernel, t, sample, sample.points, cfg)))


def _parseval(sample: PointSample, tau: float, cfg: KernelConfig) -> float:
    """sum_k |mu_hat_k|^2 exp(-4 pi^2 |k|^2 tau) / (4 pi^2 |k|^2)"""
    K = fourier_radius(tau, cfg.target_accuracy / 4.0, cfg.max_modes, 0)
    spectrum = sample.spectrum(K)
    power = spectrum.real**2 + spectrum.imag**2
    return float(np.sum(power * q_coefficients(tau, K)))


def dirichlet_energy(
    sample: PointSample, t: float, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG, method: str = "auto"
) -> float:
    """
    int |grad f_{n,t}|^2 = (1/n^2) sum_{i,j} q_{2t}(X_i - X_j)

    Args:
        sample: Point sample
        t: Heat time, t > 0
        cfg: Kernel settings
        method: "pairs" for the double sum, "spectral" for Parseval, "auto" picks by sample size

    Returns:
        Nonnegative energy; its expectation over samples is q_{2t}(0) / n
    """
    t = check_time(t)
    method = _check_method(method)
    if method in ("pairs", "direct") or (method == "auto" and sample.n <= PAIRS_THRESHOLD):
        return max(0.0, _pair_mean(sample, 2.0 * t, cfg))
    return _parseval(sample, 2.0 * t, cfg)


def pairing_value(
    sample: PointSample, t: float, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG, method: str = "auto"
) -> float:
    """int f_{n,t} d(mu_n - 1) = (1/n^2) sum_{i,j} q_t(X_i - X_j), or dirichlet_energy at t/2"""
    t = check_time(t)
    method = _check_method(method)
    if method in ("pairs", "direct") or (method == "auto" and sample.n <= PAIRS_THRESHOLD):
        return _pair_mean(sample, t, cfg)
    return _parseval(sample, t, cfg)


def empirical_dirichlet_energy(
    sample: PointSample, t: float, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG, method: str = "auto"
) -> float:
    """int |grad f_{n,t}|^2 d mu_n = (1/n) sum_i |grad f_{n,t}(X_i)|^2"""
    method = _check_method(method)
    if method in ("pairs", "direct") or (method == "auto" and sample.n <= PAIRS_THRESHOLD):
        grads = grad_f(sample, t, sample.points, cfg)
    else:
        grads = grad_f_spectral(sample, t, sample.points, cfg)
    return float(np.mean(np.sum(grads * grads, axis=1)))


def hessian_resolution_floor(t: float) -> int:
    return int(math.ceil(4.0 / math.sqrt(t)))


def hessian_sup(
    sample: PointSample, t: float, grid_m: int, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG
) -> float:
    """
    Grid maximum of the spectral norm of the Hessian of f_{n,t}

    A lower bound of the true supremum; the gap shrinks as the pitch 1/grid_m falls below sqrt(t).

    Args:
        sample: Point sample
        t: Heat time, t > 0
        grid_m: Nodes per side, at least ceil(4 / sqrt(t))
        cfg: Kernel settings

    Returns:
        max over nodes j/grid_m of the largest |eigenvalue|
    """
    t = check_time(t)
    floor = hessian_resolution_floor(t)
    if grid_m < floor:
        raise InvalidArgumentError(
            f"grid_m must be at least ceil(4/sqrt(t)) = {floor} at t={t:.6g}, got {grid_m}"
        )
    w11, w12, w22 = hessian_weights(field_coefficients(sample, t, cfg, order=2))
    a = grid_synthesis(w11, grid_m)
    b = grid_synthesis(w12, grid_m)
    c = grid_synthesis(w22, grid_m)
    norms = np.abs(0.5 * (a + c)) + np.sqrt(0.25 * (a - c) ** 2 + b * b)
    return float(np.max(norms))


def change_time_fourth_moment(
    sample: PointSample,
    s: float,
    t: float,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    grid_m: int | None = None,
) -> float:
    """int |grad f_{n,s} - grad f_{n,t}|^4 by grid quadrature (exact when grid_m >= 4K + 1)"""
    s = check_time(s)
    t = check_time(t)
    if s == t:
        return 0.0
    tau = min(s, t)
    K = fourier_radius(tau, cfg.target_accuracy / 4.0, cfg.max_modes, 1)
    m = grid_m or grid_size_for(K, factor=2)
    coeffs = (q_coefficients(s, K) - q_coefficients(t, K)) * sample.spectrum(K)
    w1, w2 = gradient_weights(coeffs)
    g1 = grid_synthesis(w1, m)
    g2 = grid_synthesis(w2, m)
    return float(np.mean((g1 * g1 + g2 * g2) ** 2))


def expected_change_time_energy(
    s: float, t: float, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG
) -> float:
    """n E int |grad f_{n,s} - grad f_{n,t}|^2 = q_{2s}(0) + q_{2t}(0) - 2 q_{s+t}(0) for all n"""
    s = check_time(s)
    t = check_time(t)
    if s == t:
        return 0.0
    return (
        q_zero_at_origin(2.0 * s, cfg)
        + q_zero_at_origin(2.0 * t, cfg)
        - 2.0 * q_zero_at_origin(s + t, cfg)
    )


def mollified_field_gradient(
    sample: PointSample,
    r: float,
    y: ArrayLike,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    method: str = "auto",
):
    """
    grad phi^r_n(y) = (1/n) sum_i grad(eta_r * q_0)(y - X_i)

    The direct path uses quadrature only for sites within r of y; for the others the mollified
    gradient equals grad q_0 exactly (mean-value property of harmonic functions).

    Args:
        sample: Point sample
        r: Mollifier radius, 0 < r <= 1/4
        y: Query point (2-vector) or batch (N, 2)
        cfg: Kernel settings
        method: "direct" (default for "auto") or "spectral"

    Returns:
        Array of shape (2,) or (N, 2)
    """
    r = check_radius(r)
    method = _check_method(method)
    ys, scalar = _query_points(y)
    if method == "spectral":
        w1, w2 = mollified_gradient_weights(r, cfg)
        K = (w1.shape[0] - 1) // 2
        spectrum = sample.spectrum(K)
        values = np.column_stack(
            [separable_sum(w1 * spectrum, ys), separable_sum(w2 * spectrum, ys)]
        )
        return values[0] if scalar else values

    values = np.zeros_like(ys)
    for row, yi in enumerate(ys):
        disp = nearest_image_array(yi[None, :], sample.points)
        far = far_from_lattice(disp, r)
        total = np.zeros(2)
        if np.any(far):
            total += green_gradient(disp[far], cfg).sum(axis=0)
        if np.any(~far):
            total += mollified_green_gradient(r, disp[~far], cfg).sum(axis=0)
        values[row] = total / sample.n
    return values[0] if scalar else values


def field_on_nodes(sample: PointSample, t: float, m: int, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG):
    """f_{n,t} and grad f_{n,t} at the nodes j/m by direct summation"""
    nodes = grid_nodes(m)
    return f_value(sample, t, nodes, cfg), grad_f(sample, t, nodes, cfg)


def value_on_grid(
    sample: PointSample,
    t: float,
    m: int,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    offset: float = 0.0,
) -> np.ndarray:
    """f_{n,t} on the m x m grid ((j1 + offset)/m, (j2 + offset)/m), row-major (m^2,)"""
    return grid_synthesis(field_coefficients(sample, t, cfg), m, offset).ravel()


def field_at_sites(
    sample: PointSample, t: float, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG
) -> tuple[np.ndarray, np.ndarray]:
    """f_{n,t}(X_i) and grad f_{n,t}(X_i); direct sums for small samples, Fourier otherwise"""
    if sample.n <= PAIRS_THRESHOLD:
        return f_value(sample, t, sample.points, cfg), grad_f(sample, t, sample.points, cfg)
    coeffs = field_coefficients(sample, t, cfg)
    w1, w2 = gradient_weights(coeffs)
    pts = sample.points
    values = separable_sum(coeffs, pts)
    return values, np.column_stack([separable_sum(w1, pts), separable_sum(w2, pts)])
