"""
Torus heat kernel p_t and integrated kernel q_t = int_t^inf (p_s - 1) ds with derivatives

Conventions: p_t(x) = sum_k exp(-4 pi^2 |k|^2 t) exp(2 pi i k.x), equivalently the Gaussian image sum
(1/(4 pi t)) sum_m exp(-|x+m|^2/(4t)), so that -Laplacian q_t = p_t - 1 and q_t has mean zero.

Small times use image sums (p_t) or an Ewald split (q_t and derivatives): the part of the time
integral beyond t + sigma is a fast Fourier tail, the part over [t, t + sigma] is a short-range image
sum of exponential integrals.
"""

import math

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import exp1

from geometry.torus import nearest_image_array
from models.errors import DomainError, InvalidArgumentError

from .config import DEFAULT_KERNEL_CONFIG, KernelConfig
from .spectral import (
    FOUR_PI_SQ,
    TWO_PI,
    fourier_radius,
    gradient_weights,
    hessian_weights,
    image_radius,
    q_coefficients,
    separable_sum,
)


def check_time(t: float) -> float:
    """Validate a strictly positive heat time"""
    t = float(t)
    if not (math.isfinite(t) and t > 0.0):
        raise DomainError(f"heat time must be positive and finite, got {t}")
    return t


def as_displacements(x: ArrayLike) -> tuple[np.ndarray, bool]:
    """Coerce a 2-vector or an (N, 2) array to nearest-image displacements

    Returns:
        (array of shape (N, 2), True when the input was a single 2-vector)
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim not in (1, 2) or arr.shape[-1] != 2:
        raise InvalidArgumentError(f"expected a 2-vector or an (N, 2) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("displacements must be finite")
    return nearest_image_array(np.atleast_2d(arr), 0.0), arr.ndim == 1


def _offsets(M: int) -> list[tuple[int, int]]:
    return [(m1, m2) for m1 in range(-M, M + 1) for m2 in range(-M, M + 1)]


# --- heat kernel -------------------------------------------------------------------------------


def _theta_images(u: np.ndarray, t: float, M: int) -> np.ndarray:
    j = np.arange(-M, M + 1, dtype=float)
    shifted = u[:, None] + j[None, :]
    return np.exp(-shifted * shifted / (4.0 * t)).sum(axis=1)


def _theta_fourier(u: np.ndarray, t: float, K: int) -> np.ndarray:
    k = np.arange(1, K + 1, dtype=float)
    weights = np.exp(-FOUR_PI_SQ * k * k * t)
    return 1.0 + 2.0 * np.cos(TWO_PI * np.outer(u, k)) @ weights


def heat_kernel_images(t: float, x: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG):
    """p_t by the Gaussian image sum (separable in the two coordinates)"""
    t = check_time(t)
    pts, scalar = as_displacements(x)
    M = image_radius(t, cfg.target_accuracy / 4.0, cfg.max_modes, 0)
    values = _theta_images(pts[:, 0], t, M) * _theta_images(pts[:, 1], t, M) / (4.0 * math.pi * t)
    return float(values[0]) if scalar else values


def heat_kernel_fourier(t: float, x: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG):
    """p_t by the Fourier theta series (separable in the two coordinates)"""
    t = check_time(t)
    pts, scalar = as_displacements(x)
    K = fourier_radius(t, cfg.target_accuracy / 4.0, cfg.max_modes, 0)
    values = _theta_fourier(pts[:, 0], t, K) * _theta_fourier(pts[:, 1], t, K)
    return float(values[0]) if scalar else values


def heat_kernel(t: float, x: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG):
    """Heat kernel p_t(x) within cfg.target_accuracy

    Args:
        t: Heat time, t > 0
        x: Displacement (2-vector) or batch of displacements (N, 2)
        cfg: Kernel settings; images below cfg.crossover_time, Fourier above

    Returns:
        float for a single displacement, array of shape (N,) for a batch
    """
    if check_time(t) < cfg.crossover_time:
        return heat_kernel_images(t, x, cfg)
    return heat_kernel_fourier(t, x, cfg)


# --- integrated kernel q_t -----------------------------------------------------------------------


def _h_series(s: np.ndarray, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    h = np.zeros_like(s)
    dh = np.zeros_like(s)
    fact = 1.0
    for k in range(1, 12):
        fact *= k
        ck = ((-a) ** k - (-b) ** k) / fact
        h += ck * s ** (k - 1)
        if k >= 2:
            dh += ck * (k - 1) * s ** (k - 2)
    return h, dh


def _h_and_dh(s: np.ndarray, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """h(s) = (exp(-a s) - exp(-b s)) / s and its derivative, stable at s = 0"""
    h = np.empty_like(s)
    dh = np.empty_like(s)
    small = a * s < 0.05
    if np.any(small):
        h[small], dh[small] = _h_series(s[small], a, b)
    big = ~small
    if np.any(big):
        sb = s[big]
        ea = np.exp(-a * sb)
        eb = np.exp(-b * sb)
        hb = (ea - eb) / sb
        h[big] = hb
        dh[big] = (-a * ea + b * eb - hb) / sb
    return h, dh


def _ewald_images(t: float, tau: float, pts: np.ndarray, cfg: KernelConfig, order: int):
    """Image part of int_t^tau p_s ds (order 0), its gradient (1) or Hessian entries (2)"""
    M = image_radius(tau, cfg.target_accuracy / 4.0, cfg.max_modes, order)
    a = 1.0 / (4.0 * t)
    b = 1.0 / (4.0 * tau)
    n = pts.shape[0]
    if order == 0:
        out = np.zeros(n)
    elif order == 1:
        out = np.zeros((n, 2))
    else:
        out = np.zeros((n, 3))
    for m1, m2 in _offsets(M):
        y1 = pts[:, 0] + m1
        y2 = pts[:, 1] + m2
        s = y1 * y1 + y2 * y2
        if order == 0:
            term = np.full(n, math.log(tau / t))
            nz = s > 0.0
            term[nz] = exp1(b * s[nz]) - exp1(a * s[nz])
            out += term
        elif order == 1:
            h, _ = _h_and_dh(s, a, b)
            out[:, 0] += y1 * h
            out[:, 1] += y2 * h
        else:
            h, dh = _h_and_dh(s, a, b)
            out[:, 0] += h + 2.0 * y1 * y1 * dh
            out[:, 1] += 2.0 * y1 * y2 * dh
            out[:, 2] += h + 2.0 * y2 * y2 * dh
    if order == 0:
        return out / (4.0 * math.pi)
    return out / TWO_PI


def fourier_terms(tau: float, pts: np.ndarray, cfg: KernelConfig, order: int, radius: int | None):
    K = radius or fourier_radius(tau, cfg.target_accuracy / 4.0, cfg.max_modes, order)
    coeffs = q_coefficients(tau, K)
    if order == 0:
        return separable_sum(coeffs, pts)
    if order == 1:
        w1, w2 = gradient_weights(coeffs)
        return np.column_stack([separable_sum(w1, pts), separable_sum(w2, pts)])
    w11, w12, w22 = hessian_weights(coeffs)
    return np.column_stack(
        [separable_sum(w11, pts), separable_sum(w12, pts), separable_sum(w22, pts)]
    )


def _q_family(t: float, pts: np.ndarray, cfg: KernelConfig, order: int) -> np.ndarray:
    if t >= cfg.crossover_time:
        return fourier_terms(t, pts, cfg, order, None)
    tau = t + cfg.ewald_sigma
    out = fourier_terms(tau, pts, cfg, order, None) + _ewald_images(t, tau, pts, cfg, order)
    if order == 0:
        out = out - cfg.ewald_sigma
    return out


def q_kernel(t: float, x: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG):
    """q_t(x) = sum_{k != 0} exp(-4 pi^2 |k|^2 t) / (4 pi^2 |k|^2) e^{2 pi i k.x}"""
    t = check_time(t)
    pts, scalar = as_displacements(x)
    values = _q_family(t, pts, cfg, 0)
    return float(values[0]) if scalar else values


def q_kernel_fourier(
    t: float, x: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG, radius: int | None = None
):
    """q_t by the plain Fourier series, optionally at a prescribed truncation radius"""
    t = check_time(t)
    pts, scalar = as_displacements(x)
    values = fourier_terms(t, pts, cfg, 0, radius)
    return float(values[0]) if scalar else values


def q_zero_at_origin(t: float, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG) -> float:
    """q_t(0), which behaves like |log t| / (4 pi) + O(t) as t -> 0"""
    return q_kernel(t, (0.0, 0.0), cfg)


def grad_q(t: float, x: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG):
    """Gradient of q_t; shape (2,) for one displacement, (N, 2) for a batch"""
    t = check_time(t)
    pts, scalar = as_displacements(x)
    values = _q_family(t, pts, cfg, 1)
    return values[0] if scalar else values


def hess_q(t: float, x: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG):
    """Hessian of q_t; shape (2, 2) for one displacement, (N, 2, 2) for a batch

    The trace equals -(p_t - 1) since -Laplacian q_t = p_t - 1.
    """
    t = check_time(t)
    pts, scalar = as_displacements(x)
    entries = _q_family(t, pts, cfg, 2)
    mats = np.empty((pts.shape[0], 2, 2))
    mats[:, 0, 0] = entries[:, 0]
    mats[:, 0, 1] = entries[:, 1]
    mats[:, 1, 0] = entries[:, 1]
    mats[:, 1, 1] = entries[:, 2]
    return mats[0] if scalar else mats
