"""
Torus Green-function gradient and its mollified version

grad q_0 is evaluated with an Ewald split at time sigma. The mollifier is the normalized bump
c exp(-1/(1 - |x|^2)) on the unit ball; eta_r = r^-2 eta(./r).
"""

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import ArrayLike
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.special import j0

from models.errors import AccuracyError, DomainError, InvalidArgumentError

from .config import DEFAULT_KERNEL_CONFIG, KernelConfig
from .heat import as_displacements, fourier_terms
from .spectral import TWO_PI, gradient_weights, image_radius, mode_grid, separable_sum


MAX_MOLLIFIER_RADIUS = 0.25

# Nodes of the radial rule used to tabulate the mollifier transform
_TRANSFORM_NODES = 512
_TRANSFORM_TABLE = 4097


def _green_images(pts: np.ndarray, sigma: float, cfg: KernelConfig) -> np.ndarray:
    M = image_radius(sigma, cfg.target_accuracy / 4.0, cfg.max_modes, 1)
    out = np.zeros_like(pts)
    for m1 in range(-M, M + 1):
        for m2 in range(-M, M + 1):
            y1 = pts[:, 0] + m1
            y2 = pts[:, 1] + m2
            s = y1 * y1 + y2 * y2
            factor = np.exp(-s / (4.0 * sigma)) / s
            out[:, 0] -= y1 * factor
            out[:, 1] -= y2 * factor
    return out / TWO_PI


def green_gradient(x: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG):
    """Gradient of the torus Green function q_0, singular like -x / (2 pi |x|^2) at the origin

    Args:
        x: Nonzero displacement (2-vector) or batch (N, 2)
        cfg: Kernel settings; cfg.ewald_sigma is the splitting time

    Returns:
        Array of shape (2,) or (N, 2)
    """
    pts, scalar = as_displacements(x)
    if np.any(np.all(pts == 0.0, axis=1)):
        raise DomainError("the Green function gradient is singular at the origin")
    sigma = cfg.ewald_sigma
    values = fourier_terms(sigma, pts, cfg, 1, None) + _green_images(pts, sigma, cfg)
    return values[0] if scalar else values


@lru_cache(maxsize=1)
def mollifier_normalization() -> float:
    """Integral of exp(-1/(1 - |x|^2)) over the unit disc"""

    def radial(rho: float) -> float:
        if rho >= 1.0:
            return 0.0
        return math.exp(-1.0 / (1.0 - rho * rho)) * rho

    value, _ = quad(radial, 0.0, 1.0, epsabs=1e-16, epsrel=1e-13, limit=200)
    return TWO_PI * value


def _bump(rho_sq: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho_sq)
    inside = rho_sq < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - rho_sq[inside]))
    return out


def mollifier(x: ArrayLike, r: float = 1.0) -> np.ndarray:
    """eta_r at the rows of x (plain Euclidean coordinates, no wrapping)"""
    arr = np.atleast_2d(np.asarray(x, dtype=float))
    rho_sq = np.sum(arr * arr, axis=1) / (r * r)
    return _bump(rho_sq) / (mollifier_normalization() * r * r)


@lru_cache(maxsize=8)
def _transform_spline(cutoff: float) -> CubicSpline:
    nodes, weights = leggauss(_TRANSFORM_NODES)
    rho = 0.5 * (nodes + 1.0)
    w = 0.5 * weights * _bump(rho * rho) * rho
    u = np.linspace(0.0, cutoff, _TRANSFORM_TABLE)
    table = TWO_PI * (j0(TWO_PI * np.outer(u, rho)) @ w) / mollifier_normalization()
    return CubicSpline(u, table)


def mollifier_transform(u: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG) -> np.ndarray:
    """Radial Fourier transform eta_hat(|xi|) of the unit mollifier, zero beyond the cutoff"""
    u = np.abs(np.asarray(u, dtype=float))
    spline = _transform_spline(cfg.mollifier_cutoff)
    return np.where(u <= cfg.mollifier_cutoff, spline(np.minimum(u, cfg.mollifier_cutoff)), 0.0)


def check_radius(r: float) -> float:
    r = float(r)
    if not (0.0 < r <= MAX_MOLLIFIER_RADIUS):
        raise InvalidArgumentError(
            f"mollifier radius must lie in (0, {MAX_MOLLIFIER_RADIUS}], got {r}"
        )
    return r


def _polar_quadrature(r: float, z: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """int eta_r(y) grad q_0(z - y) dy in polar coordinates centred at z"""
    rz = math.hypot(z[0], z[1])
    n_theta = cfg.angular_nodes
    if rz < r:
        theta = TWO_PI * np.arange(n_theta) / n_theta
        w_theta = np.full(n_theta, TWO_PI / n_theta)
    else:
        half = math.asin(min(1.0, r / rz))
        center = math.atan2(z[1], z[0])
        nodes, weights = leggauss(n_theta)
        theta = center + half * nodes
        w_theta = half * weights

    e = np.column_stack([np.cos(theta), np.sin(theta)])
    p = e @ z
    disc = p * p - rz * rz + r * r
    keep = disc > 0.0
    e, p, disc, w_theta = e[keep], p[keep], disc[keep], w_theta[keep]
    root = np.sqrt(disc)
    lo = np.maximum(0.0, p - root)
    hi = p + root

    nodes, weights = leggauss(cfg.radial_nodes)
    half_len = 0.5 * (hi - lo)
    rho = lo[:, None] + half_len[:, None] * (nodes[None, :] + 1.0)
    w = w_theta[:, None] * half_len[:, None] * weights[None, :]

    ray = rho[:, :, None] * e[:, None, :]
    y = z[None, None, :] - ray
    eta = mollifier(y.reshape(-1, 2), r).reshape(rho.shape)
    grads = green_gradient(ray.reshape(-1, 2), cfg).reshape(rho.shape + (2,))
    weight = (w * eta * rho)[:, :, None]
    return np.sum(weight * grads, axis=(0, 1))


def mollified_green_gradient(r: float, z: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG):
    """grad (eta_r * q_0)(z) = int eta_r(y) grad q_0(z - y) dy by polar quadrature over B_r

    Polar coordinates are centred at the singularity y = z so the 1/|.| blow-up of grad q_0 is
    cancelled by the Jacobian.

    Args:
        r: Mollifier radius, 0 < r <= 1/4
        z: Displacement (2-vector) or batch (N, 2)
        cfg: Kernel settings (radial_nodes, angular_nodes control the rule)

    Returns:
        Array of shape (2,) or (N, 2)
    """
    r = check_radius(r)
    pts, scalar = as_displacements(z)
    out = np.zeros_like(pts)
    for i, zi in enumerate(pts):
        if zi[0] == 0.0 and zi[1] == 0.0:
            continue
        out[i] = _polar_quadrature(r, zi, cfg)
    return out[0] if scalar else out


def mollified_green_gradient_spectral(
    r: float, z: ArrayLike, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG
):
    """Fourier form: sum_k 2 pi i k eta_hat(r|k|) / (4 pi^2 |k|^2) e^{2 pi i k.z}"""
    r = check_radius(r)
    pts, scalar = as_displacements(z)
    w1, w2 = mollified_gradient_weights(r, cfg)
    values = np.column_stack([separable_sum(w1, pts), separable_sum(w2, pts)])
    return values[0] if scalar else values


def mollified_gradient_weights(
    r: float, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG
) -> tuple[np.ndarray, np.ndarray]:
    """Fourier weights of grad (eta_r * q_0) on the mode block |k|_inf <= cutoff / r"""
    K = int(math.ceil(cfg.mollifier_cutoff / r))
    if K > cfg.max_modes:
        raise AccuracyError(
            f"mollified series at r={r:.3e} needs radius {K} > max_modes={cfg.max_modes}",
            required=K,
            limit=cfg.max_modes,
        )
    k1, k2 = mode_grid(K)
    ksq = k1 * k1 + k2 * k2
    coeffs = np.zeros_like(ksq)
    nz = ksq > 0
    coeffs[nz] = mollifier_transform(r * np.sqrt(ksq[nz]), cfg) / (4.0 * math.pi**2 * ksq[nz])
    return gradient_weights(coeffs)


def far_from_lattice(z: np.ndarray, r: float) -> np.ndarray:
    """Rows of nearest-image displacements whose distance to the lattice is at least r

    There q_0 - |x|^2/4 is harmonic on B_r(z), so by the mean-value property
    grad (eta_r * q_0)(z) = grad q_0(z) exactly.
    """
    return np.sum(z * z, axis=1) >= r * r
