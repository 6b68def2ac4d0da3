"""
Fourier-side helpers: truncation radii, separable mode sums, grid synthesis, structure factors
"""

import math
from functools import lru_cache

import numpy as np

from models.errors import AccuracyError


TWO_PI = 2.0 * math.pi
FOUR_PI_SQ = 4.0 * math.pi**2

# Extra shells summed when bounding a series tail
_TAIL_SHELLS = 400
# Complex entries per block in separable sums
_BLOCK_ENTRIES = 2_000_000


def _chunk_rows(K: int) -> int:
    return max(256, _BLOCK_ENTRIES // (2 * K + 1))


@lru_cache(maxsize=512)
def fourier_radius(tau: float, accuracy: float, max_modes: int, order: int = 0) -> int:
    """Smallest K such that the Fourier modes with |k|_inf > K of a time-tau kernel are negligible

    The bound sums 8j (2 pi j)^order exp(-4 pi^2 j^2 tau) over the shells j > K, which dominates the
    tail of p_tau, q_tau and their first `order` derivatives.
    """
    j = np.arange(1, max_modes + _TAIL_SHELLS + 1, dtype=float)
    terms = 8.0 * j * (TWO_PI * j) ** order * np.exp(-FOUR_PI_SQ * j * j * tau)
    tails = np.cumsum(terms[::-1])[::-1]  # tails[K] = sum over shells j > K
    ok = np.nonzero(tails <= accuracy)[0]
    if ok.size == 0 or ok[0] > max_modes:
        required = int(ok[0]) if ok.size else max_modes + _TAIL_SHELLS
        raise AccuracyError(
            f"Fourier series at time {tau:.3e} needs radius {required} > max_modes={max_modes} "
            f"(deficit {required - max_modes})",
            required=required,
            limit=max_modes,
        )
    return max(1, int(ok[0]))


@lru_cache(maxsize=512)
def image_radius(tau: float, accuracy: float, max_modes: int, order: int = 0) -> int:
    """Smallest M such that Gaussian images with |m|_inf > M of a time-tau kernel are negligible

    Displacements are nearest-image, so every image in shell j > M sits at distance >= j - 1/2.
    """
    j = np.arange(1, max_modes + _TAIL_SHELLS + 1, dtype=float)
    r = j - 0.5
    prefactor = (1.0 + (j + 1.0) / (2.0 * tau)) ** order / (4.0 * math.pi * tau)
    terms = 8.0 * j * prefactor * np.exp(-r * r / (4.0 * tau))
    tails = np.cumsum(terms[::-1])[::-1]
    ok = np.nonzero(tails <= accuracy)[0]
    if ok.size == 0 or ok[0] > max_modes:
        required = int(ok[0]) if ok.size else max_modes + _TAIL_SHELLS
        raise AccuracyError(
            f"image sum at time {tau:.3e} needs radius {required} > max_modes={max_modes} "
            f"(deficit {required - max_modes})",
            required=required,
            limit=max_modes,
        )
    return max(1, int(ok[0]))


def wavenumbers(K: int) -> np.ndarray:
    return np.arange(-K, K + 1, dtype=float)


def mode_grid(K: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer wavevector components (k1, k2) on the (2K+1)^2 block, indexing='ij'"""
    k = wavenumbers(K)
    return np.meshgrid(k, k, indexing="ij")


def q_coefficients(tau: float, K: int) -> np.ndarray:
    """Fourier coefficients exp(-4 pi^2 |k|^2 tau) / (4 pi^2 |k|^2) of q_tau, zero at k = 0"""
    k1, k2 = mode_grid(K)
    ksq = k1 * k1 + k2 * k2
    out = np.zeros_like(ksq)
    nz = ksq > 0
    out[nz] = np.exp(-FOUR_PI_SQ * ksq[nz] * tau) / (FOUR_PI_SQ * ksq[nz])
    return out


def gradient_weights(coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of the two partial derivatives of a real even mode series"""
    K = (coeffs.shape[0] - 1) // 2
    k1, k2 = mode_grid(K)
    return 1j * TWO_PI * k1 * coeffs, 1j * TWO_PI * k2 * coeffs


def hessian_weights(coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficients of d11, d12, d22 of a mode series"""
    K = (coeffs.shape[0] - 1) // 2
    k1, k2 = mode_grid(K)
    return (
        -FOUR_PI_SQ * k1 * k1 * coeffs,
        -FOUR_PI_SQ * k1 * k2 * coeffs,
        -FOUR_PI_SQ * k2 * k2 * coeffs,
    )


def _phases(coord: np.ndarray, K: int, sign: float = 1.0) -> np.ndarray:
    return np.exp(sign * 1j * TWO_PI * np.outer(coord, wavenumbers(K)))


def separable_sum(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Re sum_k w_k exp(2 pi i k.x) at each row of x, shape (N, 2)"""
    K = (weights.shape[0] - 1) // 2
    chunk = _chunk_rows(K)
    out = np.empty(x.shape[0])
    for start in range(0, x.shape[0], chunk):
        block = x[start : start + chunk]
        e1 = _phases(block[:, 0], K)
        e2 = _phases(block[:, 1], K)
        out[start : start + chunk] = np.real(np.sum((e1 @ weights) * e2, axis=1))
    return out


def grid_synthesis(weights: np.ndarray, m: int, offset: float = 0.0) -> np.ndarray:
    """Re sum_k w_k exp(2 pi i k.y) on the grid y = ((j1 + offset)/m, (j2 + offset)/m)

    Returns an (m, m) array indexed (j1, j2). Uses an inverse FFT when the mode block fits in the
    grid without aliasing and separable matrix products otherwise.
    """
    K = (weights.shape[0] - 1) // 2
    if m >= 2 * K + 1:
        k = wavenumbers(K)
        shift = np.exp(1j * TWO_PI * offset * k / m)
        shifted = weights * np.outer(shift, shift)
        full = np.zeros((m, m), dtype=complex)
        idx = (np.arange(-K, K + 1) % m).astype(int)
        full[np.ix_(idx, idx)] = shifted
        return np.real(np.fft.ifft2(full)) * (m * m)
    coord = (np.arange(m, dtype=float) + offset) / m
    a = _phases(coord, K)
    return np.real(a @ weights @ a.T)


def structure_factor(points: np.ndarray, K: int) -> np.ndarray:
    """(1/n) sum_i exp(-2 pi i k.X_i) on the (2K+1)^2 mode block"""
    n = points.shape[0]
    chunk = _chunk_rows(K)
    acc = np.zeros((2 * K + 1, 2 * K + 1), dtype=complex)
    for start in range(0, n, chunk):
        block = points[start : start + chunk]
        b1 = _phases(block[:, 0], K, sign=-1.0)
        b2 = _phases(block[:, 1], K, sign=-1.0)
        acc += b1.T @ b2
    return acc / n


def grid_size_for(K: int, factor: int = 1, floor: int = 16) -> int:
    """Smallest power of two >= max(floor, factor*(2K)+1)"""
    need = max(floor, factor * 2 * K + 1)
    return 1 << (need - 1).bit_length()
