"""
Integrals of an optimal pixel plan against the linearization field grad f_{n,t}
"""

import numpy as np
from numpy.polynomial.legendre import leggauss

from geometry.torus import nearest_image_array, pixel_centers
from kernels.config import DEFAULT_KERNEL_CONFIG, KernelConfig
from kernels.heat import check_time
from models.errors import InvalidArgumentError
from models.field import (
    PointSample,
    field_at_sites,
    grad_f_spectral,
    gradient_on_grid,
    value_on_grid,
)
from models.types import TransportIntegrals

from .semidiscrete import SemidiscreteSolution


DEFAULT_PATH_NODES = 8


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=1)


def transport_integrals(
    sol: SemidiscreteSolution,
    sample: PointSample,
    t: float,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    path_nodes: int = DEFAULT_PATH_NODES,
) -> TransportIntegrals:
    """
    Pixel-quadrature integrals of the plan T_n against grad f_{n,t}

    Every plan entry (pixel y, site X, mass w) contributes w times the integrand with the
    displacement d = X - y (nearest image).

    Args:
        sol: Solution for this sample
        sample: The sample that produced sol
        t: Heat time of the field, t > 0
        cfg: Kernel settings
        path_nodes: Gauss-Legendre nodes along each geodesic y + s d, 0 skips the path integrals

    Returns:
        TransportIntegrals; identity disp_sq_mean = nmap_err + dirichlet_quadrature + 2 quasi_orth
        holds term by term
    """
    t = check_time(t)
    if sample.n != sol.n:
        raise InvalidArgumentError(f"sample has {sample.n} points, solution has {sol.n} sites")
    if path_nodes < 0:
        raise InvalidArgumentError(f"path_nodes must be nonnegative, got {path_nodes}")
    m = sol.grid_m
    grad_grid = gradient_on_grid(sample, t, m, cfg, offset=0.5)
    value_grid = value_on_grid(sample, t, m, cfg, offset=0.5)
    site_values, site_grads = field_at_sites(sample, t, cfg)

    p, i, w = sol.plan_pixels, sol.plan_sites, sol.plan_mass
    y = pixel_centers(m)[p]
    disp = nearest_image_array(sol.sites[i], y)
    g_y = grad_grid[p]
    g_x = site_grads[i]
    residual_y = disp - g_y
    residual_x = disp - g_x

    extras = {}
    if path_nodes:
        nodes, weights = leggauss(path_nodes)
        energy = deviation = ftc = remainder = 0.0
        for s, ws in zip(0.5 * (nodes + 1.0), 0.5 * weights, strict=True):
            g = grad_f_spectral(sample, t, y + s * disp, cfg)
            energy += ws * float(w @ _dot(g, g))
            deviation += ws * float(w @ _dot(disp - g, disp - g))
            ftc += ws * float(w @ _dot(disp, g))
            remainder += ws * float(w @ _dot(disp, g_y - g))
        extras = {
            "path_energy": energy,
            "path_deviation": deviation,
            "path_ftc": ftc,
            "suboptimal_remainder": remainder,
        }

    return TransportIntegrals(
        disp_sq_mean=float(w @ _dot(disp, disp)),
        map_poisson_err=float(w @ _dot(residual_x, residual_x)),
        nmap_err=float(w @ _dot(residual_y, residual_y)),
        quasi_orth=float(w @ _dot(residual_y, g_y)),
        ftc_lhs=float(w @ (site_values[i] - value_grid[p])),
        dirichlet_quadrature=float(np.mean(_dot(grad_grid, grad_grid))),
        **extras,
    )
