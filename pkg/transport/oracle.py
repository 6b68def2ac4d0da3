"""
Exact transportation problem between n sites and m^2 pixels, for verification
"""

from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from geometry.torus import dist_sq_array, pixel_centers
from models.errors import ConvergenceError, InvalidArgumentError
from models.field import PointSample


MAX_ORACLE_SITES = 16
MAX_ORACLE_GRID = 32
CERT_TOL = 1e-9


class OracleResult(NamedTuple):
    """Optimal cost, majority site per pixel and the complementary-slackness verdict"""

    cost: float
    assignment: np.ndarray
    plan: np.ndarray  # (m^2, n) masses
    certified: bool


def exact_oracle(sample: PointSample, grid_m: int) -> OracleResult:
    """
    Solve the discrete transport problem with the dual simplex method

    Sources carry 1/n, pixel sinks 1/m^2. Optimality is certified by complementary slackness:
    reduced costs c - u_p - v_i are nonnegative and vanish wherever the plan is positive.

    Args:
        sample: Point sample with n <= 16
        grid_m: Pixels per side, at most 32

    Returns:
        OracleResult
    """
    sites = np.asarray(sample.points, dtype=float)
    n = sites.shape[0]
    m = int(grid_m)
    if n > MAX_ORACLE_SITES or m > MAX_ORACLE_GRID or m < 1:
        raise InvalidArgumentError(
            f"oracle limited to n <= {MAX_ORACLE_SITES} and grid_m <= {MAX_ORACLE_GRID}, "
            f"got n={n}, grid_m={m}"
        )
    pixels = m * m
    centers = pixel_centers(m)
    costs = dist_sq_array(centers[:, None, :], sites[None, :, :])  # (pixels, n)

    # variable (p, i) at column p * n + i, masses in pixel units
    cols = np.arange(pixels * n)
    rows_pixel = cols // n
    rows_site = pixels + cols % n
    A = sparse.csr_matrix(
        (np.ones(2 * cols.size), (np.concatenate([rows_pixel, rows_site]), np.tile(cols, 2))),
        shape=(pixels + n, pixels * n),
    )
    b = np.concatenate([np.ones(pixels), np.full(n, pixels / n)])
    res = linprog(
        costs.ravel(),
        A_eq=A,
        b_eq=b,
        bounds=(0, None),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise ConvergenceError(f"transportation simplex failed: {res.message}")

    x = np.asarray(res.x).reshape(pixels, n)
    marginals = np.asarray(res.eqlin.marginals)
    u = marginals[:pixels]
    v = marginals[pixels:]
    reduced = costs - u[:, None] - v[None, :]
    certified = bool(
        np.all(reduced >= -CERT_TOL) and np.all(np.abs(reduced[x > 1e-12]) <= CERT_TOL)
    )
    plan = x / pixels
    cost = float(np.sum(plan * costs))
    return OracleResult(cost=cost, assignment=np.argmax(x, axis=1), plan=plan, certified=certified)
