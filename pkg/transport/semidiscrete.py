"""
Semi-discrete optimal transport between an empirical measure and the pixelized Lebesgue measure

The target is m^2 pixels of mass 1/m^2 located at their centers. The dual
Phi(psi) = (1/n) sum_i psi_i + sum_p (1/m^2) min_i (d(y_p, X_i)^2 - psi_i)
is maximized by damped Newton (or diagonally scaled) ascent with backtracking. Whole-pixel cells
carry masses in multiples of 1/m^2, so the remaining imbalance is removed exactly by a sparse
transportation LP over the pixels near cell boundaries, grown by column generation until the dual
certificate holds on every pixel.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.sparse.linalg import spsolve

from geometry.torus import Displacement, dist_sq_array, nearest_image_array, pixel_centers
from models.errors import ConvergenceError, InvalidArgumentError
from models.field import PointSample

from .power import power_argmin


MIN_GRID = 16
GRID_CAP = 1024
MIN_MASS_TOL = 1e-10
MAX_MASS_TOL = 1e-2

ARMIJO = 1e-4
MAX_BACKTRACKS = 30
# Ascent iterations without a better whole-pixel residual before the exact stage takes over
PATIENCE = 8
# Neighbourhood radii (in pixels) tried by the exact stage before falling back to the full problem
WINDOW_LAYERS = (1, 2, 4)
# Reduced-cost slack accepted by the optimality certificate
CERT_TOL = 1e-9
FULL_PROBLEM_LIMIT = 2_000_000

_HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass(frozen=True)
class DualWeights:
    """Kantorovich potentials on the sites, normalized to mean zero"""

    psi: np.ndarray

    @classmethod
    def centered(cls, psi: np.ndarray) -> "DualWeights":
        psi = np.asarray(psi, dtype=float)
        return cls(psi=psi - psi.mean())


@dataclass
class SemidiscreteSolution:
    """Optimal pixel plan, its potentials and the solver trajectory"""

    weights: DualWeights
    grid_m: int
    assignment: np.ndarray  # site index per pixel, row-major
    cell_masses: np.ndarray
    cost: float
    mass_residual: float
    sites: np.ndarray
    plan_pixels: np.ndarray
    plan_sites: np.ndarray
    plan_mass: np.ndarray
    dual_history: list[float] = field(default_factory=list)
    residual_history: list[float] = field(default_factory=list)
    method: str = "newton"
    exact_rounds: int = 0

    @property
    def n(self) -> int:
        return int(self.sites.shape[0])

    @property
    def psi(self) -> np.ndarray:
        return self.weights.psi

    @property
    def dual_value(self) -> float:
        return self.dual_history[-1]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "grid_m": self.grid_m,
            "cost": self.cost,
            "mass_residual": self.mass_residual,
            "dual_value": self.dual_value,
            "iterations": len(self.dual_history) - 1,
            "exact_rounds": self.exact_rounds,
            "method": self.method,
        }


def default_grid_m(n: int, cap: int = GRID_CAP) -> int:
    """Smallest power of two >= 16 sqrt(n), at least 16, at most cap"""
    need = max(MIN_GRID, int(math.ceil(16.0 * math.sqrt(n))))
    return min(cap, 1 << (need - 1).bit_length())


def dual_objective(
    sites: np.ndarray, psi: np.ndarray, centers: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Phi(psi) together with the pixel assignment and the minimal power values"""
    index, best = power_argmin(sites, psi, centers)
    return float(np.mean(psi) + np.mean(best)), index, best


def _validate(n: int, grid_m: int, mass_tol: float, max_iters: int) -> None:
    if grid_m < MIN_GRID:
        raise InvalidArgumentError(f"grid_m must be at least {MIN_GRID}, got {grid_m}")
    if n > grid_m * grid_m:
        raise InvalidArgumentError(f"n={n} exceeds the number of pixels m^2={grid_m * grid_m}")
    if not (MIN_MASS_TOL <= mass_tol <= MAX_MASS_TOL):
        raise InvalidArgumentError(
            f"mass_tol must lie in [{MIN_MASS_TOL}, {MAX_MASS_TOL}], got {mass_tol}"
        )
    if max_iters < 0:
        raise InvalidArgumentError(f"max_iters must be nonnegative, got {max_iters}")


def cell_jacobian(sites: np.ndarray, assignment: np.ndarray, m: int) -> sparse.csr_matrix:
    """
    Graph Laplacian approximating d(cell mass)/d(psi)

    Facet lengths between neighbouring cells are estimated from the number of pixel edges they
    share (times pi/4 for the staircase), divided by twice the distance of the two sites.
    """
    n = sites.shape[0]
    grid = assignment.reshape(m, m)
    a_parts, b_parts = [], []
    for axis in (0, 1):
        neighbour = np.roll(grid, -1, axis=axis)
        differs = grid != neighbour
        a_parts.append(grid[differs])
        b_parts.append(neighbour[differs])
    a = np.concatenate(a_parts)
    b = np.concatenate(b_parts)
    if a.size == 0:
        return sparse.csr_matrix((n, n))
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    keys, counts = np.unique(lo * n + hi, return_counts=True)
    i = keys // n
    j = keys % n
    length = counts * (math.pi / 4.0) / m
    spacing = np.maximum(np.sqrt(dist_sq_array(sites[i], sites[j])), 1.0 / m)
    w = length / (2.0 * spacing)
    W = sparse.coo_matrix((w, (i, j)), shape=(n, n)).tocsr()
    W = W + W.T
    degree = np.asarray(W.sum(axis=1)).ravel()
    return (sparse.diags(degree) - W).tocsr()


def _ascent_direction(
    method: str, sites: np.ndarray, assignment: np.ndarray, m: int, grad: np.ndarray
) -> np.ndarray:
    J = cell_jacobian(sites, assignment, m)
    diag = J.diagonal()
    mean_diag = float(np.mean(diag))
    shift = 1e-3 * mean_diag if mean_diag > 0.0 else 1.0
    if method == "diagonal":
        return grad / (diag + shift)
    n = sites.shape[0]
    return np.asarray(spsolve((J + shift * sparse.identity(n)).tocsc(), grad)).ravel()


def _dual_ascent(
    sites: np.ndarray,
    centers: np.ndarray,
    m: int,
    mass_tol: float,
    max_iters: int,
    method: str,
):
    """Backtracking ascent on Phi; returns psi, assignment and the trajectories"""
    n = sites.shape[0]
    psi = np.zeros(n)
    phi, assignment, _ = dual_objective(sites, psi, centers)
    dual_history = [phi]
    residual_history = []
    best_residual = math.inf
    since_best = 0

    for _ in range(max_iters + 1):
        mass = np.bincount(assignment, minlength=n) / (m * m)
        grad = 1.0 / n - mass
        residual = float(np.max(np.abs(grad)))
        residual_history.append(residual)
        if residual <= mass_tol / n or len(residual_history) > max_iters:
            break
        if residual < best_residual:
            best_residual = residual
            since_best = 0
        else:
            since_best += 1
            if since_best >= PATIENCE:
                break

        direction = _ascent_direction(method, sites, assignment, m, grad)
        slope = float(grad @ direction)
        if not slope > 0.0:
            direction = grad
            slope = float(grad @ grad)

        step = 1.0
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            trial = psi + step * direction
            trial -= trial.mean()
            trial_phi, trial_assignment, _ = dual_objective(sites, trial, centers)
            if trial_phi >= phi + ARMIJO * step * slope:
                psi, phi, assignment = trial, trial_phi, trial_assignment
                dual_history.append(phi)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break

    return psi, assignment, dual_history, residual_history


def _window(grid: np.ndarray, layers: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Boundary mask within `layers` pixels and the rolled assignment grids of the neighbourhood"""
    rolled = []
    boundary = np.zeros(grid.shape, dtype=bool)
    for d1 in range(-layers, layers + 1):
        for d2 in range(-layers, layers + 1):
            shifted = np.roll(grid, (d1, d2), axis=(0, 1))
            boundary |= shifted != grid
            rolled.append(shifted.ravel())
    return boundary.ravel(), rolled


def _transport_lp(
    sites: np.ndarray,
    centers: np.ndarray,
    m: int,
    free: np.ndarray,
    pair_pixels: np.ndarray,
    pair_sites: np.ndarray,
    fixed_counts: np.ndarray,
):
    """Transportation LP over the free pixels in pixel-mass units; None when infeasible"""
    n = sites.shape[0]
    rhs_sites = (m * m) / n - fixed_counts
    if np.any(rhs_sites < -1e-9):
        return None
    rows_pixel = np.searchsorted(free, pair_pixels)
    n_free = free.size
    n_pairs = pair_pixels.size
    cols = np.arange(n_pairs)
    A = sparse.csr_matrix(
        (
            np.ones(2 * n_pairs),
            (np.concatenate([rows_pixel, n_free + pair_sites]), np.concatenate([cols, cols])),
        ),
        shape=(n_free + n, n_pairs),
    )
    b = np.concatenate([np.ones(n_free), np.maximum(rhs_sites, 0.0)])
    costs = dist_sq_array(centers[pair_pixels], sites[pair_sites])
    res = linprog(
        costs, A_eq=A, b_eq=b, bounds=(0, None), method="highs-ds", options=_HIGHS_OPTIONS
    )
    if res.status != 0:
        return None
    marginals = np.asarray(res.eqlin.marginals)
    return np.asarray(res.x), marginals[:n_free], marginals[n_free:]


def _unique_pairs(pixels: np.ndarray, sites: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    keys = np.unique(pixels.astype(np.int64) * n + sites.astype(np.int64))
    return keys // n, keys % n


def _resolve_ties(
    sites: np.ndarray,
    centers: np.ndarray,
    m: int,
    assignment: np.ndarray,
    max_rounds: int,
    residual_history: list[float],
):
    """Exact optimum of the pixel problem starting from a whole-pixel assignment

    Returns (psi, plan_pixels, plan_sites, plan_mass, rounds).
    """
    n = sites.shape[0]
    grid = assignment.reshape(m, m)
    extra_pixels = np.empty(0, dtype=np.int64)
    extra_sites = np.empty(0, dtype=np.int64)
    rounds = 0

    for layers in WINDOW_LAYERS + (None,):
        if layers is None:
            if n * m * m > FULL_PROBLEM_LIMIT:
                break
            print(f"⚠️  Exact stage falling back to the full {n} x {m * m} transport problem")
            free_mask = np.ones(m * m, dtype=bool)
            window_pixels = np.repeat(np.arange(m * m), n)
            window_sites = np.tile(np.arange(n), m * m)
        else:
            free_mask, rolled = _window(grid, layers)
            free_idx = np.nonzero(free_mask)[0]
            window_pixels = np.tile(free_idx, len(rolled))
            window_sites = np.concatenate([r[free_idx] for r in rolled])

        while rounds <= max_rounds:
            mask = free_mask.copy()
            mask[extra_pixels] = True
            free = np.nonzero(mask)[0]
            pair_pixels, pair_sites = _unique_pairs(
                np.concatenate([window_pixels, extra_pixels, free]),
                np.concatenate([window_sites, extra_sites, assignment[free]]),
                n,
            )
            fixed_counts = np.bincount(assignment[~mask], minlength=n)
            solved = _transport_lp(sites, centers, m, free, pair_pixels, pair_sites, fixed_counts)
            rounds += 1
            if solved is None:
                break
            x, phi_free, psi = solved

            # certificate on every pixel
            index, best = power_argmin(sites, psi, centers)
            lp_violation = best[free] < phi_free - CERT_TOL
            fixed = np.nonzero(~mask)[0]
            own = dist_sq_array(centers[fixed], sites[assignment[fixed]]) - psi[assignment[fixed]]
            fixed_violation = own > best[fixed] + CERT_TOL
            if not np.any(lp_violation) and not np.any(fixed_violation):
                keep = x > 1e-13
                plan_pixels = np.concatenate([fixed, pair_pixels[keep]])
                plan_sites = np.concatenate([assignment[fixed], pair_sites[keep]])
                plan_mass = np.concatenate([np.ones(fixed.size), x[keep]]) / (m * m)
                return psi, plan_pixels, plan_sites, plan_mass, rounds

            add = np.concatenate([free[lp_violation], fixed[fixed_violation]])
            extra_pixels = np.concatenate([extra_pixels, add, fixed[fixed_violation]])
            extra_sites = np.concatenate(
                [extra_sites, index[add], assignment[fixed[fixed_violation]]]
            )
        if rounds > max_rounds:
            break

    raise ConvergenceError(
        f"exact stage did not certify an optimum after {rounds} rounds", residuals=residual_history
    )


def solve(
    sample: PointSample,
    grid_m: int,
    mass_tol: float = 1e-8,
    max_iters: int = 200,
    method: str = "newton",
) -> SemidiscreteSolution:
    """
    Optimal transport from the sample to the m x m pixel measure

    Args:
        sample: Point sample (sites of mass 1/n)
        grid_m: Pixels per side, at least 16 and with n <= m^2
        mass_tol: Cells must carry 1/n within mass_tol / n
        max_iters: Cap on ascent iterations and on exact-stage rounds
        method: "newton" or "diagonal" ascent

    Returns:
        SemidiscreteSolution with a certified optimal plan

    Raises:
        ConvergenceError: Cells still empty after the ascent, or no certified optimum
    """
    if method not in ("newton", "diagonal"):
        raise InvalidArgumentError(f"method must be 'newton' or 'diagonal', got {method!r}")
    sites = np.asarray(sample.points, dtype=float)
    n = sites.shape[0]
    m = int(grid_m)
    _validate(n, m, mass_tol, max_iters)
    centers = pixel_centers(m)

    psi, assignment, dual_history, residual_history = _dual_ascent(
        sites, centers, m, mass_tol, max_iters, method
    )
    counts = np.bincount(assignment, minlength=n)
    rounds = 0
    if residual_history[-1] <= mass_tol / n:
        plan_pixels = np.arange(m * m)
        plan_sites = assignment
        plan_mass = np.full(m * m, 1.0 / (m * m))
    else:
        if np.any(counts == 0):
            empty = int(np.sum(counts == 0))
            raise ConvergenceError(
                f"{empty} empty cell(s) after {len(residual_history) - 1} ascent iterations",
                residuals=residual_history,
            )
        psi, plan_pixels, plan_sites, plan_mass, rounds = _resolve_ties(
            sites, centers, m, assignment, max_iters, residual_history
        )

    weights = DualWeights.centered(psi)
    phi, assignment, _ = dual_objective(sites, weights.psi, centers)
    if rounds:
        dual_history.append(phi)

    cell_masses = np.bincount(plan_sites, weights=plan_mass, minlength=n)
    mass_residual = float(np.max(np.abs(cell_masses - 1.0 / n)))
    if rounds:
        residual_history.append(mass_residual)
    if mass_residual > mass_tol / n:
        raise ConvergenceError(
            f"mass residual {mass_residual:.3e} above tolerance {mass_tol / n:.3e}",
            residuals=residual_history,
        )
    cost = float(np.sum(plan_mass * dist_sq_array(centers[plan_pixels], sites[plan_sites])))
    return SemidiscreteSolution(
        weights=weights,
        grid_m=m,
        assignment=assignment,
        cell_masses=cell_masses,
        cost=cost,
        mass_residual=mass_residual,
        sites=sites,
        plan_pixels=plan_pixels,
        plan_sites=plan_sites,
        plan_mass=plan_mass,
        dual_history=dual_history,
        residual_history=residual_history,
        method=method,
        exact_rounds=rounds,
    )


def map_apply(sol: SemidiscreteSolution, y) -> tuple[int, Displacement]:
    """T_n(y) as (site index, nearest-image displacement X_site - y); ties go to the lowest index"""
    point = np.asarray(y, dtype=float).reshape(1, 2)
    index, _ = power_argmin(sol.sites, sol.psi, point)
    site = int(index[0])
    v1, v2 = nearest_image_array(sol.sites[site], point[0])
    return site, Displacement(float(v1), float(v2))


def dump_solution(sol: SemidiscreteSolution, path: str, seed: int) -> None:
    """Write the plan and the potentials as CSV with a '# n=..., m=..., seed=...' header"""
    order = np.lexsort((sol.plan_sites, sol.plan_pixels))
    with open(path, "w") as f:
        f.write(f"# n={sol.n}, m={sol.grid_m}, seed={seed}\n")
        f.write("pixel_index,site_index,mass\n")
        for k in order:
            f.write(f"{int(sol.plan_pixels[k])},{int(sol.plan_sites[k])},{float(sol.plan_mass[k])!r}\n")
        f.write("# psi\n")
        for value in sol.psi:
            f.write(f"{float(value)!r}\n")
