"""
Certified power-diagram argmin on the torus

For weights psi the cell of site i is {y : d(y, X_i)^2 - psi_i <= d(y, X_j)^2 - psi_j for all j}.
Small problems are scanned by brute force. Larger ones lift the sites to (X_i, sqrt(M - psi_i)) so
that the power value becomes a squared distance in 3-D, query a periodic cKDTree for a few
candidates, recheck them exactly and fall back to a full scan wherever the candidate set cannot
certify the minimum.
"""

import numpy as np
from scipy.spatial import cKDTree

from geometry.torus import dist_sq_array, wrap_array


# Values within this of the minimum count as ties; ties go to the lowest site index
TIE_TOL = 1e-12
# n * queries above which the lifted tree is used
BRUTE_FORCE_LIMIT = 4_000_000
# Candidates fetched per query from the lifted tree
TREE_CANDIDATES = 4

_CHUNK_ENTRIES = 2_000_000


def power_values(sites: np.ndarray, psi: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Matrix of d(y, X_i)^2 - psi_i, shape (len(queries), len(sites))"""
    return dist_sq_array(queries[:, None, :], sites[None, :, :]) - psi[None, :]


def _argmin_rows(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    best = values.min(axis=1)
    index = np.argmax(values <= best[:, None] + TIE_TOL, axis=1)
    return index, best


def _brute_force(sites, psi, queries) -> tuple[np.ndarray, np.ndarray]:
    n = sites.shape[0]
    chunk = max(1, _CHUNK_ENTRIES // n)
    index = np.empty(queries.shape[0], dtype=np.int64)
    best = np.empty(queries.shape[0])
    for start in range(0, queries.shape[0], chunk):
        block = queries[start : start + chunk]
        index[start : start + chunk], best[start : start + chunk] = _argmin_rows(
            power_values(sites, psi, block)
        )
    return index, best


def _lifted_tree(sites: np.ndarray, psi: np.ndarray) -> tuple[cKDTree, float]:
    top = float(np.max(psi))
    height = np.sqrt(top - psi)
    box_z = 4.0 * float(np.max(height)) + 4.0
    data = np.column_stack([wrap_array(sites), height])
    return cKDTree(data, boxsize=[1.0, 1.0, box_z]), top


def power_argmin(
    sites: np.ndarray, psi: np.ndarray, queries: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Power-cell membership of query points

    Args:
        sites: Site coordinates, shape (n, 2)
        psi: Dual weights, shape (n,)
        queries: Points on the torus, shape (N, 2)

    Returns:
        (site index per query, minimal power value per query); ties go to the lowest index
    """
    sites = np.asarray(sites, dtype=float)
    psi = np.asarray(psi, dtype=float)
    queries = np.asarray(queries, dtype=float)
    n = sites.shape[0]
    if n == 1:
        return np.zeros(queries.shape[0], dtype=np.int64), dist_sq_array(queries, sites[0]) - psi[0]
    if n * queries.shape[0] <= BRUTE_FORCE_LIMIT or n <= TREE_CANDIDATES:
        return _brute_force(sites, psi, queries)

    tree, top = _lifted_tree(sites, psi)
    k = TREE_CANDIDATES
    lifted = np.column_stack([wrap_array(queries), np.zeros(queries.shape[0])])
    dist, cand = tree.query(lifted, k=k)

    # exact recheck of the candidates
    cand_sites = sites[cand]
    exact = dist_sq_array(queries[:, None, :], cand_sites) - psi[cand]
    best = exact.min(axis=1)
    tied = exact <= best[:, None] + TIE_TOL
    index = np.where(tied, cand, n).min(axis=1)

    # any site outside the candidate set has power value >= dist_k^2 - top
    bound = dist[:, -1] ** 2 - top
    uncertified = best + TIE_TOL + 1e-9 * (1.0 + abs(top)) >= bound
    if np.any(uncertified):
        rows = np.nonzero(uncertified)[0]
        index[rows], best[rows] = _brute_force(sites, psi, queries[rows])
    return index.astype(np.int64), best

