"""
Monte Carlo estimators for the matching cost, the linearization errors and the field bounds

Every estimator draws R independent samples from streams keyed by (seed for n, replica index),
evaluates one scalar per replica and aggregates in replica order.
"""

import math
import time
from collections.abc import Callable

import numpy as np

from kernels.config import DEFAULT_KERNEL_CONFIG, KernelConfig
from kernels.green import MAX_MOLLIFIER_RADIUS
from kernels.heat import check_time, q_zero_at_origin
from models.errors import InvalidArgumentError
from models.field import (
    PointSample,
    change_time_fourth_moment,
    dirichlet_energy,
    empirical_dirichlet_energy,
    expected_change_time_energy,
    grad_f,
    hessian_resolution_floor,
    hessian_sup,
    mollified_field_gradient,
    sample_uniform,
)
from models.types import EstimatorRecord, ScaleParams
from replica_runner import ReplicaRunner
from transport.integrals import transport_integrals
from transport.semidiscrete import solve

from .config import DEFAULT_SOLVER, SolverSettings


EXCEEDANCE_LEVELS = (0.1, 0.5, 1.0)
GRID_GAP_REPLICAS = 4
DISPLACEMENT_VARIANTS = ("at_x", "at_y")


def seed_for_n(seed: int, n: int) -> int:
    """Independent base seed for sample size n"""
    return int(np.random.SeedSequence([seed, n]).generate_state(1, dtype=np.uint64)[0])


def _sampler(n: int, seed: int) -> Callable[[int], PointSample]:
    base = seed_for_n(seed, n)
    return lambda replica: sample_uniform(n, base, replica)


def _runner(runner: ReplicaRunner | None) -> ReplicaRunner:
    return runner if runner is not None else ReplicaRunner(threads=1, quiet=True)


def _check_replicas(R: int) -> None:
    if R < 2:
        raise InvalidArgumentError(f"need at least 2 replicas, got {R}")


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and standard deviation / sqrt(R)"""
    values = np.asarray(values, dtype=float)
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(values.size))


def moment_power(values: np.ndarray, power: float, scale: float = 1.0) -> tuple[float, float]:
    """scale * E[V]^power and its delta-method standard error"""
    mu, se = mean_and_stderr(values)
    if mu <= 0.0:
        return 0.0, scale * se**power
    return scale * mu**power, scale * power * mu ** (power - 1.0) * se


def _record(
    quantity: str,
    n: int,
    t: float | None,
    m: int | None,
    seed: int,
    values: np.ndarray,
    started: float,
    extras: dict | None = None,
    power: float = 1.0,
    scale: float = 1.0,
    s: float | None = None,
) -> EstimatorRecord:
    values = np.asarray(values, dtype=float)
    if power == 1.0:
        mean, stderr = mean_and_stderr(scale * values)
    else:
        mean, stderr = moment_power(values, power, scale)
    return EstimatorRecord(
        quantity=quantity,
        n=n,
        t=t,
        m=m,
        R=int(values.size),
        mean=mean,
        stderr=stderr,
        seed=seed,
        runtime_seconds=time.perf_counter() - started,
        extras=extras,
        replica_values=tuple(float(v) for v in values),
        s=s,
    )


def _solve(sample: PointSample, m: int, solver: SolverSettings):
    return solve(sample, m, mass_tol=solver.mass_tol, max_iters=solver.max_iters, method=solver.method)


# --- matching cost ------------------------------------------------------------------------------


def estimate_cost(
    n: int,
    m: int,
    R: int,
    seed: int,
    solver: SolverSettings = DEFAULT_SOLVER,
    runner: ReplicaRunner | None = None,
) -> EstimatorRecord:
    """
    n E[W_2^2(mu_n, 1)] on the m x m pixel measure

    Args:
        n: Sample size
        m: Pixels per side
        R: Replicas
        seed: Base seed
        solver: Solver tolerances
        runner: Replica runner (sequential when omitted)

    Returns:
        EstimatorRecord with quantity 'cost'
    """
    _check_replicas(R)
    started = time.perf_counter()
    draw = _sampler(n, seed)
    batch = _runner(runner).run(
        f"cost n={n}", lambda r: _solve(draw(r), m, solver).cost, R, seed
    )
    return _record("cost", n, None, m, seed, np.array(batch.results), started, scale=n)


def estimate_cost_second_moment(
    n: int,
    m: int,
    R: int,
    seed: int,
    solver: SolverSettings = DEFAULT_SOLVER,
    runner: ReplicaRunner | None = None,
) -> EstimatorRecord:
    """n E[(W_2^2)^2]^(1/2); the first moment n E[W_2^2] is kept in the extras"""
    _check_replicas(R)
    started = time.perf_counter()
    draw = _sampler(n, seed)
    batch = _runner(runner).run(
        f"w2-moment n={n}", lambda r: _solve(draw(r), m, solver).cost, R, seed
    )
    costs = np.array(batch.results)
    first_moment, first_stderr = mean_and_stderr(n * costs)
    extras = {"first_moment": first_moment, "first_moment_stderr": first_stderr}
    return _record("w2_moment", n, None, m, seed, costs**2, started, extras, power=0.5, scale=n)


# --- linearization errors -----------------------------------------------------------------------


def _integrals(
    n: int,
    t: float,
    m: int,
    R: int,
    seed: int,
    label: str,
    solver: SolverSettings,
    cfg: KernelConfig,
    runner: ReplicaRunner | None,
    path_nodes: int,
):
    draw = _sampler(n, seed)

    def body(replica: int):
        sample = draw(replica)
        return transport_integrals(_solve(sample, m, solver), sample, t, cfg, path_nodes)

    return _runner(runner).run(label, body, R, seed).results


def estimate_displacement(
    n: int,
    t: float,
    m: int,
    R: int,
    seed: int,
    variant: str,
    solver: SolverSettings = DEFAULT_SOLVER,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    runner: ReplicaRunner | None = None,
) -> EstimatorRecord:
    """
    n E int |x - y - grad f(x)|^2 dpi (variant 'at_x') or n E int |T(y) - y - grad f(y)|^2 (at_y)

    Args:
        n: Sample size
        t: Heat time; at_x needs t >= r_n^2 = 1/n, at_y needs t >= t_n = (ln n)^3 / n
        m: Pixels per side
        R: Replicas
        seed: Base seed
        variant: 'at_x' or 'at_y'
        solver: Solver tolerances
        cfg: Kernel settings
        runner: Replica runner

    Returns:
        EstimatorRecord with quantity 'displacement_at_x' or 'displacement_at_y'
    """
    _check_replicas(R)
    t = check_time(t)
    scales = ScaleParams.for_n(n)
    if variant == "at_x":
        if t < scales.r_n_sq:
            raise InvalidArgumentError(f"at_x needs t >= r_n^2 = {scales.r_n_sq:.6g}, got t={t:.6g}")
    elif variant == "at_y":
        if t < scales.t_n:
            raise InvalidArgumentError(
                f"at_y needs t >= t_n = (ln n)^3/n = {scales.t_n:.6g}, got t={t:.6g}"
            )
    else:
        raise InvalidArgumentError(f"variant must be one of {DISPLACEMENT_VARIANTS}, got {variant!r}")
    started = time.perf_counter()
    results = _integrals(
        n, t, m, R, seed, f"displacement {variant} n={n}", solver, cfg, runner, path_nodes=0
    )
    field_name = "map_poisson_err" if variant == "at_x" else "nmap_err"
    values = np.array([getattr(r, field_name) for r in results])
    return _record(f"displacement_{variant}", n, t, m, seed, values, started, scale=n)


def estimate_quasi_orthogonality(
    n: int,
    m: int,
    R: int,
    seed: int,
    t: float | None = None,
    path_nodes: int = 8,
    solver: SolverSettings = DEFAULT_SOLVER,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    runner: ReplicaRunner | None = None,
) -> EstimatorRecord:
    """
    n E int (T(y) - y - grad f(y)).grad f(y) at t = t_n unless t is given

    The extras carry n E[suboptimal_remainder] and the largest relative violation of
    W_2^2 = nmap_err + dirichlet_quadrature + 2 quasi_orth over the replicas.
    """
    _check_replicas(R)
    t = ScaleParams.for_n(n).t_n if t is None else t
    t = check_time(t)
    started = time.perf_counter()
    results = _integrals(n, t, m, R, seed, f"quasi-orth n={n}", solver, cfg, runner, path_nodes)
    values = np.array([r.quasi_orth for r in results])
    identity_errors = [
        abs(r.disp_sq_mean - (r.nmap_err + r.dirichlet_quadrature + 2.0 * r.quasi_orth))
        / max(r.disp_sq_mean, 1e-300)
        for r in results
    ]
    extras = {
        "dirichlet_quadrature": n * float(np.mean([r.dirichlet_quadrature for r in results])),
        "identity_max_rel_err": float(max(identity_errors)),
    }
    if path_nodes:
        remainder = [r.suboptimal_remainder for r in results]
        extras["suboptimal_remainder"] = n * float(np.mean(remainder))
    return _record("quasi_orth", n, t, m, seed, values, started, extras, scale=n)


def estimate_path_energy(
    n: int,
    t: float,
    m: int,
    R: int,
    seed: int,
    path_nodes: int = 8,
    solver: SolverSettings = DEFAULT_SOLVER,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    runner: ReplicaRunner | None = None,
) -> EstimatorRecord:
    """n E sum mass int_0^1 |grad f(X_s)|^2 ds along the plan geodesics"""
    _check_replicas(R)
    t = check_time(t)
    if path_nodes < 1:
        raise InvalidArgumentError("the path energy needs at least one quadrature node")
    started = time.perf_counter()
    results = _integrals(n, t, m, R, seed, f"path-energy n={n}", solver, cfg, runner, path_nodes)
    values = np.array([r.path_energy for r in results])
    extras = {
        "path_deviation": n * float(np.mean([r.path_deviation for r in results])),
        "reference": q_zero_at_origin(2.0 * t, cfg),
    }
    return _record("path_energy", n, t, m, seed, values, started, extras, scale=n)


# --- trace formula ------------------------------------------------------------------------------


def estimate_trace_formula(
    n: int,
    t: float,
    R: int,
    seed: int,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    runner: ReplicaRunner | None = None,
) -> EstimatorRecord:
    """
    n E int |grad f_{n,t}|^2 with the exact reference q_{2t}(0) in the extras

    Returns:
        EstimatorRecord; extras hold 'reference' and 'z_score' = (mean - reference) / stderr
    """
    _check_replicas(R)
    t = check_time(t)
    started = time.perf_counter()
    draw = _sampler(n, seed)
    batch = _runner(runner).run(
        f"trace n={n}", lambda r: dirichlet_energy(draw(r), t, cfg), R, seed
    )
    reference = q_zero_at_origin(2.0 * t, cfg)
    record = _record("trace", n, t, None, seed, np.array(batch.results), started, scale=n)
    z = (record.mean - reference) / record.stderr if record.stderr > 0.0 else 0.0
    return record._replace(extras={"reference": reference, "z_score": z})


def estimate_empirical_trace(
    n: int,
    t: float,
    R: int,
    seed: int,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    runner: ReplicaRunner | None = None,
) -> EstimatorRecord:
    """n E int |grad f_{n,t}|^2 d mu_n, reported next to q_{2t}(0) and |ln t| / (4 pi)"""
    _check_replicas(R)
    t = check_time(t)
    started = time.perf_counter()
    draw = _sampler(n, seed)
    batch = _runner(runner).run(
        f"empirical-trace n={n}", lambda r: empirical_dirichlet_energy(draw(r), t, cfg), R, seed
    )
    extras = {
        "reference": q_zero_at_origin(2.0 * t, cfg),
        "log_term": abs(math.log(t)) / (4.0 * math.pi),
    }
    return _record("empirical_trace", n, t, None, seed, np.array(batch.results), started, extras, scale=n)


# --- field bounds -------------------------------------------------------------------------------


def default_hessian_grid(t: float) -> int:
    return max(64, 4 * hessian_resolution_floor(t))


def estimate_hessian_moment(
    n: int,
    R: int,
    seed: int,
    grid_m: int | None = None,
    t: float | None = None,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    runner: ReplicaRunner | None = None,
) -> EstimatorRecord:
    """
    E[ ||Hess f_{n,t_n}||_inf^4 ]^(1/4) with grid sups

    The extras record how often the grid sup exceeded each level in EXCEEDANCE_LEVELS, and the
    relative rise of the sup on a grid twice as fine over the first few replicas.
    """
    _check_replicas(R)
    if n < 3:
        raise InvalidArgumentError(f"t_n = (ln n)^3/n vanishes or is too small for n={n}; need n >= 3")
    t = ScaleParams.for_n(n).t_n if t is None else check_time(t)
    m = grid_m or default_hessian_grid(t)
    started = time.perf_counter()
    draw = _sampler(n, seed)
    batch = _runner(runner).run(
        f"hessian n={n}", lambda r: hessian_sup(draw(r), t, m, cfg), R, seed
    )
    sups = np.array(batch.results)
    fine = np.array([hessian_sup(draw(r), t, 2 * m, cfg) for r in range(min(R, GRID_GAP_REPLICAS))])
    extras = {
        "exceedance": {repr(level): float(np.mean(sups > level)) for level in EXCEEDANCE_LEVELS},
        "grid_gap": float(np.max((fine - sups[: fine.size]) / fine)),
    }
    return _record("hessian_moment", n, t, m, seed, sups**4, started, extras, power=0.25)


def estimate_change_time(
    n: int,
    s: float,
    t: float,
    R: int,
    seed: int,
    grid_m: int | None = None,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    runner: ReplicaRunner | None = None,
) -> EstimatorRecord:
    """
    n E[ int |grad f_{n,s} - grad f_{n,t}|^4 ]^(1/2) for 1/n <= s <= t < 1

    The record carries s next to t. The extras hold log(t/s) and the exact second-moment
    reference q_{2s}(0) + q_{2t}(0) - 2 q_{s+t}(0).
    """
    _check_replicas(R)
    s = check_time(s)
    t = check_time(t)
    if not (1.0 / n <= s <= t < 1.0):
        raise InvalidArgumentError(f"need 1/n <= s <= t < 1 with 1/n = {1.0 / n:.6g}, got s={s}, t={t}")
    started = time.perf_counter()
    draw = _sampler(n, seed)
    batch = _runner(runner).run(
        f"change-time n={n}",
        lambda r: change_time_fourth_moment(draw(r), s, t, cfg, grid_m),
        R,
        seed,
    )
    extras = {
        "second_moment_reference": expected_change_time_energy(s, t, cfg),
        "log_ratio": math.log(t / s),
    }
    return _record(
        "change_time",
        n,
        t,
        grid_m,
        seed,
        np.array(batch.results),
        started,
        extras,
        power=0.5,
        scale=n,
        s=s,
    )


def _local_consistency(sample: PointSample, t: float, cfg: KernelConfig) -> tuple[float, int]:
    n = sample.n
    pts = sample.points
    wrapped = pts - np.round(pts)
    inside = np.sum(wrapped * wrapped, axis=1) < 1.0 / n
    count = int(np.sum(inside))
    if count == 0:
        return 0.0, 0
    origin = grad_f(sample, t, np.zeros(2), cfg)
    local = grad_f(sample, t, pts[inside], cfg)
    diff = local - origin[None, :]
    # n * (1/|B|) * (1/n) sum, |B| = pi / n
    return float(n / math.pi * np.sum(diff * diff)), count


def estimate_local_consistency(
    n: int,
    t: float,
    R: int,
    seed: int,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    runner: ReplicaRunner | None = None,
) -> EstimatorRecord:
    """
    n E[ (1/|B_{r_n}|) int_{B_{r_n}} |grad f(0) - grad f(x)|^2 d mu_n(x) ] for t >= 1/n

    The extras report the mean and standard error of n mu_n(B_{r_n}), a Binomial(n, pi/n) count.
    """
    _check_replicas(R)
    t = check_time(t)
    if t < 1.0 / n:
        raise InvalidArgumentError(f"need t >= 1/n = {1.0 / n:.6g}, got t={t:.6g}")
    started = time.perf_counter()
    draw = _sampler(n, seed)
    batch = _runner(runner).run(
        f"local-consistency n={n}", lambda r: _local_consistency(draw(r), t, cfg), R, seed
    )
    values = np.array([value for value, _ in batch.results])
    counts = np.array([count for _, count in batch.results], dtype=float)
    count_mean, count_stderr = mean_and_stderr(counts)
    extras = {"ball_count_mean": count_mean, "ball_count_stderr": count_stderr}
    return _record("local_consistency", n, t, None, seed, values, started, extras)


def estimate_kernel_comparison(
    n: int,
    t: float,
    R: int,
    seed: int,
    cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
    runner: ReplicaRunner | None = None,
) -> EstimatorRecord:
    """n E[ |grad f_{n,t}(0) - grad phi_n^{sqrt t}(0)|^4 ]^(1/2) for 1/n <= t <= 1/16"""
    _check_replicas(R)
    t = check_time(t)
    if not (1.0 / n <= t <= MAX_MOLLIFIER_RADIUS**2):
        raise InvalidArgumentError(
            f"need 1/n <= t <= {MAX_MOLLIFIER_RADIUS**2} (mollifier radius sqrt(t) <= "
            f"{MAX_MOLLIFIER_RADIUS}), got t={t:.6g} with 1/n = {1.0 / n:.6g}"
        )
    r = math.sqrt(t)
    origin = np.zeros(2)
    started = time.perf_counter()
    draw = _sampler(n, seed)

    def body(replica: int) -> float:
        sample = draw(replica)
        diff = grad_f(sample, t, origin, cfg) - mollified_field_gradient(sample, r, origin, cfg)
        return float(diff @ diff) ** 2

    batch = _runner(runner).run(f"kernel-comparison n={n}", body, R, seed)
    return _record(
        "kernel_comparison", n, t, None, seed, np.array(batch.results), started, power=0.5, scale=n
    )
