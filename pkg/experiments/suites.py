"""
One suite per CLI subcommand: run the estimators on their parameter grids, write the records and
evaluate the acceptance checks
"""

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from itertools import pairwise
from typing import Any

import numpy as np

from kernels.heat import q_zero_at_origin
from kernels.inequalities import CSV_COLUMNS, DEFAULT_T_GRID, kernel_inequality_report
from models.types import CheckResult, EstimatorRecord, ScaleParams
from replica_runner import ReplicaRunner
from run_recorder import RunRecorder

from .config import ExperimentConfig, RunSettings, TimeRule, trace_times
from .estimators import (
    estimate_change_time,
    estimate_cost,
    estimate_cost_second_moment,
    estimate_displacement,
    estimate_empirical_trace,
    estimate_hessian_moment,
    estimate_kernel_comparison,
    estimate_local_consistency,
    estimate_path_energy,
    estimate_quasi_orthogonality,
    estimate_trace_formula,
)
from .fitting import (
    INV_FOUR_PI,
    band_after_removing,
    fit_points,
    fit_rate,
    relative_error,
    spread_ratio,
)
from .selfcheck import kernel_self_checks, solver_self_checks


COST_N_GRID = (64, 128, 256, 512, 1024, 2048, 4096)
FIELD_N_GRID = (256, 1024, 4096)
SMALL_FIELD_N_GRID = (256, 1024)
COST_REPLICAS = 32
SCALAR_REPLICAS = 100
TRACE_REPLICAS = 200
TRACE_MC_POINT = (512, 1e-3)
TRACE_CHECK_K = (3, 10)

SLOPE_TOL = 0.005
COST_SLOPE_TOL = 0.10
COST_BAND = 1.5
SPREAD_TOL = 3.0
BOUND_SPREAD_TOL = 5.0
TRACE_Z = 4.0
IDENTITY_TOL = 1e-6
CHANGE_TIME_FACTORS = (4.0, 64.0)
CHANGE_TIME_COLUMNS = ["n", "s", "t", "mean", "stderr"]
LOCAL_CONSISTENCY_FACTORS = (1.0, 16.0, 256.0)
KERNEL_COMPARISON_FACTORS = (1.0, 4.0, 16.0)


@dataclass
class SuiteContext:
    """Everything a suite needs: resolved settings, the output recorder and the replica runner"""

    settings: RunSettings
    recorder: RunRecorder
    runner: ReplicaRunner
    quiet: bool = False

    def say(self, message: str) -> None:
        if not self.quiet:
            print(message)

    def experiment(
        self,
        quantity: str,
        default_n: tuple[int, ...],
        default_replicas: int,
        t_rule: TimeRule | None = None,
        t_value: float | None = None,
    ) -> ExperimentConfig:
        return self.settings.experiment(quantity, default_n, default_replicas, t_rule, t_value)


def _check(name: str, value: float, tolerance: float, detail: str = "") -> CheckResult:
    return CheckResult(name=name, value=float(value), tolerance=tolerance, passed=bool(value <= tolerance), detail=detail)


def sweep(
    ctx: SuiteContext,
    subcommand: str,
    quantity: str,
    points: Iterable[Any],
    estimate: Callable[[Any], EstimatorRecord],
) -> list[EstimatorRecord]:
    """
    Run estimate(point) for every grid point and write the records

    Records already computed are written even when a later grid point fails.
    """
    records: list[EstimatorRecord] = []
    try:
        for point in points:
            records.append(estimate(point))
    finally:
        if records:
            ctx.recorder.write_records(quantity, records, subcommand)
    return records


# --- kernel-selfcheck ---------------------------------------------------------------------------


def run_kernel_selfcheck(ctx: SuiteContext) -> bool:
    cfg = ctx.settings.kernel_config()
    ctx.say("🔬 Kernel and solver self-checks")
    rows = kernel_inequality_report(cfg, DEFAULT_T_GRID)
    ctx.recorder.write_table(
        "kernel_inequalities", CSV_COLUMNS, [row.to_dict() for row in rows], "kernel-selfcheck"
    )
    checks = kernel_self_checks(ctx.settings.seed, cfg) + solver_self_checks(ctx.settings.seed)
    return ctx.recorder.record_checks("kernel-selfcheck", checks)


# --- trace-check --------------------------------------------------------------------------------


def trace_table(times: list[float], cfg) -> tuple[np.ndarray, np.ndarray]:
    """ln(1/t) and q_{2t}(0) on the given times"""
    x = np.array([math.log(1.0 / t) for t in times])
    y = np.array([q_zero_at_origin(2.0 * t, cfg) for t in times])
    return x, y


def run_trace_check(ctx: SuiteContext) -> bool:
    settings = ctx.settings
    cfg = settings.kernel_config()
    times = trace_times(settings)
    x, y = trace_table(times, cfg)
    rows = [
        {"t": repr(float(t)), "ln_inv_t": repr(float(xi)), "q_2t_0": repr(float(yi))}
        for t, xi, yi in zip(times, x, y, strict=True)
    ]
    ctx.recorder.write_table("trace", ["t", "ln_inv_t", "q_2t_0"], rows, "trace-check")
    fit = fit_points(x, y, "ln_inv_t")
    ctx.recorder.record_fit("trace-check", "q_2t_0", fit)
    checks = [_check("trace_slope", relative_error(fit.slope, INV_FOUR_PI), SLOPE_TOL)]

    # the known 2t term biases the coarse grid, remove it before fitting
    k_lo, k_hi = TRACE_CHECK_K
    coarse = [math.pow(4.0, -k) for k in range(k_lo, k_hi + 1)]
    xc, yc = trace_table(coarse, cfg)
    coarse_fit = fit_points(xc, yc - 2.0 * np.array(coarse), "ln_inv_t")
    ctx.recorder.record_fit("trace-check", "q_2t_0_minus_2t", coarse_fit)
    checks.append(
        _check("trace_slope_coarse_grid", relative_error(coarse_fit.slope, INV_FOUR_PI), SLOPE_TOL)
    )

    n_default, t_default = TRACE_MC_POINT
    ns = settings.n_list or (n_default,)
    t = settings.t_value or t_default
    replicas = settings.replicas or TRACE_REPLICAS
    records = sweep(
        ctx,
        "trace-check",
        "trace_mc",
        ns,
        lambda n: estimate_trace_formula(n, t, replicas, settings.seed, cfg, ctx.runner),
    )
    for record in records:
        checks.append(
            _check(f"trace_expectation_n{record.n}", abs(record.extras["z_score"]), TRACE_Z, "|z|")
        )
    return ctx.recorder.record_checks("trace-check", checks)


# --- cost-rate ----------------------------------------------------------------------------------


def single_point_tolerance(m: int) -> float:
    """Pixel-quadrature error bound of the n = 1 cost"""
    return 1.0 / (3.0 * m * m) + 1e-12


def run_cost_rate(ctx: SuiteContext) -> bool:
    exp = ctx.experiment("cost", COST_N_GRID, COST_REPLICAS)
    records = sweep(
        ctx,
        "cost-rate",
        "cost",
        exp.n_list,
        lambda n: estimate_cost(n, exp.grid_for(n), exp.replicas, exp.seed, exp.solver, ctx.runner),
    )
    checks = []
    for record in records:
        if record.n == 1:
            checks.append(
                _check("single_point_cost", abs(record.mean - 1.0 / 6.0), single_point_tolerance(record.m))
            )
    rate_records = [record for record in records if record.n > 1]
    if len(rate_records) >= 3:
        fit = fit_rate(rate_records, "ln_n")
        ctx.recorder.record_fit("cost-rate", "cost", fit)
        checks.append(_check("cost_slope", relative_error(fit.slope, INV_FOUR_PI), COST_SLOPE_TOL))
        checks.append(_check("cost_residual_band", band_after_removing(rate_records), COST_BAND))
    elif rate_records:
        ctx.say("⚠️ Fewer than 3 sample sizes above n=1, skipping the rate fit")
    return ctx.recorder.record_checks("cost-rate", checks)


# --- displacement -------------------------------------------------------------------------------


def run_displacement(ctx: SuiteContext) -> bool:
    at_y = ctx.experiment("displacement_at_y", FIELD_N_GRID, COST_REPLICAS, TimeRule.T_N)
    at_x = ctx.experiment("displacement_at_x", FIELD_N_GRID, COST_REPLICAS, TimeRule.R_N_SQ)
    cfg = at_y.kernel

    def estimate(exp: ExperimentConfig, variant: str):
        return lambda n: estimate_displacement(
            n,
            exp.time_for(n),
            exp.grid_for(n),
            exp.replicas,
            exp.seed,
            variant,
            exp.solver,
            cfg,
            ctx.runner,
        )

    y_records = sweep(ctx, "displacement", "displacement_at_y", at_y.n_list, estimate(at_y, "at_y"))
    x_records = sweep(ctx, "displacement", "displacement_at_x", at_x.n_list, estimate(at_x, "at_x"))
    checks = []
    if len(y_records) >= 2:
        ratios = [r.mean / (3.0 * math.log(math.log(r.n))) for r in y_records]
        checks.append(_check("nmap_err_over_3lnln_n_spread", spread_ratio(ratios), SPREAD_TOL))
        checks.append(
            _check(
                "map_poisson_err_spread", spread_ratio([r.mean for r in x_records]), SPREAD_TOL
            )
        )
    else:
        ctx.say(f"⚠️ Only {len(y_records)} sample size(s), skipping the spread checks")
    return ctx.recorder.record_checks("displacement", checks)


# --- quasi-orth ---------------------------------------------------------------------------------


def run_quasi_orth(ctx: SuiteContext) -> bool:
    exp = ctx.experiment("quasi_orth", FIELD_N_GRID, COST_REPLICAS, TimeRule.T_N)
    path_nodes = ctx.settings.path_nodes
    records = sweep(
        ctx,
        "quasi-orth",
        "quasi_orth",
        exp.n_list,
        lambda n: estimate_quasi_orthogonality(
            n,
            exp.grid_for(n),
            exp.replicas,
            exp.seed,
            exp.time_for(n),
            path_nodes,
            exp.solver,
            exp.kernel,
            ctx.runner,
        ),
    )
    first, last = records[0], records[-1]
    growth_limit = 5.0 * abs(first.mean) + 3.0 * max(r.stderr for r in records)
    largest = max(abs(r.mean) for r in records)
    checks = [
        _check("quasi_orth_growth", largest - growth_limit, 0.0, "max |mean| - (5 |first| + 3 stderr)"),
        _check(
            "quasi_orth_relative_size",
            abs(last.mean) / (math.log(last.n) * INV_FOUR_PI),
            0.2,
            f"n={last.n}",
        ),
        _check(
            "transport_identity",
            max(r.extras["identity_max_rel_err"] for r in records),
            IDENTITY_TOL,
            "relative, every replica",
        ),
    ]
    return ctx.recorder.record_checks("quasi-orth", checks)


# --- field bounds -------------------------------------------------------------------------------


def run_hessian_moment(ctx: SuiteContext) -> bool:
    exp = ctx.experiment("hessian_moment", FIELD_N_GRID, SCALAR_REPLICAS, TimeRule.T_N)
    records = sweep(
        ctx,
        "hessian-moment",
        "hessian_moment",
        exp.n_list,
        lambda n: estimate_hessian_moment(
            n, exp.replicas, exp.seed, exp.grid_m, exp.time_for(n), exp.kernel, ctx.runner
        ),
    )
    checks = [
        _check(
            "hessian_times_ln_n_spread",
            spread_ratio([r.mean * math.log(r.n) for r in records]),
            BOUND_SPREAD_TOL,
        )
    ]
    for record in records:
        if record.n >= 1024:
            checks.append(
                _check(f"hessian_exceedance_1_n{record.n}", record.extras["exceedance"]["1.0"], 0.0)
            )
    return ctx.recorder.record_checks("hessian-moment", checks)


def run_change_time(ctx: SuiteContext) -> bool:
    settings = ctx.settings
    exp = ctx.experiment("change_time", SMALL_FIELD_N_GRID, SCALAR_REPLICAS, TimeRule.R_N_SQ)
    grid = [(n, factor) for n in exp.n_list for factor in CHANGE_TIME_FACTORS]

    def estimate(point):
        n, factor = point
        s = settings.s_value or exp.time_for(n)
        return estimate_change_time(
            n, s, factor * s, exp.replicas, exp.seed, exp.grid_m, exp.kernel, ctx.runner
        )

    records = sweep(ctx, "change-time", "change_time", grid, estimate)
    ctx.recorder.write_table(
        "change_time_pairs",
        CHANGE_TIME_COLUMNS,
        [
            {
                "n": r.n,
                "s": repr(float(r.s)),
                "t": repr(float(r.t)),
                "mean": repr(float(r.mean)),
                "stderr": repr(float(r.stderr)),
            }
            for r in records
        ],
        "change-time",
    )
    ratios = [r.mean / (1.0 + r.extras["log_ratio"]) for r in records]
    checks = [_check("change_time_ratio_spread", spread_ratio(ratios), BOUND_SPREAD_TOL)]
    by_n: dict[int, list[EstimatorRecord]] = {}
    for record in records:
        by_n.setdefault(record.n, []).append(record)
    for n, rows in by_n.items():
        rows.sort(key=lambda r: r.t)
        drops = [
            a.mean - b.mean - 2.0 * math.hypot(a.stderr, b.stderr) for a, b in pairwise(rows)
        ]
        if drops:
            checks.append(_check(f"change_time_monotone_n{n}", max(drops), 0.0))
    return ctx.recorder.record_checks("change-time", checks)


def run_local_consistency(ctx: SuiteContext) -> bool:
    exp = ctx.experiment("local_consistency", (1024,), SCALAR_REPLICAS, TimeRule.R_N_SQ)
    grid = [(n, factor) for n in exp.n_list for factor in LOCAL_CONSISTENCY_FACTORS]

    def estimate(point):
        n, factor = point
        return estimate_local_consistency(
            n, factor * exp.time_for(n), exp.replicas, exp.seed, exp.kernel, ctx.runner
        )

    records = sweep(ctx, "local-consistency", "local_consistency", grid, estimate)
    products = [r.mean * math.sqrt(r.n * r.t) for r in records]
    checks = [_check("local_consistency_spread", spread_ratio(products), BOUND_SPREAD_TOL)]
    seen = set()
    for record in records:
        # ball counts depend on the sample only, every t of one n sees the same samples
        if record.n not in seen:
            seen.add(record.n)
            gap = abs(record.extras["ball_count_mean"] - math.pi)
            band = 3.0 * record.extras["ball_count_stderr"]
            checks.append(_check(f"ball_count_mean_n{record.n}", gap, band, "|mean - pi| <= 3 stderr"))
    return ctx.recorder.record_checks("local-consistency", checks)


def run_kernel_comparison(ctx: SuiteContext) -> bool:
    exp = ctx.experiment("kernel_comparison", SMALL_FIELD_N_GRID, SCALAR_REPLICAS, TimeRule.R_N_SQ)
    grid = [(n, factor) for n in exp.n_list for factor in KERNEL_COMPARISON_FACTORS]

    def estimate(point):
        n, factor = point
        return estimate_kernel_comparison(
            n, factor * exp.time_for(n), exp.replicas, exp.seed, exp.kernel, ctx.runner
        )

    records = sweep(ctx, "kernel-comparison", "kernel_comparison", grid, estimate)
    checks = [
        _check(
            "kernel_comparison_spread", spread_ratio([r.mean for r in records]), BOUND_SPREAD_TOL
        )
    ]
    return ctx.recorder.record_checks("kernel-comparison", checks)


def run_w2_moment(ctx: SuiteContext) -> bool:
    exp = ctx.experiment("w2_moment", COST_N_GRID, COST_REPLICAS)
    records = sweep(
        ctx,
        "w2-moment",
        "w2_moment",
        exp.n_list,
        lambda n: estimate_cost_second_moment(
            n, exp.grid_for(n), exp.replicas, exp.seed, exp.solver, ctx.runner
        ),
    )
    checks = []
    scaled = [r.mean / math.log(r.n) for r in records if r.n > 1]
    if scaled:
        checks.append(_check("w2_moment_over_ln_n_spread", spread_ratio(scaled), BOUND_SPREAD_TOL))
    jensen = max(r.extras["first_moment"] - r.mean for r in records)
    checks.append(_check("w2_moment_jensen", jensen, 1e-12, "first moment - second moment root"))
    return ctx.recorder.record_checks("w2-moment", checks)


# --- reported quantities ------------------------------------------------------------------------


def _scaled_times(n: int) -> tuple[float, ...]:
    scales = ScaleParams.for_n(n)
    return (scales.r_n_sq, scales.t_n)


def run_path_energy(ctx: SuiteContext) -> bool:
    exp = ctx.experiment("path_energy", SMALL_FIELD_N_GRID, COST_REPLICAS, TimeRule.T_N)
    path_nodes = max(ctx.settings.path_nodes, 1)
    grid = [(n, t) for n in exp.n_list for t in _scaled_times(n)]
    sweep(
        ctx,
        "path-energy",
        "path_energy",
        grid,
        lambda point: estimate_path_energy(
            point[0],
            point[1],
            exp.grid_for(point[0]),
            exp.replicas,
            exp.seed,
            path_nodes,
            exp.solver,
            exp.kernel,
            ctx.runner,
        ),
    )
    return ctx.recorder.record_checks("path-energy", [])


def run_empirical_trace(ctx: SuiteContext) -> bool:
    settings = ctx.settings
    exp = ctx.experiment("empirical_trace", SMALL_FIELD_N_GRID, SCALAR_REPLICAS, TimeRule.T_N)
    grid = [
        (n, t)
        for n in exp.n_list
        for t in ((settings.t_value,) if settings.t_value else _scaled_times(n))
    ]
    sweep(
        ctx,
        "empirical-trace",
        "empirical_trace",
        grid,
        lambda point: estimate_empirical_trace(
            point[0], point[1], exp.replicas, exp.seed, exp.kernel, ctx.runner
        ),
    )
    return ctx.recorder.record_checks("empirical-trace", [])


SUITES: dict[str, Callable[[SuiteContext], bool]] = {
    "kernel-selfcheck": run_kernel_selfcheck,
    "trace-check": run_trace_check,
    "cost-rate": run_cost_rate,
    "displacement": run_displacement,
    "quasi-orth": run_quasi_orth,
    "hessian-moment": run_hessian_moment,
    "change-time": run_change_time,
    "local-consistency": run_local_consistency,
    "kernel-comparison": run_kernel_comparison,
    "w2-moment": run_w2_moment,
    "path-energy": run_path_energy,
    "empirical-trace": run_empirical_trace,
}
