"""
Least-squares rate fits on estimator means
"""

import math

import numpy as np

from models.errors import InvalidArgumentError
from models.types import EstimatorRecord, RateFit


INV_FOUR_PI = 1.0 / (4.0 * math.pi)
REGRESSORS = ("ln_n", "ln_inv_t", "lnln_n")


def regressor_value(record: EstimatorRecord, regressor: str) -> float:
    """x coordinate of a record for the given regressor"""
    if regressor == "ln_n":
        return math.log(record.n)
    if regressor == "lnln_n":
        if record.n < 3:
            raise InvalidArgumentError(f"ln ln n needs n >= 3, got n={record.n}")
        return math.log(math.log(record.n))
    if regressor == "ln_inv_t":
        if record.t is None:
            raise InvalidArgumentError(f"record for {record.quantity} at n={record.n} has no t")
        return math.log(1.0 / record.t)
    raise InvalidArgumentError(f"regressor must be one of {REGRESSORS}, got {regressor!r}")


def fit_points(x: np.ndarray, y: np.ndarray, regressor: str = "ln_n") -> RateFit:
    """
    Ordinary least squares y = slope * x + intercept

    Args:
        x: Regressor values
        y: Responses
        regressor: Name stored on the fit

    Returns:
        RateFit with residuals y - (slope * x + intercept) in input order

    Raises:
        InvalidArgumentError: Fewer than 3 points or fewer than 2 distinct x values
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidArgumentError(f"x and y must be matching vectors, got {x.shape} and {y.shape}")
    if x.size < 3:
        raise InvalidArgumentError(f"a rate fit needs at least 3 points, got {x.size}")
    design = np.column_stack([x, np.ones_like(x)])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 2:
        raise InvalidArgumentError("regressor values are not distinct; the fit is rank deficient")
    slope, intercept = float(coef[0]), float(coef[1])
    residuals = y - (slope * x + intercept)
    return RateFit(
        slope=slope,
        intercept=intercept,
        residuals=tuple(float(r) for r in residuals),
        regressor=regressor,
    )


def fit_rate(records: list[EstimatorRecord], regressor: str = "ln_n") -> RateFit:
    """Fit record means against ln n, ln(1/t) or ln ln n"""
    if len(records) < 3:
        raise InvalidArgumentError(f"a rate fit needs at least 3 records, got {len(records)}")
    x = np.array([regressor_value(record, regressor) for record in records])
    y = np.array([record.mean for record in records])
    return fit_points(x, y, regressor)


def relative_error(value: float, target: float) -> float:
    return abs(value - target) / abs(target)


def band_after_removing(records: list[EstimatorRecord], slope: float = INV_FOUR_PI) -> float:
    """max - min of mean - slope * ln n over the records"""
    residuals = [record.mean - slope * math.log(record.n) for record in records]
    return max(residuals) - min(residuals)


def spread_ratio(values: list[float]) -> float:
    """max / min of positive values; inf when any value is not positive"""
    if not values:
        raise InvalidArgumentError("spread_ratio needs at least one value")
    low = min(values)
    if low <= 0.0:
        return math.inf
    return max(values) / low
