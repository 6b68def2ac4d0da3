#!/usr/bin/env python3
"""
Tests for rate fitting
"""

import math

import numpy as np
import pytest
from dotenv import load_dotenv

from experiments.fitting import (
    INV_FOUR_PI,
    band_after_removing,
    fit_points,
    fit_rate,
    regressor_value,
    relative_error,
    spread_ratio,
)
from models.errors import InvalidArgumentError
from models.types import EstimatorRecord


load_dotenv()


def make_record(n: int, mean: float, t: float | None = None) -> EstimatorRecord:
    return EstimatorRecord(
        quantity="cost", n=n, t=t, m=None, R=2, mean=mean, stderr=0.0, seed=0, runtime_seconds=0.0
    )


class TestFitting:
    """Test suite for least-squares rate fits"""

    def test_exact_line(self):
        """A noiseless line is recovered with zero residuals"""
        x = np.array([1.0, 2.0, 3.0, 4.0])
        fit = fit_points(x, 0.5 * x - 1.0)
        assert fit.slope == pytest.approx(0.5)
        assert fit.intercept == pytest.approx(-1.0)
        assert fit.residual_band == pytest.approx(0.0, abs=1e-12)

    def test_log_rate(self):
        """Means following ln n / (4 pi) give the expected slope"""
        records = [make_record(n, math.log(n) * INV_FOUR_PI + 0.3) for n in (64, 256, 1024, 4096)]
        fit = fit_rate(records, "ln_n")
        assert relative_error(fit.slope, INV_FOUR_PI) <= 1e-10
        assert band_after_removing(records) == pytest.approx(0.0, abs=1e-12)

    def test_regressors(self):
        """ln n, ln ln n and ln(1/t)"""
        record = make_record(1024, 1.0, t=1e-3)
        assert regressor_value(record, "ln_n") == pytest.approx(math.log(1024))
        assert regressor_value(record, "lnln_n") == pytest.approx(math.log(math.log(1024)))
        assert regressor_value(record, "ln_inv_t") == pytest.approx(math.log(1000.0))
        with pytest.raises(InvalidArgumentError):
            regressor_value(make_record(2, 1.0), "lnln_n")
        with pytest.raises(InvalidArgumentError):
            regressor_value(make_record(64, 1.0), "ln_inv_t")
        with pytest.raises(InvalidArgumentError):
            regressor_value(record, "sqrt_n")

    def test_degenerate_inputs(self):
        """Too few points or a single distinct x are rejected"""
        with pytest.raises(InvalidArgumentError):
            fit_points([1.0, 2.0], [1.0, 2.0])
        with pytest.raises(InvalidArgumentError):
            fit_points([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(InvalidArgumentError):
            fit_points([1.0, 2.0, 3.0], [1.0, 2.0])

    def test_spread_ratio(self):
        """max / min, infinite once a value is not positive"""
        assert spread_ratio([2.0, 1.0, 4.0]) == 4.0
        assert spread_ratio([1.0, 0.0]) == math.inf
        with pytest.raises(InvalidArgumentError):
            spread_ratio([])
