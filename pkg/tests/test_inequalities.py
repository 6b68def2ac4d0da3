#!/usr/bin/env python3
"""
Tests for the deterministic kernel functionals and their report
"""

import math

import numpy as np
import pytest
from dotenv import load_dotenv

from kernels.config import DEFAULT_KERNEL_CONFIG
from kernels.inequalities import (
    DEFAULT_T_GRID,
    change_kernel_energy,
    column_ratio,
    fourth_moment,
    kernel_inequality_report,
)
from models.errors import AccuracyError, InvalidArgumentError
from models.types import KernelInequalityRow


load_dotenv()


class TestKernelInequalities:
    """Test suite for the kernel inequality report"""

    def setup_method(self):
        """Set up test fixtures"""
        self.cfg = DEFAULT_KERNEL_CONFIG

    def test_report_rows(self):
        """One row per heat time, scaled columns bounded across the grid"""
        assert DEFAULT_T_GRID == tuple(4.0**-k for k in range(4, 8)), "Report grid is 4^-4 .. 4^-7"
        rows = kernel_inequality_report(self.cfg, DEFAULT_T_GRID)
        assert [row.t for row in rows] == list(DEFAULT_T_GRID)
        assert all(isinstance(row, KernelInequalityRow) for row in rows)

        print()
        for row in rows:
            print(
                f"  t={row.t:.3e}  t*M4={row.fourth_moment_scaled:.4f}  "
                f"sqrt(t)*sup={row.sup_scaled:.4f}  change={row.change_kernel_energy:.4f}"
            )
            assert row.fourth_moment_scaled > 0.0
            assert row.sup_scaled > 0.0
            assert row.change_kernel_energy > 0.0

        for column in ("fourth_moment_scaled", "sup_scaled", "change_kernel_energy"):
            ratio = column_ratio(rows, column)
            assert ratio <= 10.0, f"{column} varies by a factor {ratio:.2f} over the t-grid"

    def test_fourth_moment_grows_like_inverse_time(self):
        """int |grad q_t|^4 increases as t decreases"""
        values = [fourth_moment(t, self.cfg) for t in (4.0**-3, 4.0**-4, 4.0**-5)]
        assert values[0] < values[1] < values[2]

    def test_large_time_fourth_moment(self):
        """At t = 1/2 only the four shortest modes matter"""
        t = 0.5
        amplitude = math.exp(-4.0 * math.pi**2 * t) / (2.0 * math.pi)
        # grad q_t ~ -amplitude * (sin(2 pi x1), sin(2 pi x2)) * 2
        g = 2.0 * amplitude
        expected = g**4 * (3.0 / 8.0 + 3.0 / 8.0 + 2.0 * 0.25)
        assert fourth_moment(t, self.cfg) == pytest.approx(expected, rel=1e-6)

    def test_rejects_out_of_range_times(self):
        """Report times must lie in [1e-5, 1/4]"""
        with pytest.raises(InvalidArgumentError):
            kernel_inequality_report(self.cfg, (0.5,))
        with pytest.raises(InvalidArgumentError):
            kernel_inequality_report(self.cfg, (1e-6,))

    def test_accuracy_cap(self):
        """The change-of-kernel sum at t = 1e-5 exceeds the default mode cap"""
        with pytest.raises(AccuracyError) as info:
            change_kernel_energy(1e-5, self.cfg)
        assert info.value.required > info.value.limit

    def test_column_ratio(self):
        """max / min over rows"""
        rows = [
            KernelInequalityRow(t=0.1, fourth_moment_scaled=1.0, sup_scaled=2.0, change_kernel_energy=0.5),
            KernelInequalityRow(t=0.01, fourth_moment_scaled=4.0, sup_scaled=2.0, change_kernel_energy=1.0),
        ]
        assert column_ratio(rows, "fourth_moment_scaled") == 4.0
        assert column_ratio(rows, "sup_scaled") == 1.0
        assert np.isclose(column_ratio(rows, "change_kernel_energy"), 2.0)

    def test_row_export_plain_floats(self):
        """Exported rows hold plain float text even for numpy scalars"""
        row = KernelInequalityRow(
            t=np.float64(0.25),
            fourth_moment_scaled=np.float64(1e-4),
            sup_scaled=np.float64(0.5),
            change_kernel_energy=np.float64(0.125),
        )
        exported = row.to_dict()
        assert exported["t"] == "0.25"
        assert all(float(value) > 0.0 and "np." not in value for value in exported.values())
