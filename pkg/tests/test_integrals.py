#!/usr/bin/env python3
"""
Tests for the integrals of optimal plans against the linearization field
"""

import pytest
from dotenv import load_dotenv

from kernels.config import DEFAULT_KERNEL_CONFIG
from models.errors import InvalidArgumentError
from models.field import pairing_value, sample_uniform
from transport.integrals import transport_integrals
from transport.semidiscrete import default_grid_m, solve


load_dotenv()


class TestTransportIntegrals:
    """Test suite for plan integrals"""

    def setup_method(self):
        """Set up test fixtures"""
        self.cfg = DEFAULT_KERNEL_CONFIG
        self.sample = sample_uniform(16, 53)
        self.sol = solve(self.sample, default_grid_m(16))

    def test_quasi_orthogonality_identity(self):
        """disp_sq_mean = nmap_err + dirichlet_quadrature + 2 quasi_orth"""
        res = transport_integrals(self.sol, self.sample, 0.01, self.cfg)
        rebuilt = res.nmap_err + res.dirichlet_quadrature + 2.0 * res.quasi_orth
        print(f"\n|T - id|^2 = {res.disp_sq_mean:.8f}, rebuilt = {rebuilt:.8f}")
        assert abs(res.disp_sq_mean - rebuilt) <= 1e-6 * max(1.0, res.disp_sq_mean)
        assert res.disp_sq_mean == pytest.approx(self.sol.cost, rel=1e-12)

    def test_pushforward_identity(self):
        """int (f(T y) - f(y)) dy equals int f d(mu_n - 1)"""
        res = transport_integrals(self.sol, self.sample, 0.01, self.cfg, path_nodes=0)
        assert abs(res.ftc_lhs - pairing_value(self.sample, 0.01, self.cfg)) <= 1e-6

    def test_path_integrals(self):
        """The line integral reproduces ftc_lhs; with the remainder it gives the pixel pairing"""
        res = transport_integrals(self.sol, self.sample, 0.05, self.cfg, path_nodes=16)
        assert res.path_ftc == pytest.approx(res.ftc_lhs, abs=1e-5)
        pixel_pairing = res.quasi_orth + res.dirichlet_quadrature
        assert res.path_ftc + res.suboptimal_remainder == pytest.approx(pixel_pairing, abs=1e-10)
        assert res.path_energy >= 0.0 and res.path_deviation >= 0.0

    def test_skipping_path_integrals(self):
        """path_nodes = 0 leaves the path fields unset"""
        res = transport_integrals(self.sol, self.sample, 0.01, self.cfg, path_nodes=0)
        assert res.path_energy is None
        assert res.suboptimal_remainder is None
        assert "path_energy" not in res.to_dict()

    def test_large_time_field_vanishes(self):
        """At t = 1 the field is negligible, so the Poisson residual is the displacement"""
        res = transport_integrals(self.sol, self.sample, 1.0, self.cfg, path_nodes=0)
        assert res.nmap_err == pytest.approx(res.disp_sq_mean, abs=1e-12)
        assert res.map_poisson_err == pytest.approx(res.disp_sq_mean, abs=1e-12)

    def test_validation(self):
        """Mismatched samples and negative node counts are rejected"""
        with pytest.raises(InvalidArgumentError):
            transport_integrals(self.sol, sample_uniform(8, 53), 0.01, self.cfg)
        with pytest.raises(InvalidArgumentError):
            transport_integrals(self.sol, self.sample, 0.01, self.cfg, path_nodes=-1)
