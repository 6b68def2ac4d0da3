#!/usr/bin/env python3
"""
Tests for the Green-function gradient and the mollified Green gradient
"""

import math

import numpy as np
import pytest
from dotenv import load_dotenv

from kernels.config import DEFAULT_KERNEL_CONFIG
from kernels.green import (
    MAX_MOLLIFIER_RADIUS,
    green_gradient,
    mollified_green_gradient,
    mollified_green_gradient_spectral,
    mollifier,
    mollifier_normalization,
    mollifier_transform,
)
from kernels.heat import grad_q
from models.errors import DomainError, InvalidArgumentError


load_dotenv()


class TestGreenGradient:
    """Test suite for grad q_0"""

    def setup_method(self):
        """Set up test fixtures"""
        self.cfg = DEFAULT_KERNEL_CONFIG
        self.rng = np.random.default_rng(17)

    def test_singularity_constant(self):
        """|grad q_0(x) + x / (2 pi |x|^2)| <= C |x| with C <= 1 near the origin"""
        radii = self.rng.uniform(1e-3, 0.05, 20)
        angles = self.rng.uniform(0.0, 2.0 * math.pi, 20)
        near = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
        singular = -near / (2.0 * math.pi * radii[:, None] ** 2)
        constant = np.max(np.linalg.norm(green_gradient(near, self.cfg) - singular, axis=1) / radii)
        print(f"\nRecorded singularity constant C = {constant:.4f}")
        assert constant <= 1.0

    def test_antisymmetry(self):
        """grad q_0 is odd"""
        x = self.rng.uniform(-0.45, 0.45, (20, 2))
        assert np.allclose(green_gradient(-x, self.cfg), -green_gradient(x, self.cfg), atol=1e-12)

    def test_small_time_limit(self):
        """grad q_t converges to grad q_0 away from the origin"""
        x = np.array([0.3, 0.1])
        gap = np.max(np.abs(grad_q(1e-7, x, self.cfg) - green_gradient(x, self.cfg)))
        assert gap <= 1e-4, f"grad q_t at t=1e-7 differs from grad q_0 by {gap:.3e}"

    def test_singular_at_origin(self):
        """The origin is outside the domain"""
        with pytest.raises(DomainError):
            green_gradient((0.0, 0.0))
        with pytest.raises(DomainError):
            green_gradient([[0.1, 0.1], [1.0, 0.0]])


class TestMollifier:
    """Test suite for eta_r and grad(eta_r * q_0)"""

    def setup_method(self):
        """Set up test fixtures"""
        self.cfg = DEFAULT_KERNEL_CONFIG

    def test_bump_support(self):
        """eta_r vanishes outside B_r and is normalized"""
        assert mollifier([[0.2, 0.0]], 0.1)[0] == 0.0
        assert mollifier([[0.0, 0.0]], 0.1)[0] == pytest.approx(
            math.exp(-1.0) / (mollifier_normalization() * 0.01)
        )
        assert float(mollifier_transform(0.0, self.cfg)) == pytest.approx(1.0, abs=1e-8)

    def test_zero_at_origin(self):
        """grad(eta_r * q_0)(0) = 0 by symmetry"""
        value = mollified_green_gradient(0.1, np.zeros(2), self.cfg)
        assert np.max(np.abs(value)) <= 1e-12

    def test_far_field_matches_green(self):
        """Away from the lattice the mollified gradient equals grad q_0 up to C r / |z|^2"""
        r = 0.1
        far = np.array([[0.35, 0.1], [-0.3, 0.32], [0.05, -0.45]])
        gap = np.linalg.norm(mollified_green_gradient(r, far, self.cfg) - green_gradient(far, self.cfg), axis=1)
        scaled = np.max(gap * np.sum(far * far, axis=1) / r)
        print(f"\nRecorded far-field constant C = {scaled:.3e}")
        assert scaled <= 1.0

    def test_quadrature_refinement(self):
        """Doubling both quadrature resolutions moves the value by at most 1e-7"""
        z = np.array([0.07, -0.04])
        coarse = mollified_green_gradient(0.1, z, self.cfg)
        fine = mollified_green_gradient(0.1, z, self.cfg.refined())
        assert np.max(np.abs(coarse - fine)) <= 1e-7

    def test_spectral_agrees_with_quadrature(self):
        """The Fourier series and the polar quadrature agree"""
        z = np.array([[0.07, -0.04], [0.2, 0.15]])
        direct = mollified_green_gradient(0.1, z, self.cfg)
        spectral = mollified_green_gradient_spectral(0.1, z, self.cfg)
        assert np.max(np.abs(direct - spectral)) <= 1e-4

    def test_radius_validation(self):
        """Radii outside (0, 1/4] are rejected"""
        for r in (0.0, -0.1, MAX_MOLLIFIER_RADIUS + 1e-3):
            with pytest.raises(InvalidArgumentError):
                mollified_green_gradient(r, (0.1, 0.1))
