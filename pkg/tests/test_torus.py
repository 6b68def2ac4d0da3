#!/usr/bin/env python3
"""
Tests for the flat torus geometry
"""

import numpy as np
import pytest
from dotenv import load_dotenv

from geometry.torus import (
    Displacement,
    TorusPoint,
    dist_sq,
    dist_sq_array,
    grid_nodes,
    in_ball,
    nearest_image,
    nearest_image_array,
    pixel_centers,
    wrap,
    wrap_array,
)
from models.errors import InvalidArgumentError


load_dotenv()


class TestTorusGeometry:
    """Test suite for coordinates, nearest images and balls"""

    def setup_method(self):
        """Set up test fixtures"""
        self.rng = np.random.default_rng(7)

    def test_wrap_into_unit_square(self):
        """Wrapped coordinates land in [0, 1)"""
        raw = self.rng.uniform(-5.0, 5.0, (200, 2))
        wrapped = wrap_array(raw)
        assert np.all(wrapped >= 0.0) and np.all(wrapped < 1.0), "Wrapped point outside [0, 1)"
        assert np.allclose(np.round(raw - wrapped), raw - wrapped), "Wrap changed the class mod 1"

        assert wrap([1.0, -1.0]) == TorusPoint(0.0, 0.0)
        assert wrap([-1e-300, 0.5]).x1 == 0.0, "Tiny negative coordinate must wrap to 0"

    def test_nearest_image_range(self):
        """Nearest-image components lie in [-1/2, 1/2) with ties toward -1/2"""
        a = self.rng.uniform(0.0, 1.0, (500, 2))
        b = self.rng.uniform(0.0, 1.0, (500, 2))
        v = nearest_image_array(a, b)
        assert np.all(v >= -0.5) and np.all(v < 0.5)
        assert np.allclose(np.round(a - b - v), a - b - v)

        assert nearest_image(TorusPoint(0.75, 0.0), TorusPoint(0.25, 0.0)) == Displacement(-0.5, 0.0)

    def test_distance_symmetry(self):
        """d(a, b) = d(b, a) and the maximal squared distance is 1/2"""
        a = TorusPoint(0.1, 0.9)
        b = TorusPoint(0.95, 0.05)
        assert dist_sq(a, b) == pytest.approx(dist_sq(b, a), abs=1e-15)
        assert dist_sq(a, b) == pytest.approx(0.15**2 + 0.15**2, abs=1e-15)
        assert dist_sq(TorusPoint(0.0, 0.0), TorusPoint(0.5, 0.5)) == pytest.approx(0.5)

    def test_in_ball(self):
        """Balls are open and measured with the geodesic distance"""
        center = TorusPoint(0.0, 0.0)
        assert in_ball(TorusPoint(0.95, 0.0), center, 0.1)
        assert not in_ball(TorusPoint(0.1, 0.0), center, 0.1), "Ball must be open"
        with pytest.raises(InvalidArgumentError):
            in_ball(center, center, 0.6)
        with pytest.raises(InvalidArgumentError):
            in_ball(center, center, 0.0)

    def test_distance_matches_image_search(self):
        """The nearest image is the shortest of the nine lattice translates"""
        a = self.rng.uniform(0.0, 1.0, (300, 2))
        b = self.rng.uniform(0.0, 1.0, (300, 2))
        shifts = np.array([(k1, k2) for k1 in (-1, 0, 1) for k2 in (-1, 0, 1)], dtype=float)
        images = a[:, None, :] - b[:, None, :] + shifts[None, :, :]
        brute = np.min(np.sum(images * images, axis=-1), axis=1)
        assert np.allclose(dist_sq_array(a, b), brute, atol=1e-15)
        for i in range(10):
            assert dist_sq(TorusPoint(*a[i]), TorusPoint(*b[i])) == pytest.approx(brute[i], abs=1e-15)

    def test_metric_properties(self):
        """Geodesic distance obeys the triangle inequality and is translation invariant"""
        a, b, c = (self.rng.uniform(0.0, 1.0, (400, 2)) for _ in range(3))
        d_ab = np.sqrt(dist_sq_array(a, b))
        d_bc = np.sqrt(dist_sq_array(b, c))
        d_ac = np.sqrt(dist_sq_array(a, c))
        assert np.all(d_ac <= d_ab + d_bc + 1e-12), "Triangle inequality violated"

        shift = self.rng.uniform(-3.0, 3.0, (400, 2))
        moved = dist_sq_array(wrap_array(a + shift), wrap_array(b + shift))
        assert np.allclose(moved, dist_sq_array(a, b), atol=1e-12)

    def test_ball_area(self):
        """The share of pixel centers inside B_r(c) is pi r^2 wherever c sits"""
        centers = pixel_centers(256)
        r = 0.25
        for center in (TorusPoint(0.0, 0.0), TorusPoint(0.37, 0.93)):
            inside = sum(in_ball(TorusPoint(*p), center, r) for p in centers)
            share = inside / len(centers)
            assert share == pytest.approx(np.pi * r * r, abs=1e-3), f"Ball share {share:.5f} around {center}"

    def test_grids(self):
        """Pixel centers and nodes are row-major with the expected spacing"""
        centers = pixel_centers(4)
        assert centers.shape == (16, 2)
        assert np.allclose(centers[0], [0.125, 0.125])
        assert np.allclose(centers[1], [0.125, 0.375]), "Second index must vary fastest"
        nodes = grid_nodes(4)
        assert np.allclose(nodes[0], [0.0, 0.0])
        assert np.allclose(nodes[5], [0.25, 0.25])

    def test_rejects_non_finite(self):
        """Infinite coordinates are invalid"""
        with pytest.raises(InvalidArgumentError):
            wrap_array([np.inf, 0.0])
        with pytest.raises(InvalidArgumentError):
            wrap([0.1, 0.2, 0.3])
