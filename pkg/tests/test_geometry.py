import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapfield.geometry import (MAX_CHAIN_COUNT, KelvinGeometry, fixed_points,
                               image_chains, kelvin_map_r1, kelvin_map_r2,
                               x_sequence)


def x_sequence_by_recursion(eps, n):
    # independent oracle: the defining recursion, stable since the map
    # contracts toward its attracting fixed point
    x = 1.0
    for _ in range(n - 1):
        x = 2.0 + eps - 1.0 / x
    return x


class TestKelvinMaps:
    def test_tangent_spheres_boundary_point(self):
        # eps -> 0: the near-boundary point maps to itself
        assert kelvin_map_r2(0.0, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_r1_at_gap_edge_direct_formula(self):
        eps = 0.01
        # independent extended-precision evaluation of the defining map
        with mpmath.workdps(40):
            e = mpmath.mpf("0.01")
            expected = float(1 / (e / 2 + 1 + e / 2) - (1 + e / 2))
        # the map subtracts O(1) quantities, so a few ulps of 1.0 remain
        assert kelvin_map_r1(eps / 2, eps) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(-0.0149009900990099, abs=1e-15)

    def test_images_inside_chords(self):
        eps = 0.05
        c = 1 + eps / 2
        for x in np.linspace(-eps / 2, eps / 2, 7):
            assert -c < kelvin_map_r1(x, eps) < -eps / 2 + 1e-15
            assert eps / 2 - 1e-15 < kelvin_map_r2(x, eps) < c

    def test_domain_violations_name_the_sphere(self):
        with pytest.raises(ValueError, match="B1"):
            kelvin_map_r1(-0.1, 0.05)
        with pytest.raises(ValueError, match="B2"):
            kelvin_map_r2(0.1, 0.05)

    def test_composed_map_conjugacy(self):
        # the B2-frame distance of the B1 image equals 2 + eps - 1/xi
        eps = 0.07
        c = 1 + eps / 2
        for x in np.linspace(-eps / 2, eps / 2, 5):
            xi = x + c
            assert c - kelvin_map_r1(x, eps) == pytest.approx(
                2 + eps - 1 / xi, rel=1e-14)


class TestFixedPoints:
    def test_degenerate_limit(self):
        # eps -> 0+: both roots collapse to 1 and d -> 1
        g = fixed_points(1e-14)
        assert g.p1 == pytest.approx(1.0, abs=1e-6)
        assert g.p2 == pytest.approx(1.0, abs=1e-6)
        assert g.d == pytest.approx(1.0, abs=1e-6)

    def test_closed_form_extended_precision(self):
        with mpmath.workdps(40):
            e = mpmath.mpf("0.01")
            expected = float(1 + mpmath.sqrt(e + (e / 2) ** 2) + e / 2)
        g = fixed_points(0.01)
        assert g.p2 == pytest.approx(expected, abs=1e-15)
        assert 2 + 0.01 - 1 / g.p2 == pytest.approx(g.p2, abs=1e-12)

    @pytest.mark.parametrize("eps", [1e-2, 1e-4])
    def test_root_expansion(self, eps):
        g = fixed_points(eps)
        assert abs(g.p2 - 1 - math.sqrt(eps) - eps / 2) <= eps ** 1.5

    @pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-5, 0.2])
    def test_both_roots_and_vieta(self, eps):
        g = fixed_points(eps)
        assert g.p1 < 1 < g.p2
        for p in (g.p1, g.p2):
            assert 2 + eps - 1 / p == pytest.approx(p, abs=1e-12)
        assert g.p1 * g.p2 == pytest.approx(1.0, abs=1e-13)
        assert g.p1 + g.p2 == pytest.approx(2 + eps, abs=1e-13)
        assert g.d > 1
        assert 0 < g.c0 < 1

    def test_eps_out_of_range(self):
        for eps in (-1.0, 0.0, 0.3, 1.0):
            with pytest.raises(ValueError):
                fixed_points(eps)

    def test_double_precision_mode(self, monkeypatch):
        monkeypatch.setenv("GAPFIELD_PRECISION", "double")
        g = fixed_points(0.01)
        monkeypatch.delenv("GAPFIELD_PRECISION")
        ge = fixed_points(0.01)
        assert g.p2 == pytest.approx(ge.p2, rel=1e-13)
        assert g.c0 == pytest.approx(ge.c0, rel=1e-10)


class TestXSequence:
    def test_first_element_exact(self):
        g = fixed_points(0.01)
        assert abs(x_sequence(g, 1) - 1.0) <= 1e-14

    def test_second_element(self):
        eps = 0.01
        g = fixed_points(eps)
        assert x_sequence(g, 2) == pytest.approx(1 + eps, abs=1e-13)

    @pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
    def test_closed_form_matches_recursion(self, eps):
        g = fixed_points(eps)
        n_max = int(2 / math.sqrt(eps))
        for n in list(range(1, 20)) + [n_max // 2, n_max]:
            xn = x_sequence(g, n)
            assert xn == pytest.approx(x_sequence_by_recursion(eps, n),
                                       rel=1e-12)

    def test_drift_envelope(self):
        eps = 1e-4
        g = fixed_points(eps)
        for n in range(1, 51):
            xn = x_sequence(g, n)
            assert abs(xn - 1 - (n - 1) * eps) <= 10 * n * n * eps ** 1.5

    def test_large_n_saturates_at_fixed_point(self):
        g = fixed_points(1e-3)
        assert x_sequence(g, 10 ** 9) == pytest.approx(g.p2, rel=1e-12)

    def test_invalid_n(self):
        g = fixed_points(1e-3)
        with pytest.raises(ValueError):
            x_sequence(g, 0)

    @given(eps=st.floats(min_value=1e-6, max_value=0.2),
           n=st.integers(min_value=1, max_value=60))
    @settings(max_examples=60, deadline=None)
    def test_moebius_conjugacy_property(self, eps, n):
        g = fixed_points(eps)
        assert 2 + eps - 1 / x_sequence(g, n) == pytest.approx(
            x_sequence(g, n + 1), rel=1e-12)


class TestImageChains:
    def test_midpoint_symmetry(self):
        r_a, r_b = image_chains(0.0, 0.01, 6)
        assert r_a[0] == pytest.approx(r_b[0], rel=1e-14)

    @pytest.mark.parametrize("eps", [1e-2, 1e-3])
    def test_band_and_floor(self, eps):
        count = int(1 / (20 * math.sqrt(eps))) + 40
        for x in (0.0, eps / 4, -eps / 2):
            r_a, r_b = image_chains(x, eps, count)
            assert np.all(r_a >= eps / 2 - 1e-15)
            assert np.all(r_a <= 2 * math.sqrt(eps))
            assert np.all(r_b >= eps / 2 - 1e-15)
            assert np.all(r_b <= 2 * math.sqrt(eps))
            floor_start = int(1 / (20 * math.sqrt(eps)))
            assert np.all(r_a[floor_start:] >= math.sqrt(eps) / 40)
            assert np.all(r_b[floor_start:] >= math.sqrt(eps) / 40)

    def test_limit_is_near_sqrt_eps(self):
        eps = 1e-4
        r_a, _ = image_chains(0.0, eps, 4000)
        # chains converge to p2 - 1 - eps/2 = sqrt(eps) + O(eps)
        assert r_a[-1] == pytest.approx(math.sqrt(eps), rel=0.05)

    @given(eps=st.floats(min_value=1e-5, max_value=0.2),
           frac=st.floats(min_value=-1.0, max_value=1.0))
    @settings(max_examples=40, deadline=None)
    def test_monotone_increasing_property(self, eps, frac):
        x = frac * eps / 2
        r_a, r_b = image_chains(x, eps, 50)
        assert np.all(np.diff(r_a) > -1e-16)
        assert np.all(np.diff(r_b) > -1e-16)

    def test_validation(self):
        with pytest.raises(ValueError):
            image_chains(0.1, 0.01, 5)
        with pytest.raises(ValueError):
            image_chains(0.0, 0.01, 0)
        with pytest.raises(ValueError, match="MAX_CHAIN_COUNT"):
            image_chains(0.0, 0.01, MAX_CHAIN_COUNT + 1)


def test_geometry_is_immutable():
    g = fixed_points(0.01)
    assert isinstance(g, KelvinGeometry)
    with pytest.raises(Exception):
        g.p2 = 2.0
