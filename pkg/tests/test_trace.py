import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import chebyshev as C

from gapfield.geometry import image_chains
from gapfield.solver import _chebint_rows, _taumul_rows
from gapfield.trace import (AxisTrace, TraceBuildError, TraceDomainError,
                            build_trace, reflect_about_sphere,
                            reflect_unit_dx, reflect_unit_dy)


def const_trace(value=1.0, domain=(0.0, 1.0), acc=1e-13):
    return build_trace(
        lambda s: value * np.ones_like(np.asarray(s, dtype=float)),
        domain, acc)


class TestBuild:
    def test_constant_is_single_exact_piece(self):
        t = const_trace()
        assert t.npieces == 1
        assert t.coeffs[0][0] == pytest.approx(1.0, abs=1e-14)
        assert np.max(np.abs(t.coeffs[0][1:])) < 1e-13

    def test_inverse_cube(self):
        t = build_trace(lambda x: 1.0 / (2.0 * np.asarray(x, float) ** 3),
                        (1.0, 3.0), 1e-12)
        assert t(2.0) == pytest.approx(1.0 / 16.0, abs=1e-12)

    def test_nonconvergent_function_raises_with_interval(self):
        # jump at a non-dyadic point: bisection can never straddle it exactly
        c = 1.0 / np.sqrt(7.0)
        f = lambda x: np.sign(np.asarray(x, dtype=float) - c)
        with pytest.raises(TraceBuildError) as err:
            build_trace(f, (0.0, 1.0), 1e-10, max_pieces=64)
        assert err.value.interval is not None

    def test_dyadic_kink_is_resolved(self):
        # a kink that lands on a bisection point splits into exact pieces
        f = lambda x: np.abs(np.asarray(x, dtype=float) - 0.5)
        t = build_trace(f, (0.0, 1.0), 1e-12)
        xs = np.linspace(0.0, 1.0, 101)
        assert np.max(np.abs(t(xs) - f(xs))) < 1e-12

    def test_non_finite_rejected(self):
        f = lambda x: np.sqrt(np.asarray(x, dtype=float) - 0.5)
        with np.errstate(invalid="ignore"):
            with pytest.raises(TraceBuildError):
                build_trace(f, (0.0, 1.0), 1e-10)

    def test_pole_rejected(self):
        f = lambda x: 1.0 / np.asarray(x, dtype=float)
        with pytest.raises(TraceBuildError):
            build_trace(f, (0.0, 1.0), 1e-10)


class TestEvaluation:
    def test_out_of_domain(self):
        t = const_trace()
        with pytest.raises(TraceDomainError):
            t(1.5)

    def test_vectorized(self):
        t = build_trace(lambda x: np.sin(np.asarray(x, float)), (0.0, 2.0), 1e-13)
        xs = np.linspace(0.0, 2.0, 37)
        assert np.max(np.abs(t(xs) - np.sin(xs))) < 1e-12


class TestCalculus:
    def test_moment_integral_constant(self):
        t = const_trace()
        assert t.moment_integral(0.7) == pytest.approx(0.49 / 2.0, abs=1e-14)

    def test_moment_integral_linear(self):
        t = build_trace(lambda s: np.asarray(s, float), (0.0, 1.0), 1e-13)
        assert t.moment_integral(1.0) == pytest.approx(1.0 / 3.0, abs=1e-14)

    def test_moment_requires_zero_cover(self):
        t = build_trace(lambda s: np.asarray(s, float), (0.5, 1.0), 1e-13)
        with pytest.raises(TraceDomainError):
            t.moment_integral(0.9)

    def test_derivative_and_antiderivative(self):
        t = build_trace(lambda x: np.sin(np.asarray(x, float)), (0.0, 1.0), 1e-13)
        assert t.derivative(1)(0.5) == pytest.approx(np.cos(0.5), abs=1e-10)
        A = t.antiderivative()
        assert A(1.0) == pytest.approx(1.0 - np.cos(1.0), abs=1e-12)

    def test_derivative_order_capped(self):
        t = const_trace()
        with pytest.raises(ValueError):
            t.derivative(5)

    def test_weighted_integral(self):
        t = build_trace(lambda s: np.asarray(s, float) ** 2, (0.0, 2.0), 1e-13)
        # integral of (1 - s) s^2 over [0.5, 1.5]
        exact = (1.5 ** 3 - 0.5 ** 3) / 3.0 - (1.5 ** 4 - 0.5 ** 4) / 4.0
        assert t.integral(0.5, 1.5, weight=(1.0, -1.0)) == pytest.approx(
            exact, abs=1e-13)

    def test_affine_precompose(self):
        t = build_trace(lambda x: np.sin(np.asarray(x, float)), (0.0, 1.0), 1e-13)
        s = t.affine_precompose(-1.0, 1.0)  # s(y) = sin(1 - y)
        assert s(0.3) == pytest.approx(np.sin(0.7), abs=1e-12)
        assert s.domain == pytest.approx((0.0, 1.0))

    def test_restrict(self):
        t = build_trace(lambda x: np.exp(np.asarray(x, float)), (0.0, 2.0), 1e-13)
        r = t.restrict(0.5, 1.25)
        assert r.domain == pytest.approx((0.5, 1.25))
        xs = np.linspace(0.5, 1.25, 11)
        assert np.max(np.abs(r(xs) - np.exp(xs))) < 1e-11


class TestUnitReflections:
    def test_constant_input_closed_form(self):
        # unit tangential background: out(x) = 1/(2 x^3)
        r = reflect_unit_dy(const_trace())
        xs = np.linspace(1.0, 4.0, 21)
        assert np.max(np.abs(r(xs) - 0.5 / xs ** 3)) < 1e-12

    def test_zero_input(self):
        r = reflect_unit_dy(const_trace(0.0))
        assert abs(r(2.5)) < 1e-13

    def test_linear_input_hand_integrated(self):
        g = build_trace(lambda s: np.asarray(s, float), (0.0, 1.0), 1e-13)
        r = reflect_unit_dy(g)
        # (1/x^3)(1/x) - (1/x)(1/(3x^3)) = (2/3) x^-4; at 2 -> 1/24
        assert r(2.0) == pytest.approx(1.0 / 24.0, abs=1e-13)

    def test_dx_constant(self):
        r = reflect_unit_dx(const_trace())
        assert r(1.0) == pytest.approx(-1.0, abs=1e-12)

    def test_dx_zero(self):
        r = reflect_unit_dx(const_trace(0.0))
        assert abs(r(3.0)) < 1e-13

    def test_endpoint_identity(self):
        # at x = 1 the output equals g(1) - integral_0^1 s g(s) ds
        g = build_trace(lambda s: np.cos(np.asarray(s, float)), (0.0, 1.0), 1e-13)
        r = reflect_unit_dy(g)
        from scipy.integrate import quad
        ref = np.cos(1.0) - quad(lambda s: s * np.cos(s), 0.0, 1.0,
                                 epsabs=1e-14)[0]
        assert r(1.0) == pytest.approx(ref, abs=1e-10)

    def test_requires_unit_chord(self):
        g = build_trace(lambda s: np.asarray(s, float), (0.2, 1.0), 1e-13)
        with pytest.raises(TraceDomainError):
            reflect_unit_dy(g)

    @given(a=st.floats(min_value=-2.0, max_value=2.0),
           b=st.floats(min_value=-2.0, max_value=2.0))
    @settings(max_examples=25, deadline=None)
    def test_linearity_property(self, a, b):
        g1 = build_trace(lambda s: np.asarray(s, float), (0.0, 1.0), 1e-13)
        g2 = build_trace(lambda s: np.asarray(s, float) ** 2 + 1.0,
                         (0.0, 1.0), 1e-13)
        combo = build_trace(
            lambda s: a * np.asarray(s, float) + b * (np.asarray(s, float) ** 2 + 1.0),
            (0.0, 1.0), 1e-13)
        r = reflect_unit_dy(combo)
        r1 = reflect_unit_dy(g1)
        r2 = reflect_unit_dy(g2)
        xs = np.linspace(1.0, 4.0, 9)
        assert np.max(np.abs(r(xs) - a * r1(xs) - b * r2(xs))) < 1e-10 * (
            1.0 + abs(a) + abs(b))

    @given(coeffs=st.lists(st.floats(min_value=0.0, max_value=3.0),
                           min_size=1, max_size=5))
    @settings(max_examples=30, deadline=None)
    def test_four_sign_ladder_property(self, coeffs):
        # polynomials with nonnegative coefficients have all derivatives
        # nonnegative on [0, 1]; the reflection's derivatives then alternate
        def g_fn(s):
            s = np.asarray(s, dtype=float)
            return sum(c * s ** k for k, c in enumerate(coeffs))

        g = build_trace(g_fn, (0.0, 1.0), 1e-13)
        r = reflect_unit_dy(g, x_max=3.0)
        xs = np.linspace(1.02, 2.9, 31)
        scale = max(float(np.max(np.abs(r(xs)))), 1e-12)
        for order in range(0, 5):
            tr = r if order == 0 else r.derivative(order)
            vals = (-1.0) ** order * tr(xs)
            floor = -1e-6 * scale if order <= 2 else -2e-3 * scale
            assert np.all(vals >= floor / max(xs[0] - 1.0, 0.02) ** order)

    def test_sign_propagation_monotone(self):
        # nonnegative nondecreasing input: output nonnegative nonincreasing
        g = build_trace(lambda s: np.asarray(s, float) ** 3 + 0.2,
                        (0.0, 1.0), 1e-13)
        r = reflect_unit_dy(g)
        xs = np.linspace(1.0, 4.0, 41)
        assert np.all(r(xs) >= -1e-13)
        assert np.all(np.diff(r(xs)) <= 1e-13)


class TestSphereReflections:
    def test_b1_closed_form(self):
        eps = 0.1
        g = const_trace(domain=(-1.2, 1.2))
        r = reflect_about_sphere(g, "B1", eps, "DY", x_max=2.0)
        assert r(0.0) == pytest.approx(1.0 / (2.0 * 1.05 ** 3), rel=1e-10)
        xs = np.linspace(-eps / 2, 2.0, 50)
        ref = 1.0 / (2.0 * (1.0 + eps / 2 + xs) ** 3)
        assert np.max(np.abs(r(xs) - ref) / ref) < 1e-10

    def test_b2_mirror_identity(self):
        eps = 0.1
        g = const_trace(domain=(-1.2, 1.2))
        r1 = reflect_about_sphere(g, "B1", eps, "DY", x_max=2.0)
        r2 = reflect_about_sphere(g, "B2", eps, "DY", x_max=2.0)
        for x in np.linspace(-eps / 2, eps / 2, 9):
            assert r2(x) == pytest.approx(r1(-x), rel=1e-11)
        assert r2(0.0) == pytest.approx(1.0 / (2.0 * 1.05 ** 3), rel=1e-10)

    def test_b1_dx_at_gap_edge(self):
        eps = 0.1
        g = const_trace(domain=(-1.2, 1.2))
        r = reflect_about_sphere(g, "B1", eps, "DX", x_max=2.0)
        assert r(eps / 2) == pytest.approx(-1.0 / (1.0 + eps) ** 3, rel=1e-10)

    def test_double_reflection_reproduces_product_factors(self):
        # two nested radial reflections at depth two match the image-charge
        # product form evaluated from the chain entries
        eps = 0.1
        c = 1.0 + eps / 2.0
        g = const_trace(domain=(-3.2, 3.2))
        t1 = reflect_about_sphere(g, "B2", eps, "DX", x_max=2.5)
        t2 = reflect_about_sphere(t1, "B1", eps, "DX", x_max=2.0)
        r_b = image_chains(0.0, eps, 2)[1]
        expected = ((c - r_b[0]) * (c - r_b[1])) ** 3
        assert t2(0.0) == pytest.approx(expected, rel=1e-9)

    def test_domain_mismatch_names_missing_chord(self):
        g = const_trace(domain=(-0.5, 1.2))
        with pytest.raises(TraceDomainError, match="B1"):
            reflect_about_sphere(g, "B1", 0.1, "DY")

    def test_argument_validation(self):
        g = const_trace(domain=(-1.2, 1.2))
        with pytest.raises(ValueError):
            reflect_about_sphere(g, "B3", 0.1, "DY")
        with pytest.raises(ValueError):
            reflect_about_sphere(g, "B1", 0.1, "DZ")


class TestVectorizedChebyshevHelpers:
    @given(data=st.lists(st.floats(min_value=-2, max_value=2),
                         min_size=3, max_size=8))
    @settings(max_examples=40, deadline=None)
    def test_taumul_matches_chebmul(self, data):
        c = np.asarray(data)
        got = _taumul_rows(c[None, :])[0]
        ref = C.chebmul(c, [0.0, 1.0])  # trims trailing zeros
        ref = np.pad(ref, (0, len(got) - len(ref)))
        assert np.max(np.abs(got - ref)) < 1e-12

    @given(data=st.lists(st.floats(min_value=-2, max_value=2),
                         min_size=3, max_size=8),
           scl=st.floats(min_value=0.1, max_value=2.0))
    @settings(max_examples=40, deadline=None)
    def test_chebint_rows_matches_chebint(self, data, scl):
        c = np.asarray(data)
        got = _chebint_rows(c[None, :], np.array([scl]))[0]
        ref = C.chebint(c, m=1, lbnd=-1.0, scl=scl)
        assert np.max(np.abs(got - ref)) < 1e-12


def test_dump_csv(tmp_path):
    t = const_trace()
    out = tmp_path / "trace.csv"
    t.dump_csv(out, n=11)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "x,value"
    assert len(lines) == 12
