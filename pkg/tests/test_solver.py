import math

import mpmath
import numpy as np
import pytest

from gapfield.config import FieldKind, GapConfig
from gapfield.geometry import fixed_points
from gapfield.solver import (SolverError, chain_identity_check,
                             dx_axis_series, dx_bounded_check, f_trace,
                             fundamental_equation_residual,
                             gradient_on_segment, gy_profile,
                             moment_inequality_check, moment_of_p,
                             p_far_value, p_trace, partial_dy_values,
                             solution_report, solve)
from gapfield.verify import perturbed_solution

# d_x u at the midpoint for the unit axial field, eps = 0.1, frozen from an
# extended-precision run of the product series (50 digits, full convergence)
DX_AT_MID_EPS01 = 3.139798790648987e-4


class TestSolve:
    def test_depth_one_partial_sum(self, solved):
        # first pair term evaluated at the segment midpoint
        eps = 0.1
        cfg = GapConfig(epsilon=eps, tol=1e-10)
        pv = partial_dy_values(cfg, [1], [1.0 + eps / 2.0])
        assert 1.0 + 2.0 * pv[1][0] == pytest.approx(1.0 + 1.0 / 1.05 ** 3,
                                                     abs=1e-12)

    def test_partial_sums_monotone_in_depth(self):
        eps = 1e-3
        cfg = GapConfig(epsilon=eps, tol=1e-8)
        pv = partial_dy_values(cfg, list(range(1, 10)), [1.0 + eps / 2.0])
        seq = [pv[d][0] for d in sorted(pv)]
        assert np.all(np.diff(seq) > -1e-14)

    def test_tail_bound_below_tol(self, solved):
        sol = solved(1e-3)
        assert sol.tail_bound < sol.config.tol

    def test_mirror_symmetry(self, solved):
        sol = solved(1e-3)
        xs = np.linspace(-5e-4, 5e-4, 11)
        assert np.max(np.abs(sol.rb1_dy(xs) - sol.rb2_dy(-xs))) < 1e-12

    def test_truncated_sum_vs_direct_linear_solve(self):
        # independent cross-check: the accumulated series against a dense
        # (I - A) solve on the same grid; agreement within the tail bound
        from gapfield.solver import ReflectionOperator
        eps = 1e-3
        cfg = GapConfig(epsilon=eps, tol=1e-8)
        sol = solve(cfg)
        op = ReflectionOperator(eps)
        n = op.size
        A = np.empty((n, n))
        eye = np.eye(n)
        for j in range(n):
            A[:, j] = op.apply(eye[:, j])
        direct = np.linalg.solve(np.eye(n) - A, op.initial_term(None))
        xi = np.array([1.0, 1.0 + eps / 2, 1.3, 2.0])
        from_series = p_trace(sol)(xi)
        from_direct = op.to_trace(direct, 1e-12)(xi)
        assert np.max(np.abs(from_series - from_direct)) < sol.tail_bound

    def test_max_depth_exhaustion_carries_diagnostics(self):
        cfg = GapConfig(epsilon=1e-4, tol=1e-10, max_depth=5)
        with pytest.raises(SolverError) as err:
            solve(cfg)
        assert err.value.diagnostics["depth"] == 5
        assert err.value.diagnostics["epsilon"] == 1e-4

    def test_x_linear_field_trivial(self):
        sol = solve(GapConfig(epsilon=1e-2, field_kind=FieldKind.X_LINEAR))
        gx, gy, gz = gradient_on_segment(sol, 0.0)
        assert gy == 0.0
        assert gz == 0.0

    def test_custom_field_matches_linear_for_unit_dy(self, solved):
        # H = y + x/10 shares d_y H = 1, so the tangential profile matches
        # the plain linear solve
        eps = 1e-2
        cfg = GapConfig(
            epsilon=eps, field_kind=FieldKind.CUSTOM,
            custom_dy_trace=lambda x: np.ones_like(np.asarray(x, dtype=float)),
            custom_dx_trace=lambda x: 0.1 * np.ones_like(np.asarray(x, dtype=float)),
            tol=1e-8)
        xs1, gy1 = gy_profile(solve(cfg), n=21)
        xs2, gy2 = gy_profile(solved(eps), n=21)
        assert np.max(np.abs(gy1 - gy2)) < 4e-8


class TestGradient:
    def test_midpoint_symmetry(self, solved):
        sol = solved(1e-2)
        _, gy, gz = gradient_on_segment(sol, 0.0)
        assert gy == pytest.approx(1.0 + 2.0 * sol.rb1_dy(0.0), rel=1e-12)
        assert gz == 0.0

    def test_out_of_gap_rejected(self, solved):
        sol = solved(1e-2)
        with pytest.raises(ValueError):
            gradient_on_segment(sol, 0.01)

    def test_profile_spans_segment(self, solved):
        xs, gy = gy_profile(solved(1e-2), n=101)
        assert len(xs) == 101
        assert xs[0] == pytest.approx(-5e-3)
        assert np.all(gy > 1.0)


class TestPTrace:
    def test_requires_linear_field(self):
        sol = solve(GapConfig(epsilon=1e-2, field_kind=FieldKind.X_LINEAR))
        with pytest.raises(ValueError):
            p_trace(sol)

    def test_f_is_shifted_p(self, solved):
        sol = solved(1e-3)
        P = p_trace(sol)
        f = f_trace(sol)
        assert f(0.0) == pytest.approx(P(1.0), rel=1e-12)
        assert f(0.0) == pytest.approx(sol.rb1_dy(-5e-4), rel=1e-12)

    def test_positive_and_decreasing(self, solved):
        P = p_trace(solved(1e-3))
        xs = np.linspace(1.0, 1.5, 100)
        v = P(xs)
        assert np.all(v > 0)
        assert np.all(np.diff(v) < 0)

    def test_far_decay(self, solved):
        sol = solved(1e-3)
        assert abs(p_far_value(sol, 1e4)) < 10 * sol.config.tol
        # matches the stored trace where the domains overlap
        assert p_far_value(sol, 2.0) == pytest.approx(p_trace(sol)(2.0),
                                                      rel=1e-10)


class TestFundamentalEquation:
    def test_residual_small(self, solved):
        sol = solved(1e-2)
        res = fundamental_equation_residual(sol, np.linspace(1.0, 1.5, 50))
        assert res <= 5.0 * sol.tail_bound

    def test_residual_continuous_at_fixed_point(self, solved):
        sol = solved(1e-2)
        p2 = fixed_points(1e-2).p2
        grid = [p2 - 1e-6, p2, p2 + 1e-6]
        assert fundamental_equation_residual(sol, grid) <= 5.0 * sol.tail_bound

    def test_grid_out_of_range(self, solved):
        sol = solved(1e-2)
        with pytest.raises(ValueError):
            fundamental_equation_residual(sol, [0.5])
        with pytest.raises(ValueError):
            fundamental_equation_residual(sol, [2.5])

    def test_sensitive_to_constant_shift(self, solved):
        # shifting the trace by 0.1 must push the residual above 0.05
        sol = perturbed_solution(solved(1e-2), 0.1)
        res = fundamental_equation_residual(sol, np.linspace(1.0, 1.5, 50))
        assert res >= 0.05


class TestMomentInequality:
    def test_strict_margins(self, solved):
        eps = 1e-3
        sol = solved(eps)
        rep = moment_inequality_check(sol, np.linspace(1.0, 2.0 + eps, 50))
        assert rep["pass"]
        assert rep["min_margin"] > 0
        assert rep["integral_margin"] > 0

    def test_unit_window_bound(self, solved):
        # integral_0^1 s P(2+eps-s) ds < 1/2 at x = 1
        sol = solved(1e-3)
        assert moment_of_p(sol, 1.0)[0] < 0.5

    def test_upper_endpoint_strict(self, solved):
        eps = 1e-3
        sol = solved(eps)
        x = 2.0 + eps
        assert moment_of_p(sol, x)[0] < 0.5 / x ** 2


class TestChainIdentity:
    @pytest.mark.parametrize("eps", [1e-4, 1e-5])
    def test_residual_within_budget(self, solved, eps):
        sol = solved(eps)
        res = chain_identity_check(sol)
        assert res <= 10.0 * sol.tail_bound / p_trace(sol)(1.0)

    def test_degenerate_chain_is_fixed_point_identity(self, solved):
        # n0 = 1: the chain collapses to the identity at x = 1
        eps = 1e-2
        sol = solved(eps)
        P = p_trace(sol)
        lhs = P(1.0)
        rhs = P(2.0 + eps - 1.0) + 0.5 - moment_of_p(sol, 1.0)[0]
        assert chain_identity_check(sol) == pytest.approx(
            abs(lhs - rhs) / lhs, rel=1e-9)

    def test_sensitive_to_perturbation(self, solved):
        sol = perturbed_solution(solved(1e-4), 0.1)
        assert chain_identity_check(sol) > 1e-4


class TestDxSeries:
    def test_frozen_extended_precision_value(self):
        one = lambda x: np.ones_like(np.asarray(x, dtype=float))
        v = dx_axis_series(0.1, one, np.array([0.0]), tol=1e-12)
        assert v[0] == pytest.approx(DX_AT_MID_EPS01, rel=1e-6)

    def test_oracle_recomputation(self):
        # recompute the frozen constant with mpmath to guard the freeze
        with mpmath.workdps(30):
            e = mpmath.mpf("0.1")
            c = 1 + e / 2
            out = mpmath.mpf(1)
            for first_r2 in (True, False):
                g = mpmath.mpf(0)
                prod = mpmath.mpf(1)
                sign = 1
                use_r2 = first_r2
                for _ in range(2000):
                    g = (c - 1 / (c - g)) if use_r2 else (1 / (g + c) - c)
                    use_r2 = not use_r2
                    prod *= c - abs(g)
                    sign = -sign
                    out += sign * prod ** 3
                    if prod ** 3 < mpmath.mpf(10) ** -35:
                        break
            assert float(out) == pytest.approx(DX_AT_MID_EPS01, rel=1e-12)

    def test_requires_gap_points(self):
        one = lambda x: np.ones_like(np.asarray(x, dtype=float))
        with pytest.raises(ValueError):
            dx_axis_series(1e-2, one, np.array([0.1]))

    def test_linear_y_field_has_zero_dx(self, solved):
        gx, _, _ = gradient_on_segment(solved(1e-2), 1e-3)
        assert gx == 0.0

    def test_bounded_check_y_field_trivial(self):
        configs = [GapConfig(epsilon=e) for e in (1e-2, 1e-3)]
        rep = dx_bounded_check(configs, n=11)
        assert rep["pass"]
        assert all(r["max_dx"] == 0.0 for r in rep["rows"])

    def test_bounded_check_axial_field(self):
        configs = [GapConfig(epsilon=e, field_kind=FieldKind.X_LINEAR)
                   for e in (4e-3, 2e-3, 1e-3)]
        rep = dx_bounded_check(configs, n=21)
        assert rep["pass"]
        # every maximum sits below its certified accuracy: the axial
        # derivative is exponentially screened in the gap
        for row in rep["rows"]:
            assert row["max_dx"] <= 2.0 * rep["accuracy"] + 1e-9

    def test_mixed_kinds_rejected(self):
        configs = [GapConfig(epsilon=1e-2),
                   GapConfig(epsilon=1e-3, field_kind=FieldKind.X_LINEAR)]
        with pytest.raises(ValueError):
            dx_bounded_check(configs)


class TestReport:
    def test_schema_and_checks(self, solved):
        rep = solution_report(solved(1e-2))
        assert rep["schema_version"] == 1
        assert rep["gy_at_0"] > 1.0
        assert rep["gx_max"] == 0.0
        names = {c["name"] for c in rep["checks"]}
        assert {"fundamental_equation", "mirror_symmetry",
                "tail_below_tol"} <= names
        assert all(c["pass"] for c in rep["checks"])


class TestConfigValidation:
    def test_eps_cap(self):
        with pytest.raises(ValueError):
            GapConfig(epsilon=0.4)
        with pytest.raises(ValueError):
            GapConfig(epsilon=0.0)

    def test_tol_and_depth(self):
        with pytest.raises(ValueError):
            GapConfig(epsilon=1e-2, tol=0.0)
        with pytest.raises(ValueError):
            GapConfig(epsilon=1e-2, max_depth=0)

    def test_custom_requires_both_traces(self):
        with pytest.raises(ValueError):
            GapConfig(epsilon=1e-2, field_kind=FieldKind.CUSTOM,
                      custom_dy_trace=lambda x: 1.0)

    def test_custom_traces_must_be_finite(self):
        with pytest.raises(ValueError):
            GapConfig(epsilon=1e-2, field_kind=FieldKind.CUSTOM,
                      custom_dy_trace=lambda x: float("nan"),
                      custom_dx_trace=lambda x: 0.0)

    def test_custom_traces_only_for_custom_kind(self):
        with pytest.raises(ValueError):
            GapConfig(epsilon=1e-2, custom_dy_trace=lambda x: 1.0)
