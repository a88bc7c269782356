"""Invariant suite tying the solver, analysis and oracle layers together.

Each check returns a :class:`CheckResult` with a signed margin (positive
means pass with room); the suite is the machine-readable backbone of the
``verify`` CLI subcommand and of the acceptance tests.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import EPS_CAP, FieldKind, GapConfig
from .geometry import fixed_points, x_sequence
from .odeanalysis import (WindowError, default_window, fit_decomposition,
                          homogeneous_ode_residual, homogeneous_trace)
from .oracle import naive_dy_partial, naive_reflect_dy, neumann_residual_check
from .solver import (SeriesSolution, chain_identity_check, dx_bounded_check,
                     fundamental_equation_residual, gy_profile,
                     moment_inequality_check, p_far_value, p_trace, f_trace,
                     partial_dy_values, solve)
from .trace import AxisTrace, build_trace, reflect_unit_dy

SQRT2 = math.sqrt(2.0)
BLOWUP_EXPONENT = (2.0 - SQRT2) / 2.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    epsilon: Optional[float]
    passed: bool
    margin: float
    detail: str = ""


def _shifted_trace(t: AxisTrace, delta: float) -> AxisTrace:
    coeffs = []
    for c in t.coeffs:
        c2 = c.copy()
        c2[0] += delta
        coeffs.append(c2)
    return AxisTrace(t.breaks.copy(), coeffs, t.accuracy)


def perturbed_solution(sol: SeriesSolution, delta: float) -> SeriesSolution:
    """Solution with the trace shifted by a constant; for harness self-tests."""
    return dataclasses.replace(
        sol,
        rb1_dy=_shifted_trace(sol.rb1_dy, delta),
        rb2_dy=_shifted_trace(sol.rb2_dy, delta),
        _p1=_shifted_trace(sol._p1, delta),
        _p2=_shifted_trace(sol._p2, delta),
    )


# -- per-epsilon checks -------------------------------------------------------


def check_fundamental_equation(sol: SeriesSolution, n: int = 50) -> CheckResult:
    res = fundamental_equation_residual(sol, np.linspace(1.0, 1.5, n))
    budget = 5.0 * sol.tail_bound
    return CheckResult("fundamental_equation", sol.config.epsilon,
                       res <= budget, budget - res,
                       f"residual={res:.3e} budget={budget:.3e}")


def check_moment_inequality(sol: SeriesSolution, n: int = 50) -> CheckResult:
    eps = sol.config.epsilon
    rep = moment_inequality_check(sol, np.linspace(1.0, 2.0 + eps, n))
    margin = min(rep["min_margin"], rep["integral_margin"])
    return CheckResult("moment_inequality", eps, rep["pass"], margin,
                       f"pointwise_min={rep['min_margin']:.3e} "
                       f"integral={rep['integral_value']:.3f}<=3")


def derivative_adapted_trace(sol: SeriesSolution, upper: float = 1.55) -> AxisTrace:
    """Refit of P on pieces graded to the sqrt(eps) variation scale.

    The solver grid resolves values on pieces as thin as eps, far below the
    trace's natural scale; high-order spectral derivatives there amplify
    representation noise.  Refitting on scale-matched pieces makes orders
    three and four signal-dominated.
    """
    eps = sol.config.epsilon
    P = p_trace(sol)
    rt = math.sqrt(eps)
    seeds = []
    w = rt / 6.0
    while w < upper - 1.0:
        seeds.append(1.0 + w)
        w *= 2.0
    return build_trace(lambda x: P(np.asarray(x)), (1.0, upper), 1e-11,
                       degree=16, initial_breaks=seeds)


def check_monotonicity_ladder(sol: SeriesSolution, n: int = 200) -> CheckResult:
    """Alternating signs of P and its first four derivatives."""
    eps = sol.config.epsilon
    R = derivative_adapted_trace(sol)
    grid = 1.0 + np.geomspace(eps / 2.0, 0.5, n)
    worst = math.inf
    for order in range(5):
        tr = R if order == 0 else R.derivative(order)
        v = tr(grid)
        ok = (-1.0) ** order * v
        scale = np.maximum.accumulate(np.abs(v)[::-1])[::-1]
        rel = np.min(ok / np.maximum(scale, 1e-300))
        thresh = -1e-12 if order <= 2 else -1e-4
        worst = min(worst, rel - thresh)
    return CheckResult("monotonicity_ladder", eps, worst >= 0.0, worst,
                       "signs of P..P'''' on the gap-side window")


def check_chain_identity(sol: SeriesSolution) -> CheckResult:
    eps = sol.config.epsilon
    res = chain_identity_check(sol)
    budget = 10.0 * sol.tail_bound / max(p_trace(sol)(1.0), 1e-300)
    return CheckResult("chain_identity", eps, res <= budget, budget - res,
                       f"relative residual={res:.3e} budget={budget:.3e}")


def check_gamma_inequality(sol: SeriesSolution, n: int = 40) -> CheckResult:
    """Positivity of the weighted value/slope combination on the gamma range.

    3 g s P(1 + g s - g^2 s^2) + ((g^2-1) s^2 - g^3 s^3) P'(1 + g s) > 0
    for s = sqrt(eps) and 2 < g < 1/(10 s); empty range at wide gaps is
    reported as a skip.
    """
    eps = sol.config.epsilon
    s = math.sqrt(eps)
    hi = 1.0 / (10.0 * s)
    if hi <= 2.1:
        return CheckResult("gamma_inequality", eps, True, 0.0,
                           "skipped: gamma range empty at this eps")
    gammas = np.geomspace(2.05, hi * 0.99, n)
    P = p_trace(sol)
    P1 = P.derivative(1)
    lhs = (3.0 * gammas * s * P(1.0 + gammas * s - gammas ** 2 * eps)
           + ((gammas ** 2 - 1.0) * eps - gammas ** 3 * eps * s)
           * P1(1.0 + gammas * s))
    margin = float(np.min(lhs))
    return CheckResult("gamma_inequality", eps, margin > 0.0, margin,
                       f"min over gamma grid={margin:.3e}")


def derivative_ratio_constant(sol: SeriesSolution, n: int = 60) -> float:
    """Smallest K with |(x-1)^k P^(k-1)(x)| <= K (x-1) P((x-1)/2 + 1)."""
    eps = sol.config.epsilon
    R = derivative_adapted_trace(sol)
    t = np.geomspace(eps / 2.0, 0.3, n)
    ref = t * R(1.0 + t / 2.0)
    k_worst = 0.0
    for k in range(1, 5):
        tr = R if k == 1 else R.derivative(k - 1)
        num = np.abs(t ** k * tr(1.0 + t))
        k_worst = max(k_worst, float(np.max(num / ref)))
    return k_worst


def check_far_decay(sol: SeriesSolution) -> CheckResult:
    """P decays toward zero: far value below 10 tol via the identity."""
    tol = sol.config.tol
    xi = 64.0
    val = abs(p_far_value(sol, xi))
    while val > 10.0 * tol and xi < 1e7:
        xi *= 4.0
        val = abs(p_far_value(sol, xi))
    return CheckResult("far_decay", sol.config.epsilon, val <= 10.0 * tol,
                       10.0 * tol - val, f"|P({xi:.0f})|={val:.2e}")


def check_monotone_truncation(config: GapConfig) -> CheckResult:
    """Partial sums of d_y u at the midpoint are nondecreasing in depth."""
    eps = config.epsilon
    depths = list(range(1, 9))
    vals = partial_dy_values(config, depths, [1.0 + eps / 2.0])
    seq = np.array([vals[d][0] for d in depths])
    margin = float(np.min(np.diff(seq)))
    return CheckResult("monotone_truncation", eps, margin >= -1e-13, margin,
                       "depth-1..8 partial sums at the segment midpoint")


def decomposition_result(sol: SeriesSolution):
    """(CheckResult, OdeDecomposition) for the fit bounds, or None if no window.

    Pass requires C_alpha > 0, a small fit residual, and a bounded
    particular part.
    """
    eps = sol.config.epsilon
    try:
        window = default_window(eps)
    except WindowError:
        return None
    dec = fit_decomposition(f_trace(sol), eps, window=window)
    passed = (dec.c_alpha > 0.0 and dec.residual_norm <= 1e-2
              and dec.m_fit <= 10.0 and dec.m_fit_prime <= 10.0)
    margin = min(dec.c_alpha, 1e-2 - dec.residual_norm,
                 10.0 - dec.m_fit, 10.0 - dec.m_fit_prime)
    result = CheckResult(
        "decomposition_fit", eps, passed, margin,
        f"C_a={dec.c_alpha:.4f} C_b={dec.c_beta:.3e} "
        f"resid={dec.residual_norm:.2e} |f_p|<={dec.m_fit:.3f}")
    return result, dec


def check_decomposition(sol: SeriesSolution) -> Optional[CheckResult]:
    out = decomposition_result(sol)
    return None if out is None else out[0]


def check_homogeneous_ode(eps: float) -> CheckResult:
    """Series solutions annihilate the reduced operator to 1e-8 relative."""
    lo = 1.5 * 10.0 * math.sqrt(eps)
    hi = max(0.1, 2.5 * lo)
    grid = np.geomspace(lo * 1.05, hi * 0.99, 60)
    worst = 0.0
    for kind in ("ALPHA", "BETA"):
        tr = homogeneous_trace(kind, eps, (lo, hi))
        worst = max(worst, homogeneous_ode_residual(tr, eps, grid))
    return CheckResult("homogeneous_ode", eps, worst <= 1e-8, 1e-8 - worst,
                       f"max relative residual={worst:.2e}")


def check_mirror_symmetry(sol: SeriesSolution, n: int = 50) -> CheckResult:
    eps = sol.config.epsilon
    xs = np.linspace(-eps / 2.0, eps / 2.0, n)
    gap = float(np.max(np.abs(sol.rb1_dy(xs) - sol.rb2_dy(-xs))))
    budget = 2.0 * sol.tail_bound + 1e-12
    return CheckResult("mirror_symmetry", eps, gap <= budget, budget - gap,
                       f"sup difference={gap:.2e}")


# -- cross-epsilon / one-off checks -------------------------------------------


def check_oracle_reflection(tol: float = 1e-9) -> CheckResult:
    """Naive quadrature vs trace reflection on the four-function corpus."""
    corpus = {
        "one": lambda s: np.ones_like(np.asarray(s, dtype=float)),
        "linear": lambda s: np.asarray(s, dtype=float),
        "square": lambda s: np.asarray(s, dtype=float) ** 2,
        "shifted_cube": lambda s: 1.0 / (1.0 + np.asarray(s, dtype=float)) ** 3,
    }
    worst = 0.0
    for fn in corpus.values():
        g = build_trace(fn, (0.0, 1.0), 1e-13)
        r = reflect_unit_dy(g)
        for x in (1.0, 1.5, 2.0, 3.0, 4.0):
            nv = naive_reflect_dy(lambda s: float(fn(np.asarray(s))), x)
            worst = max(worst, abs(r(x) - nv))
    return CheckResult("oracle_reflection", None, worst <= tol, tol - worst,
                       f"max |naive - trace|={worst:.2e} over corpus")


def check_oracle_depth_consistency(eps: float = 0.1,
                                   tol: float = 1e-8) -> CheckResult:
    """Solver partial sums match iterated-quadrature evaluation."""
    cfg = GapConfig(epsilon=eps, tol=1e-10)
    xi = np.array([1.0, 1.0 + eps / 2.0, 1.2, 1.8])
    pv = partial_dy_values(cfg, [1, 2, 3, 4], xi)
    worst = 0.0
    for d in (1, 2, 3, 4):
        worst = max(worst, float(np.max(np.abs(pv[d] - naive_dy_partial(eps, d, xi)))))
    return CheckResult("oracle_depth_consistency", eps, worst <= tol,
                       tol - worst, f"max depth-1..4 difference={worst:.2e}")


def check_comparison_principle(eps: float = 1e-2,
                               tol: float = 1e-8) -> CheckResult:
    """Slanted background field dominated by the scaled linear solve.

    H = y + x/10 has |d_y H| <= 1 on the segment; with M = 2 the solution
    for M y must dominate |d_y u| pointwise.
    """
    slant = GapConfig(
        epsilon=eps, field_kind=FieldKind.CUSTOM,
        custom_dy_trace=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        custom_dx_trace=lambda x: 0.1 * np.ones_like(np.asarray(x, dtype=float)),
        tol=tol)
    linear = GapConfig(epsilon=eps, tol=tol)
    m_const = 2.0
    _, gy_slant = gy_profile(solve(slant), n=41)
    _, gy_linear = gy_profile(solve(linear), n=41)
    margin = float(np.min(m_const * gy_linear - np.abs(gy_slant)))
    return CheckResult("comparison_principle", eps, margin >= -1e-10, margin,
                       f"min (M gy_linear - |gy|)={margin:.3e}")


def check_x_sequence_asymptotics(eps: float = 1e-4,
                                 n_max: int = 50) -> CheckResult:
    """Iterates track 1 + (n-1) eps within the 10 n^2 eps^(3/2) envelope."""
    geom = fixed_points(eps)
    worst = -math.inf
    for n in range(1, n_max + 1):
        xn = x_sequence(geom, n)
        dev = abs(xn - 1.0 - (n - 1) * eps)
        worst = max(worst, dev - 10.0 * n * n * eps ** 1.5)
    return CheckResult("x_sequence_asymptotics", eps, worst <= 0.0, -worst,
                       f"max envelope excess={worst:.2e}")


def check_boundary(eps: float, depth: int = 4) -> CheckResult:
    rep = neumann_residual_check(eps, depth)
    budget = 2.0 * rep["analytic_tail_bound"]
    return CheckResult("boundary_neumann", eps, rep["pass"],
                       budget - rep["residual"],
                       f"residual={rep['residual']:.3e} budget={budget:.3e}")


# -- suite driver -------------------------------------------------------------


def run_suite(eps_list: Sequence[float], tol: float = 1e-8,
              perturb: float = 0.0, boundary: bool = False) -> list[CheckResult]:
    """All applicable checks over the gap widths, largest first.

    ``perturb`` shifts the computed trace by a constant before checking
    (harness self-test: the fixed-point identity must then fail).  Gap
    widths above the solver cap run only the oracle boundary check.
    """
    results: list[CheckResult] = []
    solver_eps = sorted([e for e in eps_list if e < EPS_CAP], reverse=True)
    wide_eps = [e for e in eps_list if e >= EPS_CAP]

    k_reference = None
    c_alpha_values = []
    witness_values = []
    for eps in solver_eps:
        sol = solve(GapConfig(epsilon=eps, tol=tol))
        if perturb != 0.0:
            sol = perturbed_solution(sol, perturb)
        results.append(check_fundamental_equation(sol))
        results.append(check_moment_inequality(sol))
        results.append(check_monotonicity_ladder(sol))
        results.append(check_chain_identity(sol))
        results.append(check_gamma_inequality(sol))
        results.append(check_mirror_symmetry(sol))
        results.append(check_far_decay(sol))
        results.append(check_monotone_truncation(sol.config))
        results.append(check_homogeneous_ode(eps))
        k_eps = derivative_ratio_constant(sol)
        if k_reference is None:
            k_reference = k_eps
            results.append(CheckResult(
                "derivative_ratio_reference", eps, True, k_eps,
                f"K={k_eps:.3f} fixed at the widest gap"))
        else:
            # the constant creeps up toward its small-gap limit, so allow a
            # fixed 1.5x headroom over the widest-gap reference; unbounded
            # growth would still fail
            budget = 1.5 * k_reference
            results.append(CheckResult(
                "derivative_ratio_stability", eps, k_eps <= budget,
                budget - k_eps, f"K={k_eps:.3f} vs budget {budget:.3f}"))
        out = decomposition_result(sol)
        if out is not None:
            result, dec = out
            results.append(result)
            c_alpha_values.append((eps, dec.c_alpha))
            f = f_trace(sol)
            witness_values.append(
                (eps, f(20.0 * math.sqrt(eps)) * eps ** BLOWUP_EXPONENT))

    if len(c_alpha_values) >= 2:
        cs = [v for _, v in c_alpha_values]
        ratio = max(cs) / max(min(cs), 1e-300)
        results.append(CheckResult(
            "c_alpha_stability", None, ratio <= 2.0, 2.0 - ratio,
            f"C_alpha ratio across eps={ratio:.3f}"))
        ws = [v for _, v in witness_values]
        wr = max(ws) / max(min(ws), 1e-300)
        results.append(CheckResult(
            "lower_bound_witness", None, min(ws) > 0.0 and wr <= 2.0,
            min(2.0 - wr, min(ws)),
            f"f(20 sqrt(eps)) eps^{BLOWUP_EXPONENT:.4f} in "
            f"[{min(ws):.4f}, {max(ws):.4f}]"))

    if len(solver_eps) >= 2:
        configs = [GapConfig(epsilon=e, field_kind=FieldKind.X_LINEAR,
                             tol=tol) for e in solver_eps]
        rep = dx_bounded_check(configs)
        results.append(CheckResult(
            "dx_boundedness", None, rep["pass"],
            0.5 * max(r["max_dx"] for r in rep["rows"])
            + 2.0 * rep["accuracy"] - rep["spread"],
            f"maxima spread={rep['spread']:.2e} within accuracy "
            f"{rep['accuracy']:.2e}"))

    results.append(check_oracle_reflection())
    results.append(check_oracle_depth_consistency())
    results.append(check_comparison_principle(tol=tol))
    results.append(check_x_sequence_asymptotics())

    if boundary:
        for eps in (wide_eps or [0.5]):
            results.append(check_boundary(eps))
    return results
