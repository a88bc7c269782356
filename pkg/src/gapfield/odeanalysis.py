"""Reduction of the gap trace to a second-order ODE and exponent extraction.

With t = xi - 1 and f(t) = P(1 + t), the trace satisfies

    (t^2 - eps) f'' + 5 t f' + 2 f = -1/(1+t)^3 + g(t),

where the forcing defect g collects the higher-order terms of the reduction
and is small relative to t f(t/2) on sqrt(eps) << t << 1.  The homogeneous
solutions behave like t^(-2+sqrt2) and t^(-2-sqrt2); their exponents encode
the gradient blow-up rate.  Everything here measures g from the solver's f,
constructs a particular solution by nested quadrature of the measured
forcing, and fits f - f_p against the homogeneous pair, closing the loop
solver -> g -> f_p -> coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .trace import AxisTrace, build_trace

SQRT2 = math.sqrt(2.0)

# fit window [WINDOW_LOWER_FACTOR * sqrt(eps), WINDOW_UPPER]; the lower edge
# sits strictly inside the 10*sqrt(eps) validity region of the homogeneous
# series.  When the two collide (large eps) the upper edge is pushed out, but
# never beyond WINDOW_UPPER_CAP where the reduction itself degrades.
WINDOW_LOWER_FACTOR = 20.0
WINDOW_UPPER = 0.1
WINDOW_UPPER_CAP = 0.45
HOMOGENEOUS_DOMAIN_FACTOR = 10.0
PARTICULAR_STOP_REL = 1e-3
PARTICULAR_MAX_CORRECTIONS = 60


class WindowError(ValueError):
    """Requested evaluation below the homogeneous-series domain."""


@dataclass(frozen=True)
class HomogeneousSolution:
    """One homogeneous solution of (t^2 - eps) f'' + 5 t f' + 2 f = 0.

    Valid for t >= 10 sqrt(eps), where the series term ratio is at most
    4 eps / t^2 < 1.
    """

    kind: str            # "ALPHA" (t^(-2+sqrt2) type) or "BETA" (t^(-2-sqrt2))
    epsilon: float
    terms_used: int


@dataclass(frozen=True)
class OdeDecomposition:
    """Fitted split f = f_p + C_alpha f_alpha + C_beta f_beta on a window."""

    c_alpha: float
    c_beta: float
    f_p: AxisTrace
    window: tuple[float, float]
    residual_norm: float
    m_fit: float          # sup |f_p| on the window
    m_fit_prime: float    # sup |t f_p'| on the window


@dataclass(frozen=True)
class ExponentFit:
    """Log-log least-squares fit of a blow-up power law."""

    eps_grid: tuple
    values: tuple
    slope: float
    intercept: float
    stderr: float


def _series_factors(kind: str) -> tuple[float, float]:
    if kind == "ALPHA":
        return -2.0 + SQRT2, -1.0
    if kind == "BETA":
        return -2.0 - SQRT2, +1.0
    raise ValueError(f"kind must be 'ALPHA' or 'BETA', got {kind!r}")


def _series_ratios(kind: str, n_max: int) -> np.ndarray:
    """Recurrence factors a_n / a_{n-1} (without the eps/t^2 power)."""
    _, s = _series_factors(kind)
    n = np.arange(1, n_max + 1, dtype=float)
    num = (2 * n + s * SQRT2) * (2 * n + 1 + s * SQRT2)
    den = (2 * n) * (2 * n + 2 * s * SQRT2)
    return num / den


def _term_count(eps: float, t_min: float, rel: float = 1e-18,
                n_max: int = 400) -> int:
    """Terms needed so the tail of the homogeneous series is below rel at t_min."""
    if eps == 0.0:
        return 0
    r = eps / t_min ** 2
    mag = 1.0
    for n in range(1, n_max + 1):
        mag *= 4.0 * r  # the ratio factors are bounded by 4
        if mag < rel:
            return n
    return n_max


def _eval_fixed(kind: str, eps: float, tv: np.ndarray, order: int,
                n_terms: int) -> np.ndarray:
    """Fixed-term-count series evaluation (smooth in t by construction)."""
    base, _ = _series_factors(kind)
    ratios = _series_ratios(kind, n_terms)
    acc = np.zeros_like(tv)
    an = np.ones_like(tv)
    for n in range(0, n_terms + 1):
        if n > 0:
            an = an * (eps / tv ** 2) * ratios[n - 1]
        m = base - 2 * n
        if order == 0:
            fac = 1.0
        elif order == 1:
            fac = m / tv
        else:
            fac = m * (m - 1) / tv ** 2
        acc = acc + an * fac
    return acc * tv ** base


def eval_homogeneous(kind: str, eps: float, t, order: int = 0):
    """Homogeneous solution (or its analytic derivative) at t >= 10 sqrt(eps).

    The series is summed with a term count that drives the tail below 1e-18
    relative at the smallest requested t; derivatives are term by term
    (order <= 2).
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    tv = np.atleast_1d(np.asarray(t, dtype=float))
    lo = HOMOGENEOUS_DOMAIN_FACTOR * math.sqrt(eps) if eps > 0 else 0.0
    if np.any(tv < lo * (1.0 - 1e-12)):
        raise WindowError(
            f"homogeneous solutions are defined for t >= {lo:.6g}"
        )
    n_terms = _term_count(eps, float(np.min(tv))) if eps > 0 else 0
    out = _eval_fixed(kind, eps, tv, order, n_terms)
    return float(out[0]) if np.ndim(t) == 0 else out


def homogeneous_solution(kind: str, eps: float, t_ref: float) -> HomogeneousSolution:
    """Record of the series evaluation at a reference point."""
    _eval = eval_homogeneous(kind, eps, t_ref)  # domain check
    return HomogeneousSolution(kind=kind, epsilon=eps,
                               terms_used=_term_count(eps, t_ref))


def homogeneous_trace(kind: str, eps: float, window: tuple[float, float],
                      accuracy: float = 1e-14) -> AxisTrace:
    """AxisTrace of a homogeneous solution over a window above 10 sqrt(eps).

    The term count is frozen across the window so the represented function
    is a finite power sum, smooth to machine precision.
    """
    lo = HOMOGENEOUS_DOMAIN_FACTOR * math.sqrt(eps)
    if window[0] < lo * (1.0 - 1e-12):
        raise WindowError(f"window must start at or above {lo:.6g}")
    n_terms = _term_count(eps, window[0]) if eps > 0 else 0

    def f(t):
        return _eval_fixed(kind, eps, np.asarray(t, dtype=float), 0, n_terms)

    seeds = np.geomspace(window[0], window[1], 9)[1:-1]
    return build_trace(f, window, accuracy, degree=16,
                       initial_breaks=list(seeds))


def homogeneous_ode_residual(f: AxisTrace, eps: float,
                             grid: Sequence[float]) -> float:
    """Max of |(t^2-eps) f'' + 5 t f' + 2 f| / |f| over the grid."""
    g = np.asarray(grid, dtype=float)
    f1 = f.derivative(1)
    f2 = f.derivative(2)
    num = (g ** 2 - eps) * f2(g) + 5.0 * g * f1(g) + 2.0 * f(g)
    return float(np.max(np.abs(num) / np.maximum(np.abs(f(g)), 1e-300)))


def compute_g(f: AxisTrace, eps: float,
              window: Optional[tuple[float, float]] = None,
              accuracy: float = 1e-9) -> AxisTrace:
    """Forcing defect g(t) = (t^2-eps) f'' + 5 t f' + 2 f + 1/(1+t)^3.

    ``f`` must cover the window with two derivatives' worth of resolution;
    the default window is [10 sqrt(eps), 0.3].
    """
    lo_min = HOMOGENEOUS_DOMAIN_FACTOR * math.sqrt(eps)
    if window is None:
        window = (lo_min, 0.3)
    if window[1] <= window[0]:
        raise WindowError(
            f"empty forcing window {window} at eps={eps}; the reduction "
            f"lives on [10 sqrt(eps), ~0.45]"
        )
    a, b = f.domain
    if window[0] < a - 1e-12 or window[1] > b + 1e-12:
        raise WindowError(
            f"f covers [{a:.6g}, {b:.6g}], cannot form g on {window}"
        )
    f1 = f.derivative(1)
    f2 = f.derivative(2)

    def g_fn(t):
        t = np.asarray(t, dtype=float)
        return ((t ** 2 - eps) * f2(t) + 5.0 * t * f1(t) + 2.0 * f(t)
                + 1.0 / (1.0 + t) ** 3)

    seeds = np.geomspace(window[0], window[1], 9)[1:-1]
    return build_trace(g_fn, window, accuracy, initial_breaks=list(seeds))


def g_ratio_bound(f: AxisTrace, g: AxisTrace,
                  grid: Optional[Sequence[float]] = None) -> float:
    """Smallest K with |g(t)| <= K t f(t/2) on the grid."""
    if grid is None:
        a, b = g.domain
        grid = np.geomspace(max(a, 1e-12), b, 80)
    grid = np.asarray(grid, dtype=float)
    ref = grid * f(grid / 2.0)
    return float(np.max(np.abs(g(grid)) / np.maximum(np.abs(ref), 1e-300)))


def _nested_particular(G_weighted: AxisTrace, lower: float,
                       accuracy: float) -> AxisTrace:
    """t^(-2-sqrt2) iint of the (already s^(1-sqrt2)-weighted) forcing."""
    Q = G_weighted.antiderivative(start=lower)

    def outer(w):
        w = np.asarray(w, dtype=float)
        return w ** (2.0 * SQRT2 - 1.0) * Q(w)

    hi = G_weighted.domain[1]
    seeds = np.geomspace(lower, hi, 9)[1:-1]
    outer_trace = build_trace(outer, (lower, hi), accuracy,
                              initial_breaks=list(seeds))
    R = outer_trace.antiderivative(start=lower)

    def fp(t):
        t = np.asarray(t, dtype=float)
        return t ** (-2.0 - SQRT2) * R(t)

    return build_trace(fp, (lower, hi), accuracy, initial_breaks=list(seeds))


def build_particular(G: AxisTrace, eps: float, lower: float,
                     accuracy: float = 1e-10) -> AxisTrace:
    """Particular solution of the reduced ODE by nested quadrature.

    The zeroth iterate solves t^2 f'' + 5 t f' + 2 f = G via the explicit
    double integral; each correction feeds eps * f'' of the previous iterate
    back through the same integral so the sum solves the full operator
    (t^2 - eps) f'' + 5 t f' + 2 f = G.  The iteration is truncated when the
    latest correction drops below 1e-3 of the running sum and must contract
    (ratio < 0.9), otherwise ``lower`` sits too close to sqrt(eps).
    """
    a, b = G.domain
    if lower < a - 1e-12:
        raise WindowError(f"lower={lower} below forcing domain start {a}")
    if lower < HOMOGENEOUS_DOMAIN_FACTOR * math.sqrt(eps) * (1.0 - 1e-12):
        raise WindowError(
            f"lower={lower} inside the degenerate zone; need >= "
            f"{HOMOGENEOUS_DOMAIN_FACTOR * math.sqrt(eps):.6g}"
        )

    def weighted(src_fn):
        def w(s):
            s = np.asarray(s, dtype=float)
            return src_fn(s) * s ** (1.0 - SQRT2)
        seeds = np.geomspace(lower, b, 9)[1:-1]
        return build_trace(w, (lower, b), accuracy, initial_breaks=list(seeds))

    total = _nested_particular(weighted(G), lower, accuracy)
    prev = total
    prev_sup = _sup_on(total)
    for _ in range(PARTICULAR_MAX_CORRECTIONS):
        d2 = prev.derivative(2)
        corr = _nested_particular(weighted(lambda s: eps * d2(s)), lower,
                                  accuracy)
        total = _add_traces(total, corr, accuracy)
        sup_corr = _sup_on(corr)
        sup_tot = _sup_on(total)
        if sup_corr <= max(PARTICULAR_STOP_REL * sup_tot,
                           1e-14 * (1.0 + sup_tot)):
            return total
        if sup_corr >= 0.9 * prev_sup:
            raise WindowError(
                f"particular-solution corrections not contracting "
                f"(ratio {sup_corr / max(prev_sup, 1e-300):.3f}); "
                f"increase lower (currently {lower})"
            )
        prev, prev_sup = corr, sup_corr
    raise WindowError("particular-solution iteration failed to settle")


def _sup_on(t: AxisTrace, n: int = 200) -> float:
    a, b = t.domain
    xs = np.linspace(a, b, n)
    return float(np.max(np.abs(t(xs))))


def _add_traces(a: AxisTrace, b: AxisTrace, accuracy: float) -> AxisTrace:
    lo = max(a.domain[0], b.domain[0])
    hi = min(a.domain[1], b.domain[1])
    seeds = list(np.geomspace(max(lo, 1e-12), hi, 9)[1:-1])
    return build_trace(lambda x: a(np.asarray(x)) + b(np.asarray(x)),
                       (lo, hi), accuracy, initial_breaks=seeds)


def default_window(eps: float) -> tuple[float, float]:
    """Fit window resting strictly inside the homogeneous-series domain."""
    lower = WINDOW_LOWER_FACTOR * math.sqrt(eps)
    upper = min(WINDOW_UPPER_CAP, max(WINDOW_UPPER, 2.5 * lower))
    if lower >= upper:
        raise WindowError(f"no usable fit window for eps={eps}")
    return (lower, upper)


def fit_decomposition(f: AxisTrace, eps: float,
                      window: Optional[tuple[float, float]] = None,
                      fit_tol: float = 1e-2) -> OdeDecomposition:
    """Least-squares split of f into particular plus homogeneous parts.

    The forcing is measured from f itself, so in exact arithmetic
    f - f_p is an exact homogeneous combination and the fit residual is a
    pure numerical-consistency gauge.  Raises on an ill-conditioned basis
    (window too narrow) and reports sup bounds of the particular part.
    """
    if window is None:
        window = default_window(eps)
    lower, upper = window
    g = compute_g(f, eps, window=(max(lower * 0.98, f.domain[0]),
                                  min(upper * 1.02, f.domain[1])))

    def forcing(t):
        t = np.asarray(t, dtype=float)
        return -1.0 / (1.0 + t) ** 3 + g(t)

    seeds = list(np.geomspace(lower, upper, 9)[1:-1])
    G = build_trace(forcing, (lower, upper), 1e-10, initial_breaks=seeds)
    f_p = build_particular(G, eps, lower)

    grid = np.geomspace(lower * 1.001, upper * 0.999, 120)
    fa = eval_homogeneous("ALPHA", eps, grid)
    fb = eval_homogeneous("BETA", eps, grid)
    target = f(grid) - f_p(grid)
    sa, sb = np.linalg.norm(fa), np.linalg.norm(fb)
    design = np.column_stack([fa / sa, fb / sb])
    cond = np.linalg.cond(design)
    if cond > 1e12:
        raise WindowError(
            f"homogeneous basis nearly collinear on {window} "
            f"(cond={cond:.2e}); widen the window"
        )
    sol, *_ = np.linalg.lstsq(design, target, rcond=None)
    c_alpha = float(sol[0] / sa)
    c_beta = float(sol[1] / sb)
    model = c_alpha * fa + c_beta * fb + f_p(grid)
    scale = float(np.max(np.abs(f(grid))))
    residual = float(np.max(np.abs(model - f(grid)))) / max(scale, 1e-300)
    if residual > fit_tol:
        raise WindowError(
            f"decomposition fit residual {residual:.2e} exceeds {fit_tol}"
        )
    f_p1 = f_p.derivative(1)
    m_fit = float(np.max(np.abs(f_p(grid))))
    m_fit_prime = float(np.max(np.abs(grid * f_p1(grid))))
    return OdeDecomposition(
        c_alpha=c_alpha, c_beta=c_beta, f_p=f_p, window=window,
        residual_norm=residual, m_fit=m_fit, m_fit_prime=m_fit_prime,
    )


def fit_exponent(points: Sequence[tuple[float, float]]) -> ExponentFit:
    """Ordinary least squares of log(value) against log(eps).

    Needs at least four points spanning two decades, all values positive.
    """
    pts = sorted(points, key=lambda p: -p[0])
    eps_grid = np.array([p[0] for p in pts], dtype=float)
    values = np.array([p[1] for p in pts], dtype=float)
    if len(pts) < 4:
        raise ValueError(f"need at least 4 points, got {len(pts)}")
    if np.any(values <= 0.0) or np.any(eps_grid <= 0.0):
        raise ValueError("exponent fit requires positive values and eps")
    if eps_grid[0] / eps_grid[-1] < 100.0 * (1.0 - 1e-9):
        raise ValueError("eps grid must span at least two decades")
    lx = np.log(eps_grid)
    ly = np.log(values)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    dof = max(len(pts) - 2, 1)
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    stderr = math.sqrt(float(np.sum(resid ** 2)) / dof / max(sxx, 1e-300))
    return ExponentFit(
        eps_grid=tuple(eps_grid.tolist()), values=tuple(values.tolist()),
        slope=float(coef[0]), intercept=float(coef[1]), stderr=stderr,
    )


def local_slope(f: AxisTrace, t: float) -> float:
    """d log f / d log t at t, from the differentiated trace."""
    return float(t * f.derivative(1)(t) / f(t))
