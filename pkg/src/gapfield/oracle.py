"""Independent brute-force cross-checks for the trace machinery.

Everything here deliberately shares no code with the piecewise-Chebyshev
pipeline: separate quadrature, no interpolation, no caching.  Agreement with
the optimized path is therefore evidence rather than tautology.  Costs grow
exponentially with reflection depth, so these run at moderate gap widths and
shallow depth; small-gap validation is covered by the exact fixed-point
identity of the trace instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .trace import AxisTrace

MAX_OFFAXIS_DEPTH = 4
_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def naive_reflect_dy(g: Callable[[float], float], x: float) -> float:
    """Reflection trace value by direct adaptive quadrature.

    Computes g(1/x)/x^3 - (1/x) * integral_0^{1/x} s g(s) ds for x >= 1
    with scipy's adaptive quadrature; raises if the quadrature does not
    converge to near machine accuracy.
    """
    if x < 1.0:
        raise ValueError(f"naive_reflect_dy needs x >= 1, got {x}")
    val, err = integrate.quad(lambda s: s * g(s), 0.0, 1.0 / x,
                              epsabs=1e-13, epsrel=1e-12, limit=200)
    if err > 1e-9:
        raise RuntimeError(
            f"adaptive quadrature did not converge (error estimate {err:.2e})"
        )
    return g(1.0 / x) / x ** 3 - val / x


def naive_dy_partial(eps: float, depth: int, xi,
                     gl_nodes: int = 32) -> np.ndarray:
    """Depth-truncated gap trace by iterated quadrature, no interpolation.

    Evaluates the same fixed-point iteration as the series solver, but each
    radial moment integral is done with fresh Gauss-Legendre quadrature on
    exact recursive evaluations.  Cost is O(gl_nodes^depth) per point.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    nodes, weights = _gl(gl_nodes)

    def q(k: int, xiv: np.ndarray) -> np.ndarray:
        if k == 0:
            return np.zeros_like(xiv)
        u = 1.0 / xiv
        point_part = 1.0 + q(k - 1, 2.0 + eps - u)
        s = 0.5 * u[:, None] * (nodes[None, :] + 1.0)
        w = 1.0 + q(k - 1, (2.0 + eps - s).ravel()).reshape(s.shape)
        moment = 0.5 * u * np.sum(weights[None, :] * s * w, axis=1)
        return point_part / xiv ** 3 - moment / xiv

    xiv = np.atleast_1d(np.asarray(xi, dtype=float))
    out = q(depth, xiv)
    return float(out[0]) if np.ndim(xi) == 0 else out


# -- full 3-d evaluation ------------------------------------------------------


@dataclass(frozen=True)
class OffAxisPoint:
    """Spherical coordinates about a chosen sphere center.

    Convention (x, y, z) = rho (cos theta sin phi, sin theta sin phi,
    cos phi); rho >= 1 for exterior evaluation relative to the reflecting
    sphere.
    """

    rho: float
    theta: float
    phi: float

    def cartesian(self, center: np.ndarray) -> np.ndarray:
        d = np.array([
            math.cos(self.theta) * math.sin(self.phi),
            math.sin(self.theta) * math.sin(self.phi),
            math.cos(self.phi),
        ])
        return np.asarray(center, dtype=float) + self.rho * d


def _linear_y(points: np.ndarray) -> np.ndarray:
    return points[:, 1]


def _reflect_3d(inner: Callable[[np.ndarray], np.ndarray], center: np.ndarray,
                points: np.ndarray, gl_nodes: int) -> np.ndarray:
    """Single-sphere reflection at exterior 3-d points.

    value(p) = (1/rho) inner(image) - integral_0^{1/rho} inner(center + s d) ds
    with rho = |p - center| and d the unit direction of p.
    """
    nodes, weights = _gl(gl_nodes)
    d = points - center[None, :]
    rho = np.linalg.norm(d, axis=1)
    dirs = d / rho[:, None]
    image = center[None, :] + dirs / rho[:, None]
    v_point = inner(image) / rho
    u = 1.0 / rho
    s = 0.5 * u[:, None] * (nodes[None, :] + 1.0)        # (N, K)
    pts = center[None, None, :] + s[:, :, None] * dirs[:, None, :]
    vals = inner(pts.reshape(-1, 3)).reshape(s.shape)
    v_int = 0.5 * u * np.sum(weights[None, :] * vals, axis=1)
    return v_point - v_int


def truncated_u(points: np.ndarray, eps: float, depth: int,
                h: Optional[Callable] = None, gl_nodes: int = 16) -> np.ndarray:
    """Sum of the background field plus all reflection words up to ``depth``.

    ``points`` is an (N, 3) array exterior to both spheres; ``h`` a
    vectorised background field (default the unit linear field along y).
    Depth above 4 is refused: each level multiplies evaluations by the
    quadrature node count.
    """
    if depth > MAX_OFFAXIS_DEPTH:
        raise ValueError(
            f"depth {depth} refused; exponential cost above {MAX_OFFAXIS_DEPTH}"
        )
    if h is None:
        h = _linear_y
    points = np.asarray(points, dtype=float)
    c = 1.0 + eps / 2.0
    centers = {1: np.array([-c, 0.0, 0.0]), 2: np.array([c, 0.0, 0.0])}

    def word_value(word: tuple[int, ...], pts: np.ndarray) -> np.ndarray:
        if not word:
            return h(pts)
        inner = lambda q: word_value(word[1:], q)
        return _reflect_3d(inner, centers[word[0]], pts, gl_nodes)

    total = h(points).astype(float)
    for length in range(1, depth + 1):
        for outer in (1, 2):
            word = tuple((outer + k) % 2 + 1 for k in range(length))
            total = total + word_value(word, points)
    return total


def offaxis_term_eval(depth: int, point: OffAxisPoint, eps: float,
                      which: int = 1, h: Optional[Callable] = None,
                      gl_nodes: int = 16) -> float:
    """Depth-truncated u at one off-axis point given about sphere ``which``."""
    c = 1.0 + eps / 2.0
    center = np.array([-c, 0.0, 0.0]) if which == 1 else np.array([c, 0.0, 0.0])
    p = point.cartesian(center)
    return float(truncated_u(p[None, :], eps, depth, h=h, gl_nodes=gl_nodes)[0])


def neumann_residual_check(eps: float, depth: int, n_theta: int = 10,
                           n_phi: int = 10, delta: float = 1e-3,
                           gl_nodes: int = 16,
                           chunk: int = 10) -> dict:
    """Normal-derivative residual of the depth-truncated sum on sphere B1.

    After truncation every reflection word with an outer reflection in B1
    cancels its parent's normal derivative, so the residual equals the
    normal derivative of the single unpaired deepest word.  The analytic
    tail bound chains the per-reflection energy decay factor (1+eps)^-3
    from the first reflected term's surface amplitude:

        bound = max|d_nu R2(H)| * (1+eps)^(-3(depth-1)) / (1 - (1+eps)^-3).

    Returns the max surface residual, the bound, and the pass flag
    (residual <= 2 * bound).
    """
    c = 1.0 + eps / 2.0
    center = np.array([-c, 0.0, 0.0])
    thetas = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    phis = np.linspace(0.2, math.pi - 0.2, n_phi)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    dirs = np.column_stack([
        (np.cos(tt) * np.sin(pp)).ravel(),
        (np.sin(tt) * np.sin(pp)).ravel(),
        np.cos(pp).ravel(),
    ])

    def normal_derivative(field_depth: int, words_only: Optional[str] = None):
        out = np.empty(len(dirs))
        for i0 in range(0, len(dirs), chunk):
            sub = dirs[i0:i0 + chunk]
            plus = center[None, :] + (1.0 + delta) * sub
            minus = center[None, :] + (1.0 - delta) * sub
            if words_only == "first_reflected":
                cc = 1.0 + eps / 2.0
                c2 = np.array([cc, 0.0, 0.0])
                f = lambda pts: _reflect_3d(_linear_y, c2, pts, gl_nodes)
                vp, vm = f(plus), f(minus)
            else:
                vp = truncated_u(plus, eps, field_depth, gl_nodes=gl_nodes)
                vm = truncated_u(minus, eps, field_depth, gl_nodes=gl_nodes)
            out[i0:i0 + chunk] = (vp - vm) / (2.0 * delta)
        return out

    residual = float(np.max(np.abs(normal_derivative(depth))))
    m1 = float(np.max(np.abs(normal_derivative(0, words_only="first_reflected"))))
    decay = (1.0 + eps) ** -3
    bound = m1 * decay ** (depth - 1) / (1.0 - decay)
    return {
        "residual": residual,
        "analytic_tail_bound": bound,
        "first_term_amplitude": m1,
        "pass": bool(residual <= 2.0 * bound),
    }


# -- finite-difference derivative checks -------------------------------------


def fd_cross_check(trace: AxisTrace, order: int, x: float,
                   h: Optional[float] = None) -> float:
    """Relative gap between the spectral and central-difference derivative.

    Fourth-order central stencils; ``order`` is limited to 2 and ``x`` must
    sit inside the domain with room for the stencil.
    """
    if order not in (1, 2):
        raise ValueError("fd_cross_check supports orders 1 and 2")
    a, b = trace.domain
    idx = int(np.searchsorted(trace.breaks, x, side="right") - 1)
    idx = min(max(idx, 0), trace.npieces - 1)
    width = trace.breaks[idx + 1] - trace.breaks[idx]
    if h is None:
        h = 0.02 * width
    if x - 2 * h < a or x + 2 * h > b:
        raise ValueError("x too close to the domain edge for the stencil")
    f = trace
    if order == 1:
        fd = (8.0 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12.0 * h)
    else:
        fd = (-f(x + 2 * h) + 16.0 * f(x + h) - 30.0 * f(x)
              + 16.0 * f(x - h) - f(x - 2 * h)) / (12.0 * h ** 2)
    spectral = trace.derivative(order)(x)
    scale = max(abs(spectral), abs(fd), 1e-300)
    return abs(spectral - fd) / scale
