"""Closed-form geometry of the two-sphere configuration.

Both unit spheres sit on the x axis, surfaces a distance ``eps`` apart:
the left sphere B1 is centered at -(1 + eps/2), the right sphere B2 at
+(1 + eps/2).  The maps r1 and r2 send an axis point to the first
coordinate of its image charge under inversion in B1 and B2.  Composing
the two inversions produces the Moebius map x -> 2 + eps - 1/x on the
B1-centered coordinate, whose fixed points p1 < 1 < p2 organise the whole
image-charge cascade.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import mpmath
import numpy as np

from .config import EPS_CAP

# Guard against runaway image-chain loops.
MAX_CHAIN_COUNT = 2_000_000

_MP_DPS = 40


def _use_extended() -> bool:
    return os.environ.get("GAPFIELD_PRECISION", "extended").lower() != "double"


def kelvin_map_r1(x: float, eps: float) -> float:
    """Image-charge coordinate of (x,0,0) under inversion in the left sphere.

    Defined for x >= -eps/2 (on or outside B1 on the gap side); the image
    lands strictly inside B1's axis chord.
    """
    if x < -eps / 2.0:
        raise ValueError(
            f"kelvin_map_r1 requires x >= -eps/2 (outside sphere B1), got x={x}"
        )
    return 1.0 / (x + 1.0 + eps / 2.0) - (1.0 + eps / 2.0)


def kelvin_map_r2(x: float, eps: float) -> float:
    """Image-charge coordinate of (x,0,0) under inversion in the right sphere.

    Defined for x <= eps/2 (on or outside B2 on the gap side).
    """
    if x > eps / 2.0:
        raise ValueError(
            f"kelvin_map_r2 requires x <= eps/2 (outside sphere B2), got x={x}"
        )
    return 1.0 + eps / 2.0 - 1.0 / (1.0 + eps / 2.0 - x)


@dataclass(frozen=True)
class KelvinGeometry:
    """Fixed points and closed-form constants of the double-inversion map.

    p1 and p2 solve 2 + eps - 1/x = x; c0 and d feed the closed form of the
    iterate sequence x_n.  Immutable after construction.
    """

    epsilon: float
    p1: float
    p2: float
    c0: float
    d: float

    @property
    def gap_root(self) -> float:
        """sqrt(eps + (eps/2)^2) = (p2 - p1) / 2, computed without cancellation."""
        e = self.epsilon
        return math.sqrt(e + (e / 2.0) ** 2)


def fixed_points(eps: float) -> KelvinGeometry:
    """Fixed points of x -> 2 + eps - 1/x and the x_n closed-form constants.

    p2 = 1 + sqrt(eps + (eps/2)^2) + eps/2 and p1 is the conjugate root of
    x^2 - (2+eps) x + 1 = 0.  The constant c0 = (1 - p2 + eps)/(1 - p2)
    involves the cancellation 1 - p2 ~ -sqrt(eps), so everything is formed
    from q = p2 - 1 in extended precision and rounded at the boundary
    (set GAPFIELD_PRECISION=double to stay in float64).
    """
    if not (0.0 < eps < EPS_CAP):
        raise ValueError(f"eps must lie in (0, {EPS_CAP}), got {eps}")
    if _use_extended():
        with mpmath.workdps(_MP_DPS):
            e = mpmath.mpf(eps)
            root = mpmath.sqrt(e + (e / 2) ** 2)
            q = root + e / 2          # p2 - 1 > 0
            p2 = 1 + q
            p1 = (2 + e) - p2         # Vieta; equals 1/p2
            c0 = (q - e) / q          # (1 - p2 + eps)/(1 - p2)
            d = p2 / (2 + e - p2)
            return KelvinGeometry(eps, float(p1), float(p2), float(c0), float(d))
    root = math.sqrt(eps + (eps / 2.0) ** 2)
    q = root + eps / 2.0
    p2 = 1.0 + q
    p1 = (2.0 + eps) - p2
    c0 = (q - eps) / q
    d = p2 / (2.0 + eps - p2)
    return KelvinGeometry(eps, p1, p2, c0, d)


def x_sequence(geom: KelvinGeometry, n: int) -> float:
    """n-th iterate of x -> 2 + eps - 1/x started at x_1 = 1, by closed form.

    The closed form x_n = p2 + (2 + eps - 2 p2)/(c0 d^(n-1) + 1) is the
    canonical evaluator; the direct recursion loses accuracy as iterates
    cluster at p2 and serves only as a test oracle.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    # 2 + eps - 2 p2 = p1 - p2 = -2 * gap_root, which is cancellation-free.
    num = -2.0 * geom.gap_root
    log_growth = (n - 1) * math.log(geom.d)
    if log_growth > 600.0:
        return geom.p2
    return geom.p2 + num / (geom.c0 * math.exp(log_growth) + 1.0)


def image_chains(x: float, eps: float, count: int) -> tuple[np.ndarray, np.ndarray]:
    """The two positive image-charge distance sequences seeded from a gap point.

    Chain A starts with an inversion in B2, chain B with an inversion in B1;
    both then alternate.  Entry n is the absolute axis coordinate of the n-th
    image, positive by the sign convention that flips odd/even entries.  Both
    sequences increase toward p2 - 1.

    Returns ``(r_a, r_b)`` as float arrays of length ``count``.
    """
    if abs(x) > eps / 2.0:
        raise ValueError(f"image chains need |x| <= eps/2, got x={x}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if count > MAX_CHAIN_COUNT:
        raise ValueError(
            f"count={count} exceeds MAX_CHAIN_COUNT={MAX_CHAIN_COUNT}"
        )
    r_a = np.empty(count)
    r_b = np.empty(count)
    ga = x  # running global image point of chain A; next map: r2, r1, r2, ...
    gb = x  # chain B; next map: r1, r2, r1, ...
    for n in range(count):
        if n % 2 == 0:
            ga = kelvin_map_r2(ga, eps)
            gb = kelvin_map_r1(gb, eps)
        else:
            ga = kelvin_map_r1(ga, eps)
            gb = kelvin_map_r2(gb, eps)
        # odd maps land inside B2 (positive), even maps inside B1 (negative)
        r_a[n] = abs(ga)
        r_b[n] = abs(gb)
    return r_a, r_b
