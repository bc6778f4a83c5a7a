"""Closed-form Gaussian instances of the interval modification machinery.

These continuous cases have analytic p-value functions, so they double as
oracles for the finite-space engine's semantics: modifying a point
estimator a*xbar + b of a normal mean (known sigma), refining a symmetric
or asymmetric box interval around the mean, the one-sided unknown-variance
case, and the generic stochastically monotone one-parameter family.

No discretization is involved; every root is solved on a closed-form
unimodal function by geometric bracket expansion and indicator bisection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

from .dist import std_normal_cdf, std_normal_quantile, t_cdf, t_quantile
from .errors import InputError

__all__ = [
    "GaussianSpec",
    "h_point_scale",
    "interval_point_scale",
    "box_h",
    "refine_box",
    "one_sided_t_modify",
    "stochastic_lower",
]


@dataclass(frozen=True)
class GaussianSpec:
    """Normal-mean design: sample size, known sigma, and level."""

    n: int
    sigma: float
    alpha: float

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise InputError(f"n must be a positive integer, got {self.n!r}")
        if not self.sigma > 0:
            raise InputError(f"sigma must be positive, got {self.sigma!r}")
        if not 0.0 < self.alpha < 1.0:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha!r}")

    @property
    def scale(self) -> float:
        return self.sigma / math.sqrt(self.n)


def h_point_scale(xbar: float, mu0: float, a: float, b: float,
                  spec: GaussianSpec) -> float:
    """p-value function of the modification of the estimator a*xbar + b.

    Piecewise in mu0 around the mode a*xbar + b, where it equals one.
    """
    if not a > 0:
        raise InputError(f"scale coefficient a must be positive, got {a!r}")
    r = 1.0 / spec.scale
    mode = a * xbar + b
    inner = r * ((2.0 - a) * mu0 - 2.0 * b - a * xbar) / a
    if mu0 >= mode:
        return 1.0 - std_normal_cdf(inner) + std_normal_cdf(r * (xbar - mu0))
    return 1.0 - std_normal_cdf(r * (xbar - mu0)) + std_normal_cdf(inner)


def _expand_and_bisect(
    h: Callable[[float], float],
    start_inside: float,
    alpha: float,
    step0: float,
    direction: float,
    tol: float,
) -> float:
    """Boundary of {h > alpha} on one flank of a unimodal h."""
    step = step0
    inside = start_inside
    outside = inside + direction * step
    for _ in range(300):
        if h(outside) <= alpha:
            break
        inside = outside
        step *= 2.0
        outside = inside + direction * step
    else:  # pragma: no cover - h decays to 0 on each flank
        raise InputError("failed to bracket the interval endpoint")
    while abs(inside - outside) > tol:
        mid = 0.5 * (inside + outside)
        if h(mid) > alpha:
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)


def interval_point_scale(
    xbar: float, a: float, b: float, spec: GaussianSpec
) -> Tuple[float, float, str]:
    """Exact interval from modifying a*xbar + b, with its case label.

    Three regimes in the scale coefficient: above 2 the p-value function
    tends to one in both tails and the interval is the whole line; below 2
    it is unimodal with vanishing tails and the interval is finite; at
    exactly 2 one tail survives, giving three closed-form subcases.
    """
    if not a > 0:
        raise InputError(f"scale coefficient a must be positive, got {a!r}")
    alpha = spec.alpha
    s = spec.scale
    if a > 2.0:
        return -math.inf, math.inf, "i"
    if a < 2.0:
        mode = a * xbar + b

        def h(mu0: float) -> float:
            return h_point_scale(xbar, mu0, a, b, spec)

        tol = 1e-10 * s
        lower = _expand_and_bisect(h, mode, alpha, s, -1.0, tol)
        upper = _expand_and_bisect(h, mode, alpha, s, +1.0, tol)
        return lower, upper, "ii"
    z_a = std_normal_quantile(1.0 - alpha)
    edge = z_a * s - b
    tail = std_normal_cdf(-(b + xbar) / s)
    if xbar > edge:
        lower = xbar - s * std_normal_quantile(1.0 - alpha + tail)
        return lower, math.inf, "iii-1"
    if xbar >= -z_a * s - b:
        return -math.inf, math.inf, "iii-2"
    upper = xbar - s * std_normal_quantile(alpha - 1.0 + tail)
    return -math.inf, upper, "iii-3"


def box_h(xbar: float, mu0: float, a: float, b: float, spec: GaussianSpec) -> float:
    """p-value function for refining [xbar - a*s, xbar + b*s], s = sigma/sqrt(n)."""
    w = (mu0 - xbar) / spec.scale
    half_gap = (a - b) / 2.0
    if w <= (b - a) / 2.0:
        upper_cut = max(half_gap, -w)
        lower_cut = min(half_gap, a - b + w)
    else:
        upper_cut = max(half_gap, w + a - b)
        lower_cut = min(half_gap, -w)
    return (1.0 - std_normal_cdf(upper_cut)) + std_normal_cdf(lower_cut)


def refine_box(
    xbar: float, a: float, b: float, spec: GaussianSpec
) -> Tuple[float, float]:
    """Refine the exact-but-conservative box interval to its modification.

    Requires a, b at or above the two-sided critical value so the input is
    exact.  The output endpoints are xbar + c_i * sigma/sqrt(n) whose
    normal tail levels add to alpha; for a = b the result is the usual
    two-sided normal interval.
    """
    z_half = std_normal_quantile(1.0 - spec.alpha / 2.0)
    if a < z_half - 1e-12 or b < z_half - 1e-12:
        raise InputError(
            f"box coefficients must be at least the two-sided critical value "
            f"{z_half:.6f}, got a={a!r}, b={b!r}"
        )
    s = spec.scale
    mode = xbar + s * (b - a) / 2.0

    def h(mu0: float) -> float:
        return box_h(xbar, mu0, a, b, spec)

    tol = 1e-10 * s
    lower = _expand_and_bisect(h, mode, spec.alpha, s, -1.0, tol)
    upper = _expand_and_bisect(h, mode, spec.alpha, s, +1.0, tol)
    return lower, upper


def one_sided_t_modify(c: float, n: int, alpha: float) -> str:
    """Modification of the lower interval [xbar + c*S/sqrt(n), inf).

    Returns "keep" when the input order already supports an exact interval
    (c at or below minus the upper-alpha t percentile, where the p-value on
    the kept side is 1 - F_T(-c) <= alpha outside it) and "whole_line"
    otherwise, where the modification collapses to the trivial interval.
    """
    if int(n) != n or n < 2:
        raise InputError(f"n must be an integer >= 2, got {n!r}")
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha!r}")
    t_crit = t_quantile(1.0 - alpha, int(n) - 1)
    return "keep" if c <= -t_crit else "whole_line"


def stochastic_lower(
    cdf: Callable[[float, float], float],
    x: float,
    alpha: float,
    theta_range: Tuple[float, float],
    probe_points: int = 50,
    tol_scale: float = 1e-10,
) -> float:
    """Smallest exact lower limit for a stochastically monotone family.

    ``cdf(x, theta)`` must be nonincreasing in theta for each x (checked on
    a probe grid).  The p-value of the one-sided null is 1 - cdf(x - 1,
    theta0), nondecreasing in theta0, and the returned limit is the
    infimum of its alpha super-level set.
    """
    lo, hi = theta_range
    if not lo < hi:
        raise InputError("theta range must be a nondegenerate interval")
    probes = [lo + (hi - lo) * i / (probe_points - 1) for i in range(probe_points)]
    vals = [cdf(x - 1, th) for th in probes]
    for earlier, later in zip(vals, vals[1:]):
        if later > earlier + 1e-9:
            raise InputError(
                "cdf is not nonincreasing in theta on the probe grid; the "
                "monotone construction does not apply"
            )

    def h(theta0: float) -> float:
        return 1.0 - cdf(x - 1, theta0)

    if h(lo) > alpha:
        return lo
    if h(hi) <= alpha:
        return hi
    a, b = lo, hi  # h(a) <= alpha < h(b)
    tol = tol_scale * (hi - lo)
    while b - a > tol:
        mid = 0.5 * (a + b)
        if h(mid) > alpha:
            b = mid
        else:
            a = mid
    return 0.5 * (a + b)
