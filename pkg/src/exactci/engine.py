"""Generic p-value-function engine over finite models.

The central object is a function h(x, theta0) in [0, 1], jointly over the
observation x and the hypothesized parameter value theta0.  Its alpha
super-level set in x is the acceptance region of a level-alpha test and in
theta0 the 1-alpha confidence set; the smallest closed interval containing
the latter is the reported confidence interval.

Two representations are supported:

* statistic-based: h(x, theta0) is the supremum over the null parameter
  set of the probability of the tie-inclusive sub-level set
  {y : T(y, theta0) <= T(x, theta0)}, with small T favoring rejection;
* direct: a closed-form h supplied as a callable (for constructions, like
  the doubled-tail proportion interval, that are not sub-level-set sums).

Everything here is exact enumeration over the finite sample space; the
only approximations are the parameter grids declared in `GridPolicy`.
h is in general discontinuous in theta0, so interval endpoints are located
by bisection on the boolean indicator h > alpha, never by root-finding on
h - alpha.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np

from ._parallel import ordered_map
from .errors import GridResolutionWarning, InputError
from .limits import LimitsTable

__all__ = [
    "GridPolicy",
    "FiniteModel",
    "HFunctionSpec",
    "h_profile",
    "h_at",
    "sup_over_nuisance",
    "invert_interval",
    "invert_all",
    "acceptance_region",
    "worst_case_size",
    "theta_grid",
]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

# Statistic values this close are treated as tied.  Exact-equality grouping
# is unstable under float noise (mirror-symmetric sample points must tie),
# and enlarging a tie group can only increase h, which preserves validity.
_TIE_ATOL = 1e-12
_TIE_RTOL = 1e-10


@dataclass(frozen=True)
class GridPolicy:
    """Search-resolution knobs shared by every construction.

    theta_points : size of the grid on the parameter-of-interest range
    nuisance_points : size of each nuisance-domain grid (and of the
        constrained-likelihood grids that share this configuration)
    bisection_tol : bracket width at which endpoint bisections stop
    polish : golden-section refinement of grid suprema around the best cell
    """

    theta_points: int = 2000
    nuisance_points: int = 1001
    bisection_tol: float = 1e-9
    polish: bool = True

    def __post_init__(self) -> None:
        if self.theta_points < 2 or self.nuisance_points < 2:
            raise InputError("grid point counts must be at least 2")
        if not self.bisection_tol > 0:
            raise InputError("bisection tolerance must be positive")


@dataclass
class FiniteModel:
    """An enumerated sample space with a parameterized mass function.

    points : (P,) or (P, k) integer array listing the sample points
    theta_range : closed range [A, B] of the parameter of interest
    mass_fn : callable (theta, etas (E,)) -> (E, P) mass matrix
    nuisance_fn : callable theta -> (lo, hi) nuisance domain, or None when
        the model has no nuisance parameter
    monotone_in_theta : the family is stochastically monotone in theta, so
        suprema over one-sided composite nulls attain at the boundary
    """

    points: np.ndarray
    theta_range: Tuple[float, float]
    mass_fn: Callable[[float, np.ndarray], np.ndarray]
    nuisance_fn: Optional[Callable[[float], Tuple[float, float]]] = None
    monotone_in_theta: bool = False
    name: str = ""
    _index: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=int)
        lo, hi = self.theta_range
        if not lo < hi:
            raise InputError("theta range must be a nondegenerate closed interval")

    @property
    def n_points(self) -> int:
        return len(self.points)

    def nuisance_domain(self, theta: float) -> Tuple[float, float]:
        if self.nuisance_fn is None:
            return (0.0, 0.0)
        lo, hi = self.nuisance_fn(theta)
        if hi < lo - 1e-12:
            raise InputError(f"empty nuisance domain at theta = {theta}")
        return float(lo), float(max(lo, hi))

    def mass(self, theta: float, etas: np.ndarray) -> np.ndarray:
        out = self.mass_fn(theta, np.atleast_1d(np.asarray(etas, dtype=float)))
        return np.asarray(out, dtype=float)

    def point_index(self, point) -> int:
        if self._index is None:
            pts = self.points if self.points.ndim == 2 else self.points[:, None]
            self._index = {tuple(row): i for i, row in enumerate(pts)}
        key = tuple(np.atleast_1d(np.asarray(point, dtype=int)))
        if key not in self._index:
            raise InputError(f"sample point {key} is not in the model")
        return self._index[key]


@dataclass(frozen=True)
class HFunctionSpec:
    """Recipe for h(x, theta0) on a finite model.

    Exactly one of ``statistic`` and ``h_values`` must be given:

    statistic : callable theta0 -> (P,) statistic values over the sample
        points, small values favoring the alternative
    h_values : callable theta0 -> (P,) of h evaluated directly
    null_kind : "point" (theta = theta0), "lower" (theta <= theta0) or
        "upper" (theta >= theta0)
    """

    statistic: Optional[Callable[[float], np.ndarray]] = None
    h_values: Optional[Callable[[float], np.ndarray]] = None
    null_kind: str = "point"

    def __post_init__(self) -> None:
        if (self.statistic is None) == (self.h_values is None):
            raise InputError("specify exactly one of statistic and h_values")
        if self.null_kind not in ("point", "lower", "upper"):
            raise InputError(f"unknown null kind {self.null_kind!r}")


def _tie_group_ends(sorted_vals: np.ndarray) -> np.ndarray:
    """Index of the last member of each tie group, per sorted slot."""
    v = sorted_vals
    if len(v) == 1:
        return np.zeros(1, dtype=int)
    if np.any(np.isnan(v)):
        raise InputError("statistic produced NaN values")
    a, b = v[:-1], v[1:]
    both_finite = np.isfinite(a) & np.isfinite(b)
    with np.errstate(invalid="ignore"):
        tol = _TIE_ATOL + _TIE_RTOL * np.maximum(np.abs(a), np.abs(b))
        new_group = np.where(both_finite, (b - a) > tol, a != b)
    gid = np.concatenate(([0], np.cumsum(new_group.astype(int))))
    starts = np.flatnonzero(np.concatenate(([True], new_group)))
    group_last = np.concatenate((starts[1:] - 1, [len(v) - 1]))
    return group_last[gid]


def _nuisance_grid(lo: float, hi: float, policy: GridPolicy) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    return np.linspace(lo, hi, policy.nuisance_points)


def _golden_max_batch(
    f: Callable[[np.ndarray], np.ndarray],
    a: np.ndarray,
    b: np.ndarray,
    xtol: float = 1e-9,
    max_iter: int = 100,
) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized golden-section maximization on per-row brackets [a, b].

    One function evaluation per iteration; the surviving interior probe is
    reused, as in the scalar textbook scheme.
    """
    a = a.astype(float).copy()
    b = b.astype(float).copy()
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = np.asarray(f(c), dtype=float)
    fd = np.asarray(f(d), dtype=float)
    for _ in range(max_iter):
        if np.max(b - a) <= xtol:
            break
        left = fc > fd
        a = np.where(left, a, c)
        b = np.where(left, d, b)
        # the surviving interior probe swaps roles; only one point is new
        x_new = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
        f_new = np.asarray(f(x_new), dtype=float)
        c, d, fc, fd = (
            np.where(left, x_new, d),
            np.where(left, c, x_new),
            np.where(left, f_new, fd),
            np.where(left, fc, f_new),
        )
    x = 0.5 * (a + b)
    return x, np.asarray(f(x), dtype=float)


def sup_over_nuisance(
    f: Callable[[np.ndarray], np.ndarray],
    domain: Tuple[float, float],
    policy: GridPolicy,
) -> Tuple[float, float]:
    """Supremum of a vectorized function on a closed interval.

    Equally spaced grid scan including both endpoints, then optional
    golden-section refinement of the bracketing cell around the best grid
    point.  The result is never below the plain grid maximum, and argmax
    ties break toward the smaller nuisance value.
    """
    lo, hi = domain
    if hi < lo:
        raise InputError("nuisance domain is empty")
    if hi == lo:
        return lo, float(f(np.array([lo]))[0])
    grid = np.linspace(lo, hi, policy.nuisance_points)
    vals = np.asarray(f(grid), dtype=float)
    j = int(np.argmax(vals))
    best_x, best_v = float(grid[j]), float(vals[j])
    if policy.polish:
        a = grid[max(j - 1, 0)]
        b = grid[min(j + 1, len(grid) - 1)]
        x, v = _golden_max_batch(f, np.array([a]), np.array([b]))
        if float(v[0]) > best_v:
            best_x, best_v = float(x[0]), float(v[0])
    return best_x, best_v


def _sorted_profile_at(
    model: FiniteModel,
    theta_null: float,
    order: np.ndarray,
    group_end: np.ndarray,
    policy: GridPolicy,
    polish_slots: Optional[np.ndarray],
) -> np.ndarray:
    """Per-sorted-slot sup over the nuisance domain of P(sub-level set)."""
    lo, hi = model.nuisance_domain(theta_null)
    etas = _nuisance_grid(lo, hi, policy)
    mass = model.mass(theta_null, etas)
    csum = np.cumsum(mass[:, order], axis=1)
    per_eta = csum[:, group_end]
    best_eta_idx = np.argmax(per_eta, axis=0)
    cols = np.arange(per_eta.shape[1])
    vals = per_eta[best_eta_idx, cols]
    if polish_slots is not None and polish_slots.size and hi > lo:
        sub = polish_slots
        j = best_eta_idx[sub]
        a = etas[np.maximum(j - 1, 0)]
        b = etas[np.minimum(j + 1, len(etas) - 1)]
        gsub = group_end[sub]

        def eval_sub(eta_vec: np.ndarray) -> np.ndarray:
            m = model.mass(theta_null, eta_vec)
            cs = np.cumsum(m[:, order], axis=1)
            return cs[np.arange(len(sub)), gsub]

        _, polished = _golden_max_batch(eval_sub, a, b)
        vals = vals.copy()
        vals[sub] = np.maximum(vals[sub], polished)
    return vals


def _null_thetas(model: FiniteModel, spec: HFunctionSpec, theta0: float,
                 policy: GridPolicy) -> np.ndarray:
    if spec.null_kind == "point" or model.monotone_in_theta:
        return np.array([theta0])
    lo, hi = model.theta_range
    if spec.null_kind == "lower":
        side = (lo, theta0)
    else:
        side = (theta0, hi)
    if side[1] <= side[0]:
        return np.array([side[0]])
    return np.linspace(side[0], side[1], policy.theta_points)


def h_profile(
    model: FiniteModel,
    spec: HFunctionSpec,
    theta0: float,
    policy: GridPolicy,
    polish: bool | np.ndarray | Sequence[int] = False,
) -> np.ndarray:
    """h(x, theta0) for every sample point x at one theta0.

    ``polish`` selects which points receive golden-section refinement of
    the nuisance supremum: False for none (grid maximum only), True for
    all, or an array of point indices.
    """
    lo, hi = model.theta_range
    if not lo - 1e-12 <= theta0 <= hi + 1e-12:
        raise InputError(f"theta0 = {theta0} outside parameter range [{lo}, {hi}]")
    if spec.h_values is not None:
        return np.clip(np.asarray(spec.h_values(theta0), dtype=float), 0.0, 1.0)
    t_vals = np.asarray(spec.statistic(theta0), dtype=float)
    if t_vals.shape != (model.n_points,):
        raise InputError("statistic must return one value per sample point")
    order = np.argsort(t_vals, kind="stable")
    group_end = _tie_group_ends(t_vals[order])
    if polish is True:
        polish_slots: Optional[np.ndarray] = np.arange(model.n_points)
    elif polish is False or polish is None:
        polish_slots = None
    else:
        requested = np.asarray(polish, dtype=int)
        inv = np.empty(model.n_points, dtype=int)
        inv[order] = np.arange(model.n_points)
        polish_slots = inv[requested]
    best = None
    for theta_null in _null_thetas(model, spec, theta0, policy):
        prof = _sorted_profile_at(model, theta_null, order, group_end, policy,
                                  polish_slots)
        best = prof if best is None else np.maximum(best, prof)
    h = np.empty(model.n_points)
    h[order] = best
    return np.clip(h, 0.0, 1.0)


def h_at(
    model: FiniteModel,
    spec: HFunctionSpec,
    index: int,
    theta0: float,
    policy: GridPolicy,
) -> float:
    """h at a single sample point, with the policy's polish setting."""
    polish = np.array([index]) if policy.polish else False
    return float(h_profile(model, spec, theta0, policy, polish=polish)[index])


def theta_grid(model: FiniteModel, policy: GridPolicy) -> np.ndarray:
    lo, hi = model.theta_range
    return np.linspace(lo, hi, policy.theta_points)


def _bisect_flank(
    h_of: Callable[[float], float],
    inside: float,
    outside: float,
    alpha: float,
    tol: float,
) -> float:
    """Boundary of {h > alpha} between an inside and an outside point."""
    while abs(inside - outside) > tol:
        mid = 0.5 * (inside + outside)
        if h_of(mid) > alpha:
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)


def invert_interval(
    model: FiniteModel,
    spec: HFunctionSpec,
    index: int,
    alpha: float,
    policy: GridPolicy,
    grid_thetas: Optional[np.ndarray] = None,
    grid_h: Optional[np.ndarray] = None,
    threads: int = 1,
) -> Tuple[float, float, bool]:
    """Smallest closed interval containing {theta0 : h(x, theta0) > alpha}.

    Scans the theta grid for the extreme points of the super-level set and
    bisects each flank on the indicator h > alpha.  Returns (L, U,
    degenerate); a degenerate result flags an empty super-level set at grid
    resolution and sits at the argmax of h (the grid is too coarse relative
    to alpha there).

    For one-sided null kinds the unconstrained side is pinned to the
    parameter range boundary.
    """
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    lo, hi = model.theta_range
    thetas = theta_grid(model, policy) if grid_thetas is None else grid_thetas
    if grid_h is None:
        grid_h = np.array(
            ordered_map(
                lambda t: h_at(model, spec, index, t, policy), thetas, threads
            )
        )
    above = np.flatnonzero(grid_h > alpha)
    if above.size == 0:
        j = int(np.argmax(grid_h))
        warnings.warn(
            f"super-level set empty at grid resolution for point index {index}; "
            "returning a degenerate interval at the h maximum",
            GridResolutionWarning,
            stacklevel=2,
        )
        return float(thetas[j]), float(thetas[j]), True

    def h_of(theta: float) -> float:
        return h_at(model, spec, index, theta, policy)

    i_lo, i_hi = above[0], above[-1]
    if spec.null_kind == "upper":
        lower = lo
    elif i_lo == 0:
        lower = lo
    else:
        lower = _bisect_flank(
            h_of, thetas[i_lo], thetas[i_lo - 1], alpha, policy.bisection_tol
        )
    if spec.null_kind == "lower":
        upper = hi
    elif i_hi == len(thetas) - 1:
        upper = hi
    else:
        upper = _bisect_flank(
            h_of, thetas[i_hi], thetas[i_hi + 1], alpha, policy.bisection_tol
        )
    return float(lower), float(upper), False


def invert_all(
    model: FiniteModel,
    spec: HFunctionSpec,
    alpha: float,
    policy: GridPolicy,
    threads: int = 1,
) -> Tuple[LimitsTable, list]:
    """Invert h into an interval for every sample point.

    The theta-grid profile is evaluated once for all points (the dominant
    cost is shared), then each point's flanks are bisected independently.
    Returns the limits table and the list of degenerate point indices.
    """
    thetas = theta_grid(model, policy)
    rows = ordered_map(
        lambda t: h_profile(model, spec, t, policy, polish=False), thetas, threads
    )
    grid_h = np.vstack(rows)

    def solve(index: int) -> Tuple[float, float, bool]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GridResolutionWarning)
            return invert_interval(
                model, spec, index, alpha, policy,
                grid_thetas=thetas, grid_h=grid_h[:, index],
            )

    results = ordered_map(solve, range(model.n_points), threads)
    lower = np.array([r[0] for r in results])
    upper = np.array([r[1] for r in results])
    degenerate = [i for i, r in enumerate(results) if r[2]]
    if degenerate:
        warnings.warn(
            f"{len(degenerate)} sample point(s) had an empty super-level set at "
            "grid resolution and received degenerate intervals",
            GridResolutionWarning,
            stacklevel=2,
        )
    return LimitsTable(model.points.copy(), lower, upper), degenerate


def acceptance_region(
    model: FiniteModel,
    spec: HFunctionSpec,
    theta0: float,
    alpha: float,
    policy: GridPolicy,
) -> np.ndarray:
    """Indices of sample points accepted at level alpha: {x : h > alpha}."""
    if not 0.0 <= alpha <= 1.0:
        raise InputError(f"alpha must lie in [0, 1], got {alpha}")
    prof = h_profile(model, spec, theta0, policy, polish=policy.polish)
    return np.flatnonzero(prof > alpha)


def worst_case_size(
    model: FiniteModel,
    spec: HFunctionSpec,
    alpha: float,
    theta_values: Iterable[float],
    policy: GridPolicy,
) -> Tuple[float, float]:
    """Exact worst-case rejection probability over the supplied null grid.

    For each theta0, the rejection event {h(X, theta0) <= alpha} is
    enumerated and its mass maximized over the null parameter set.  A valid
    h keeps the returned maximum at or below alpha.
    """
    worst = 0.0
    worst_theta = None
    for theta0 in theta_values:
        prof = h_profile(model, spec, theta0, policy, polish=policy.polish)
        reject = prof <= alpha
        if not np.any(reject):
            continue
        size_here = 0.0
        for theta_null in _null_thetas(model, spec, float(theta0), policy):

            def rejected_mass(etas: np.ndarray) -> np.ndarray:
                return model.mass(theta_null, etas)[:, reject].sum(axis=1)

            _, val = sup_over_nuisance(
                rejected_mass, model.nuisance_domain(theta_null), policy
            )
            size_here = max(size_here, val)
        if size_here > worst:
            worst = size_here
            worst_theta = float(theta0)
    return worst, worst_theta
