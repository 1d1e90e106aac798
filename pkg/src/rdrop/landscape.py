"""Ball-cluster landscape: optimal splits of a mass among far-apart balls.

``f_k(m)`` is the least total energy of at most ``k`` balls with total
volume ``m``, placed infinitely far apart so only self-energies count:

    f_k(m) = min { sum_i e(m_i) : m_1 + ... + m_k = m, m_i >= 0 },
    e(x)   = A x^p + B x^q,

with ``A = N omega_N^{1/N}``, ``p = (N-1)/N``, ``B = gamma c_alpha
omega_N^{-q}`` and ``q = (2N-alpha)/N``.  ``e`` is concave below its
inflection point and convex above it.  At a minimiser the marginal costs
``e'(m_i)`` of all nonzero masses agree; since ``e'`` is decreasing then
increasing, nonzero masses take at most two values, the smaller one in the
concave part, and two concave masses could be merged or rebalanced at a
profit.  Every minimiser is therefore ``j`` equal masses plus at most one
smaller mass, a one-parameter family per ``j`` that is searched directly.

The table produced here is a ball-cluster landscape; it is not asserted to
be the infimum of the energy over all sets.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from ._parallel import ordered_map
from .coefficients import RieszCoefficients, riesz_coefficients
from .errors import BracketError, DomainError, RdropError
from .params import ModelParams
from .stability import critical_radius, first_unstable_degree, monotonicity_switch_degree

__all__ = [
    "Method",
    "PartitionResult",
    "LandscapeRow",
    "LandscapeTable",
    "ThresholdRow",
    "BallEnergy",
    "rescale_to_unit_volume",
    "optimal_partition",
    "brute_partition",
    "ground_state",
    "breakpoints",
    "mglob_upper_bound",
    "sweep_thresholds",
    "landscape_table",
]

SNAP_RTOL = 1e-12
CROSS_TOL = 1e-12
BISECT_RTOL = 1e-8
BRACKET_DENSITY = 64
_FAMILY_GRID = 65
_REFINED_FAMILIES = 3


class Method(str, enum.Enum):
    EQUAL_SPLIT_SCAN = "equal_split_scan"
    LOCAL_SEARCH = "local_search"
    BRUTE_GRID = "brute_grid"


@dataclass(frozen=True)
class BallEnergy:
    """Energy ``e(x) = A x^p + B x^q`` of one isolated ball of volume ``x``."""

    A: float
    p: float
    B: float
    q: float

    @classmethod
    def from_coeffs(cls, params: ModelParams, coeffs: RieszCoefficients) -> "BallEnergy":
        N, a = params.N, params.alpha
        q = (2 * N - a) / N
        return cls(A=N * params.omega_N ** (1.0 / N), p=(N - 1) / N,
                   B=params.gamma * coeffs.c_alpha * params.omega_N ** (-q), q=q)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.A * x ** self.p + self.B * x ** self.q

    def inflection(self) -> float:
        """Volume where ``e`` switches from concave to convex."""
        A, p, B, q = self.A, self.p, self.B, self.q
        return (A * p * (1.0 - p) / (B * q * (q - 1.0))) ** (1.0 / (q - p))

    def total(self, masses) -> float:
        masses = [x for x in masses if x > 0.0]
        return math.fsum(float(self(x)) for x in masses)


@dataclass(frozen=True)
class PartitionResult:
    m: float
    k: int
    masses: tuple
    value: float
    method: Method

    @property
    def nonzero(self) -> tuple:
        return tuple(x for x in self.masses if x > 0.0)


def rescale_to_unit_volume(params: ModelParams, m: float) -> ModelParams:
    """Parameters for which the unit ball stands in for volume ``m``.

    Dilating a set of volume ``m`` to volume ``omega_N`` multiplies the
    energy by a constant and ``gamma`` by ``(m / omega_N)^{(N-alpha+1)/N}``.
    """
    if not m > 0:
        raise DomainError("mass m must be positive")
    N, a = params.N, params.alpha
    return params.with_gamma(params.gamma * (m / params.omega_N) ** ((N - a + 1) / N))


def _snap(masses, m: float) -> list:
    return [0.0 if x < SNAP_RTOL * m else float(x) for x in masses]


def _result(e: BallEnergy, m: float, k: int, masses, method: Method) -> PartitionResult:
    masses = sorted(_snap(masses, m), reverse=True)
    masses += [0.0] * (k - len(masses))
    return PartitionResult(m=float(m), k=k, masses=tuple(masses),
                           value=e.total(masses), method=method)


def _family_masses(m: float, j: int, x: float) -> list:
    return [x] * j + [m - j * x]


def _partition(e: BallEnergy, m: float, k: int) -> PartitionResult:
    if not m > 0:
        raise DomainError("mass m must be positive")
    if k < 1:
        raise DomainError("k must be >= 1")
    j_all = np.arange(1, k + 1)
    equal = j_all * e(m / j_all)
    j_eq = int(j_all[np.argmin(equal)])
    best_masses, best_value = [m / j_eq] * j_eq, float(equal[j_eq - 1])
    best_method = Method.EQUAL_SPLIT_SCAN
    if k == 1:
        return _result(e, m, k, best_masses, best_method)

    # j copies of x plus y = m - j x, with m/(j+1) <= x <= m/j
    j = np.arange(1, k)[:, None]
    t = np.linspace(0.0, 1.0, _FAMILY_GRID)[None, :]
    lo, hi = m / (j + 1), m / j
    x = lo + t * (hi - lo)
    y = np.maximum(m - j * x, 0.0)
    vals = j * e(x) + e(y)
    order = np.argsort(vals.min(axis=1))[:_REFINED_FAMILIES]
    for row in order:
        jj = int(j[row, 0])
        i = int(np.argmin(vals[row]))
        a = float(x[row, max(i - 1, 0)])
        b = float(x[row, min(i + 1, _FAMILY_GRID - 1)])
        f = lambda s, jj=jj: jj * float(e(s)) + float(e(max(m - jj * s, 0.0)))
        res = minimize_scalar(f, bounds=(a, b), method="bounded",
                              options={"xatol": 1e-13 * m, "maxiter": 500})
        cand = [(float(res.x), res.fun), (float(x[row, i]), float(vals[row, i]))]
        s, v = min(cand, key=lambda c: c[1])
        masses = _family_masses(m, jj, s)
        v = e.total(_snap(masses, m))
        if v < best_value:
            best_masses, best_value, best_method = masses, v, Method.LOCAL_SEARCH
    return _result(e, m, k, best_masses, best_method)


def optimal_partition(params: ModelParams, coeffs: RieszCoefficients,
                      m: float, k: int) -> PartitionResult:
    """``f_k(m)`` and a minimising split into at most ``k`` balls.

    Equal splits into ``j <= k`` balls are scanned first; each family of
    ``j`` equal balls plus one smaller ball is then sampled on a grid and
    the most promising families are refined with a bounded Brent search.
    The lowest value found is returned, so it never exceeds any equal split.
    """
    return _partition(BallEnergy.from_coeffs(params, coeffs), m, k)


def brute_partition(params: ModelParams, coeffs: RieszCoefficients, m: float,
                    k: int, steps: int = 400, zoom: int = 40) -> PartitionResult:
    """Grid oracle for ``f_k(m)``, ``k <= 3``.

    Evaluates every point of the simplex grid with spacing ``m / steps``,
    then repeatedly refines a 9-point-per-axis neighbourhood of the best
    point with the spacing divided by 4.  Uses no structural facts about the
    minimiser.
    """
    if not 1 <= k <= 3:
        raise DomainError("the grid oracle supports 1 <= k <= 3")
    e = BallEnergy.from_coeffs(params, coeffs)
    if k == 1:
        return _result(e, m, 1, [m], Method.BRUTE_GRID)
    h = m / steps
    axes = np.arange(steps + 1) * h
    free = np.stack(np.meshgrid(*([axes] * (k - 1)), indexing="ij"), -1).reshape(-1, k - 1)

    def evaluate(pts):
        last = m - pts.sum(axis=1)
        ok = (last >= -1e-15 * m) & np.all(pts >= 0.0, axis=1)
        pts, last = pts[ok], np.maximum(last[ok], 0.0)
        v = e(pts).sum(axis=1) + e(last)
        i = int(np.argmin(v))
        return pts[i], float(v[i])

    best, value = evaluate(free)
    offsets = np.array(list(itertools.product(range(-4, 5), repeat=k - 1)), dtype=float)
    for _ in range(zoom):
        h /= 4.0
        cand, v = evaluate(np.maximum(best + offsets * h, 0.0))
        if v <= value:
            best, value = cand, v
    masses = list(best) + [max(m - float(best.sum()), 0.0)]
    return _result(e, m, k, masses, Method.BRUTE_GRID)


def _ball_count_bound(e: BallEnergy, m: float) -> int:
    # nonzero masses above the inflection point, plus at most one below it
    return int(m // e.inflection()) + 1


def ground_state(params: ModelParams, coeffs: RieszCoefficients, m: float) -> PartitionResult:
    """``inf_k f_k(m)``, attained with ``k = floor(m / x_infl) + 1`` balls."""
    e = BallEnergy.from_coeffs(params, coeffs)
    return _partition(e, m, _ball_count_bound(e, m))


def _improves(e: BallEnergy, m: float, j: int) -> bool:
    return _partition(e, m, j + 1).value < _partition(e, m, j).value - CROSS_TOL


def breakpoints(params: ModelParams, coeffs: RieszCoefficients, k_max: int,
                m_max: float) -> tuple:
    """Masses ``m_1 < m_2 < ...`` where an extra ball starts to pay off.

    ``m_j`` is the smallest ``m`` with ``f_{j+1}(m) < f_j(m) - 1e-12``,
    bracketed on a grid of 64 points per unit mass and bisected to
    ``1e-8 m``.  The search stops at ``m_max``; :class:`BracketError` is
    raised if not even ``m_1`` lies below it.
    """
    if k_max < 2:
        raise DomainError("k_max must be >= 2")
    e = BallEnergy.from_coeffs(params, coeffs)
    found = []
    start = 1
    for j in range(1, k_max):
        n_max = int(math.floor(m_max * BRACKET_DENSITY))
        hit = None
        for n in range(start, n_max + 1):
            if _improves(e, n / BRACKET_DENSITY, j):
                hit = n
                break
        if hit is None:
            if not found:
                raise BracketError(f"f_2 never drops below f_1 for m <= {m_max}")
            break
        hi = hit / BRACKET_DENSITY
        lo = max((hit - 1) / BRACKET_DENSITY, found[-1] if found else 0.0)
        if lo == 0.0:
            lo = hi / 2.0
            while _improves(e, lo, j):
                hi, lo = lo, lo / 2.0
        while hi - lo > BISECT_RTOL * hi:
            mid = 0.5 * (lo + hi)
            if _improves(e, mid, j):
                hi = mid
            else:
                lo = mid
        if found and not hi > found[-1]:
            raise BracketError(f"breakpoint m_{j} = {hi!r} does not exceed m_{j - 1}")
        found.append(hi)
        start = hit
    return tuple(found)


def mglob_upper_bound(params: ModelParams) -> float:
    """Mass above which two distant balls beat one, using ``c_alpha >= omega_N^2 2^-alpha``.

    ``omega_N (2^alpha N (2^{1/N} - 1) / (omega_N gamma (1 - 2^{-(N-alpha)/N})))^{N/(N+1-alpha)}``
    """
    N, a, g, w = params.N, params.alpha, params.gamma, params.omega_N
    inner = 2.0 ** a * N * (2.0 ** (1.0 / N) - 1.0) / (w * g * (1.0 - 2.0 ** (-(N - a) / N)))
    return w * inner ** (N / (N + 1 - a))


class ThresholdRow(NamedTuple):
    alpha: float
    d_A: int
    d_I: int
    R_bar: float
    m_loc: float
    m_glob_upper: float
    error: str | None = None


def _threshold_row(params: ModelParams) -> ThresholdRow:
    try:
        coeffs = riesz_coefficients(params, d_max=64, self_energy=False)
        r_bar = critical_radius(params, coeffs)
        return ThresholdRow(params.alpha, first_unstable_degree(params, coeffs),
                            monotonicity_switch_degree(params, coeffs), r_bar,
                            params.omega_N * r_bar ** params.N, mglob_upper_bound(params))
    except (RdropError, AssertionError) as exc:
        nan = math.nan
        return ThresholdRow(params.alpha, -1, -1, nan, nan, nan, f"{type(exc).__name__}: {exc}")


def sweep_thresholds(template: ModelParams, alpha_grid: Sequence[float],
                     gamma: float | None = None,
                     threads: int | None = None) -> tuple:
    """``d_A, d_I, R_bar, m_loc`` and the ``m_glob`` bound for each ``alpha``.

    Rows that fail carry the error message instead of aborting the sweep;
    a value of ``alpha`` outside ``(0, N-1)`` is rejected up front.
    """
    gamma = template.gamma if gamma is None else gamma
    plist = [replace(template, alpha=float(a), gamma=gamma) for a in alpha_grid]
    return tuple(ordered_map(_threshold_row, plist, threads))


class LandscapeRow(NamedTuple):
    m: float
    best_k: int
    value: float
    masses: tuple


@dataclass(frozen=True)
class LandscapeTable:
    params: ModelParams
    grid: tuple
    breakpoints: tuple
    mglob_upper: float
    label: str = field(default="ball-cluster landscape")

    def best_k(self) -> np.ndarray:
        return np.array([r.best_k for r in self.grid])


def _landscape_row(e: BallEnergy, m: float, k_max: int) -> LandscapeRow:
    results = [_partition(e, m, k) for k in range(1, k_max + 1)]
    floor = min(r.value for r in results)
    best = next(r for r in results if r.value <= floor + CROSS_TOL)
    return LandscapeRow(float(m), best.k, best.value, best.nonzero)


def landscape_table(params: ModelParams, coeffs: RieszCoefficients,
                    m_grid: Sequence[float], k_max: int,
                    threads: int | None = None) -> LandscapeTable:
    """Best ``k <= k_max`` and its split for each mass on an increasing grid.

    ``best_k`` is the smallest ``k`` whose ``f_k`` is within ``1e-12`` of
    the lowest value.  Breakpoints are searched up to the last grid mass and
    left empty if none lies there.
    """
    m_grid = [float(m) for m in m_grid]
    if not m_grid or any(m <= 0 for m in m_grid):
        raise DomainError("masses must be positive")
    if any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise DomainError("mass grid must be strictly increasing")
    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    e = BallEnergy.from_coeffs(params, coeffs)
    rows = ordered_map(lambda m: _landscape_row(e, m, k_max), m_grid, threads)
    bps: tuple = ()
    if k_max >= 2:
        try:
            bps = breakpoints(params, coeffs, k_max, m_grid[-1])
        except BracketError:
            bps = ()
    return LandscapeTable(params, tuple(rows), bps, mglob_upper_bound(params))
