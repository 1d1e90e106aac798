"""Riesz potentials and energies of balls and disjoint ball configurations.

Geometry is reduced to one-dimensional integrals over the distance ``r``
from a reference point, weighted by the area of the part of the sphere
``{|y - x| = r}`` that lies inside a ball (a spherical cap).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple, Sequence

import numpy as np

from ._parallel import ordered_map
from .errors import DomainError, OverlapError
from .numerics import QuadratureSpec, SampleStream, _uniform_ball, integrate_1d
from .params import ModelParams

if TYPE_CHECKING:
    from .coefficients import RieszCoefficients

__all__ = [
    "Ball",
    "BallConfiguration",
    "EnergyBreakdown",
    "MCEstimate",
    "cap_area",
    "ball_potential",
    "potential_sup_bound",
    "ball_perimeter",
    "single_ball_energy",
    "cross_interaction",
    "configuration_energy",
    "mc_nonlocal_oracle",
    "lipschitz_gap",
    "ball_asymmetry",
]

# relative interpenetration tolerated before two balls count as overlapping
OVERLAP_RTOL = 1e-12


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise DomainError(f"ball radius must be positive, got {self.radius!r}")

    @property
    def dim(self) -> int:
        return len(self.center)

    def volume(self, omega_N: float) -> float:
        return omega_N * self.radius ** self.dim


@dataclass(frozen=True)
class BallConfiguration:
    """Finitely many pairwise disjoint balls in ``R^N``."""

    params: ModelParams
    balls: tuple = field(default_factory=tuple)

    def __post_init__(self):
        balls = tuple(self.balls)
        object.__setattr__(self, "balls", balls)
        if not balls:
            raise DomainError("a configuration needs at least one ball")
        for i, b in enumerate(balls):
            if b.dim != self.params.N:
                raise DomainError(
                    f"ball {i} has a {b.dim}-dimensional center but dim is {self.params.N}")
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                _check_disjoint(balls[i], balls[j], (i, j))

    @property
    def volume(self) -> float:
        return sum(b.volume(self.params.omega_N) for b in self.balls)


def _center_distance(b1: Ball, b2: Ball) -> float:
    return math.dist(b1.center, b2.center)


def _check_disjoint(b1: Ball, b2: Ball, pair=None) -> float:
    dist = _center_distance(b1, b2)
    reach = b1.radius + b2.radius
    if dist < reach * (1.0 - OVERLAP_RTOL):
        label = f"balls {pair[0]} and {pair[1]}" if pair else "balls"
        raise OverlapError(
            f"{label} overlap: center distance {dist:.6g} < sum of radii {reach:.6g}",
            pair=pair)
    return dist


class EnergyBreakdown(NamedTuple):
    perimeter: float
    nonlocal_: float
    total: float

    def as_dict(self) -> dict:
        return {"perimeter": self.perimeter, "nonlocal": self.nonlocal_,
                "total": self.total}


class MCEstimate(NamedTuple):
    estimate: float
    std_error: float
    variance_warning: bool = False


def _incomplete_sine_integral(n: int, theta: np.ndarray) -> np.ndarray:
    # int_0^theta sin^n
    s0 = theta
    s1 = 2.0 * np.sin(0.5 * theta) ** 2
    if n == 0:
        return s0
    if n == 1:
        return s1
    sin_t = np.sin(theta)
    cos_t = np.cos(theta)
    prev2, prev1 = s0, s1
    for k in range(2, n + 1):
        cur = -sin_t ** (k - 1) * cos_t / k + (k - 1) / k * prev2
        prev2, prev1 = prev1, cur
    return prev1


def cap_area(N: int, r, s: float, R: float, equator_area: float | None = None):
    """Area of ``{|y - x| = r} ∩ B_R(c)`` for ``|x - c| = s``.

    Computed from the polar angle ``theta*`` of the cap (law of cosines)
    as ``(N-1) omega_{N-1} r^{N-1} int_0^{theta*} sin^{N-2}``.
    """
    from .numerics import unit_ball_volume

    r = np.asarray(r, dtype=float)
    if equator_area is None:
        equator_area = (N - 1) * unit_ball_volume(N - 1)
    full = N * unit_ball_volume(N) * r ** (N - 1)
    if s == 0.0:
        return np.where(r < R, full, 0.0)
    # sin^2(theta*/2) = (R - s + r)(R + s - r) / (4 s r)
    with np.errstate(divide="ignore", invalid="ignore"):
        half_sin2 = (R - s + r) * (R + s - r) / (4.0 * s * r)
    half_sin2 = np.clip(np.nan_to_num(half_sin2, nan=0.0), 0.0, 1.0)
    theta = 2.0 * np.arcsin(np.sqrt(half_sin2))
    area = equator_area * r ** (N - 1) * _incomplete_sine_integral(N - 2, theta)
    area = np.where(r <= abs(s - R), np.where(s < R, full, 0.0), area)
    return np.where(r >= s + R, 0.0, area)


def ball_potential(params: ModelParams, R: float, s: float,
                   spec: QuadratureSpec | None = None) -> float:
    """Riesz potential ``v_{B_R}`` at distance ``s`` from the center.

    ``v(s) = int_{B_R} |x - y|^-alpha dy`` with ``|x| = s``.  The interval
    of distances is split at ``|s - R|``: below it (``s < R``) whole spheres
    are inside the ball and the contribution is explicit, above it the
    cap area is integrated by tanh-sinh quadrature.
    """
    if R <= 0:
        raise DomainError("radius must be positive")
    if s < 0:
        raise DomainError("distance s must be non-negative")
    spec = (spec or QuadratureSpec()).with_scheme("tanh_sinh")
    N, alpha = params.N, params.alpha
    inner = 0.0
    if s < R:
        inner = params.sphere_area * (R - s) ** (N - alpha) / (N - alpha)
    if s == 0.0:
        return inner
    lo = abs(s - R)
    width = s + R - lo
    if width <= 0.0:
        return inner
    eq_area = params.equator_area

    def integrand(w):
        r = lo + w
        return r ** (-alpha) * cap_area(N, r, s, R, eq_area)

    return inner + integrate_1d(integrand, 0.0, width, spec)


def potential_sup_bound(params: ModelParams, m: float) -> float:
    """Upper bound ``N omega_N / (N - alpha) + m`` for ``sup v_E`` when ``|E| <= m``."""
    if m <= 0:
        raise DomainError("mass m must be positive")
    return params.sphere_area / (params.N - params.alpha) + m


def ball_perimeter(params: ModelParams, m):
    """Perimeter ``N omega_N^{1/N} m^{(N-1)/N}`` of a ball of volume ``m``."""
    N = params.N
    return N * params.omega_N ** (1.0 / N) * np.asarray(m, dtype=float) ** ((N - 1) / N)


def single_ball_energy(params: ModelParams, m: float,
                       coeffs: "RieszCoefficients") -> EnergyBreakdown:
    """Perimeter, nonlocal and total energy of a ball of volume ``m``."""
    if m <= 0:
        raise DomainError("mass m must be positive")
    N, alpha = params.N, params.alpha
    perimeter = float(ball_perimeter(params, m))
    nonlocal_ = coeffs.c_alpha * (m / params.omega_N) ** ((2 * N - alpha) / N)
    return EnergyBreakdown(perimeter, nonlocal_, perimeter + params.gamma * nonlocal_)


def cross_interaction(params: ModelParams, b1: Ball, b2: Ball,
                      spec: QuadratureSpec | None = None) -> float:
    """``int_{b1} int_{b2} |x - y|^-alpha dx dy`` for two disjoint balls.

    The potential of ``b1`` is radial around its center, so the double
    integral becomes ``int v_{b1}(rho) A(rho) d rho`` where ``A`` is the
    area of the sphere of radius ``rho`` around ``b1``'s center inside
    ``b2``.
    """
    dist = _check_disjoint(b1, b2)
    spec = (spec or QuadratureSpec()).with_scheme("tanh_sinh")
    inner_spec = spec.with_tol(spec.abs_tol / 100.0)
    N = params.N
    r1, r2 = b1.radius, b2.radius
    lo = dist - r2
    eq_area = params.equator_area

    def integrand(w):
        rho = lo + w
        pot = np.array([ball_potential(params, r1, float(x), inner_spec) for x in rho])
        return pot * cap_area(N, rho, dist, r2, eq_area)

    return integrate_1d(integrand, 0.0, 2.0 * r2, spec)


def configuration_energy(config: BallConfiguration, coeffs: "RieszCoefficients",
                         spec: QuadratureSpec | None = None,
                         threads: int | None = None) -> EnergyBreakdown:
    """Energy of a union of disjoint balls.

    Cross terms are evaluated (possibly in parallel) and summed in fixed
    pair order.
    """
    params = config.params
    N, alpha = params.N, params.alpha
    balls = config.balls
    perimeter = 0.0
    self_energy = 0.0
    for b in balls:
        perimeter += float(ball_perimeter(params, b.volume(params.omega_N)))
        self_energy += coeffs.c_alpha * b.radius ** (2 * N - alpha)
    pairs = [(i, j) for i in range(len(balls)) for j in range(i + 1, len(balls))]
    cross = ordered_map(
        lambda ij: cross_interaction(params, balls[ij[0]], balls[ij[1]], spec),
        pairs, threads)
    nonlocal_ = self_energy + 2.0 * math.fsum(cross)
    return EnergyBreakdown(perimeter, nonlocal_, perimeter + params.gamma * nonlocal_)


_MC_CHUNK = 1 << 18


def _sample_union(rng, config: BallConfiguration, count: int) -> np.ndarray:
    params = config.params
    vols = np.array([b.volume(params.omega_N) for b in config.balls])
    if len(vols) == 1:
        b = config.balls[0]
        return _uniform_ball(rng, params.N, np.array(b.center), b.radius, count)
    which = rng.choice(len(vols), size=count, p=vols / vols.sum())
    centers = np.array([b.center for b in config.balls])
    radii = np.array([b.radius for b in config.balls])
    unit = _uniform_ball(rng, params.N, np.zeros(params.N), 1.0, count)
    return centers[which] + unit * radii[which][:, None]


def mc_nonlocal_oracle(config: BallConfiguration, stream: SampleStream,
                       pairs: int, threads: int | None = None) -> MCEstimate:
    """Pair-sampling Monte Carlo estimate of ``N_alpha`` of the union.

    ``N_alpha(U) = |U|^2 E|X - Y|^-alpha`` for independent uniform points
    of ``U``.  Pairs are drawn in fixed-size blocks, each from its own
    counter range of ``stream``, so the result does not depend on the
    number of threads.  The variance is infinite when ``2 alpha >= N``;
    the estimate is still returned with ``variance_warning`` set.
    """
    if pairs < 2:
        raise DomainError("pairs must be >= 2")
    params = config.params
    heavy_tail = 2.0 * params.alpha >= params.N
    if heavy_tail:
        warnings.warn(
            f"pair-sampling variance is infinite for 2*alpha >= N "
            f"(alpha={params.alpha}, N={params.N}); std_error is unreliable",
            RuntimeWarning, stacklevel=2)
    sizes = [_MC_CHUNK] * (pairs // _MC_CHUNK)
    if pairs % _MC_CHUNK:
        sizes.append(pairs % _MC_CHUNK)

    def block(j):
        rng = stream.generator(j)
        n = sizes[j]
        x = _sample_union(rng, config, n)
        y = _sample_union(rng, config, n)
        vals = np.linalg.norm(x - y, axis=1) ** (-params.alpha)
        return float(vals.sum()), float(np.dot(vals, vals))

    sums = ordered_map(block, range(len(sizes)), threads)
    total = math.fsum(s for s, _ in sums)
    total_sq = math.fsum(q for _, q in sums)
    mean = total / pairs
    var = max(total_sq / pairs - mean * mean, 0.0) * pairs / (pairs - 1)
    vol2 = config.volume ** 2
    return MCEstimate(vol2 * mean, vol2 * math.sqrt(var / pairs), heavy_tail)


def ball_asymmetry(params: ModelParams, R1: float, R2: float) -> float:
    """``min_x |B_{R1} Δ (x + B_{R2})|``, attained by concentric balls."""
    return abs(params.omega_N * (R1 ** params.N - R2 ** params.N))


def lipschitz_gap(params: ModelParams, R1: float, R2: float,
                  coeffs: "RieszCoefficients") -> tuple[float, float]:
    """Both sides of ``|N(B_R1) - N(B_R2)| <= 2 C |B_R1 Δ B_R2|``.

    ``C`` is :func:`potential_sup_bound` at ``m = omega_N max(R1, R2)^N``.
    """
    if R1 <= 0 or R2 <= 0:
        raise DomainError("radii must be positive")
    N, alpha = params.N, params.alpha
    m = params.omega_N * max(R1, R2) ** N
    lhs = abs(coeffs.c_alpha * (R1 ** (2 * N - alpha) - R2 ** (2 * N - alpha)))
    rhs = 2.0 * potential_sup_bound(params, m) * ball_asymmetry(params, R1, R2)
    return lhs, rhs
