"""Second-variation spectrum of the ball and its stability thresholds.

On degree-``d`` spherical harmonics the quadratic form of the ball
``B_R`` is diagonal with eigenvalue (up to the factor ``R^{N-3}``)

    lambda_d(R) = d(d+N-2) - (N-1) + 2 gamma R^{N+1-alpha} (mu_d - alpha I).

Degrees ``d >= 2`` span the admissible perturbations; ``d = 1`` is the
translation mode and its eigenvalue vanishes.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple

import numpy as np

from ._parallel import ordered_map
from .coefficients import RieszCoefficients, mu_ratio
from .errors import ConvergenceError, DomainError
from .numerics import SampleStream, draw_uniform_sphere, legendre_poly
from .params import ModelParams

__all__ = [
    "Verdict",
    "HarmonicPerturbation",
    "StabilityReport",
    "QuadraticFormEstimate",
    "CoercivityProxy",
    "harmonic_dimension",
    "mode_eigenvalue",
    "mode_eigenvalues",
    "first_unstable_degree",
    "monotonicity_switch_degree",
    "g_function",
    "critical_radius",
    "critical_mass",
    "truncation_degree",
    "stability_verdict",
    "quadratic_form_spectral",
    "quadratic_form_oracle",
    "zonal_harmonic",
    "coercivity_proxy",
]

DEGREE_CAP = 10**6
MARGINAL_RTOL = 1e-9
REPORT_DEGREES = 64


class Verdict(str, enum.Enum):
    STRICTLY_STABLE = "strictly_stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


def harmonic_dimension(N: int, d: int) -> int:
    """Dimension of the space of degree-``d`` spherical harmonics on ``S^{N-1}``."""
    if d < 0:
        return 0
    if d == 0:
        return 1
    return math.comb(d + N - 1, N - 1) - math.comb(d + N - 3, N - 1)


@dataclass(frozen=True)
class HarmonicPerturbation:
    """Coefficients ``c[(d, i)]`` of a normal perturbation in an orthonormal
    spherical-harmonic basis of the unit sphere.

    Degrees 0 and 1 are excluded: the perturbation has zero average and is
    orthogonal to translations.
    """

    N: int
    entries: Mapping = field(default_factory=dict)

    def __post_init__(self):
        entries = {}
        for key, c in dict(self.entries).items():
            d, i = (int(key[0]), int(key[1]))
            if d < 2:
                raise DomainError(f"degree {d} not allowed; perturbations start at degree 2")
            if not 1 <= i <= harmonic_dimension(self.N, d):
                raise DomainError(
                    f"index {i} out of range 1..{harmonic_dimension(self.N, d)} for degree {d}")
            entries[(d, i)] = float(c)
        object.__setattr__(self, "entries", entries)

    def degrees(self) -> np.ndarray:
        return np.array([d for d, _ in self.entries], dtype=int)

    def coefficients(self) -> np.ndarray:
        return np.array(list(self.entries.values()), dtype=float)

    def l2_norm_sq(self) -> float:
        c = self.coefficients()
        return float(np.dot(c, c))

    def h1_norm_sq(self) -> float:
        """``||grad_tau phi||^2`` on the unit sphere."""
        d = self.degrees()
        c = self.coefficients()
        return float(np.dot(d * (d + self.N - 2), c * c))


def _lambda(params: ModelParams, coeffs: RieszCoefficients, R: float, d, mu):
    N, a = params.N, params.alpha
    d = np.asarray(d, dtype=float)
    scale = 2.0 * params.gamma * R ** (N + 1 - a)
    return d * (d + N - 2) - (N - 1) + scale * (mu - coeffs.alpha_i)


def mode_eigenvalue(params: ModelParams, coeffs: RieszCoefficients,
                    R: float, d: int) -> float:
    """``lambda_d(R)``, the eigenvalue of the ball's second variation on
    degree-``d`` harmonics, without the ``R^{N-3} c^2`` prefactor."""
    if R <= 0:
        raise DomainError("radius must be positive")
    if d < 1:
        raise DomainError("degree must be >= 1")
    return float(_lambda(params, coeffs, R, d, coeffs.mu_at(d)))


def mode_eigenvalues(params: ModelParams, coeffs: RieszCoefficients,
                     R: float, d_lo: int, d_hi: int) -> np.ndarray:
    """``lambda_d(R)`` for ``d_lo <= d <= d_hi``."""
    d = np.arange(d_lo, d_hi + 1)
    return _lambda(params, coeffs, R, d, coeffs.mu_range(d_lo, d_hi))


def first_unstable_degree(params: ModelParams, coeffs: RieszCoefficients) -> int:
    """``d_A``: the smallest ``d >= 2`` with ``mu_d < alpha I``.

    Beyond ``d_A`` the nonlocal term destabilises the mode for large
    radii.
    """
    target = coeffs.alpha_i
    lo = 2
    block = 256
    while lo <= DEGREE_CAP:
        hi = min(lo + block - 1, DEGREE_CAP)
        mu = coeffs.mu_range(lo, hi)
        hits = np.nonzero(mu < target)[0]
        if hits.size:
            return int(lo + hits[0])
        lo, block = hi + 1, block * 4
    raise ConvergenceError(f"no degree below {DEGREE_CAP} has mu_d < alpha I")


def _switch_factor(params: ModelParams, d):
    N, a = params.N, params.alpha
    d = np.asarray(d, dtype=float)
    num = d * d * (N - a + 1) + d * (N * N - a * N + a - 1) + 0.5 * a * (N - 1)
    return num / ((N - 1 - 0.5 * a + d) * (2 * d + N - 1))


def monotonicity_switch_degree(params: ModelParams, coeffs: RieszCoefficients) -> int:
    """``d_I``: the first degree at which ``g(d+1) > g(d)``.

    It is the smallest ``d`` with ``alpha I > h(d) mu_d``, where ``h`` is
    the rational factor of :func:`_switch_factor`.  At ``d = 1`` the two
    sides coincide identically (``h(1) = 1`` and ``mu_1 = alpha I``), so
    the strict inequality can first hold at ``d = 2``.
    """
    target = coeffs.alpha_i
    lo = 2
    block = 256
    while lo <= DEGREE_CAP:
        hi = min(lo + block - 1, DEGREE_CAP)
        d = np.arange(lo, hi + 1)
        rhs = _switch_factor(params, d) * coeffs.mu_range(lo, hi)
        hits = np.nonzero(target > rhs)[0]
        if hits.size:
            return int(lo + hits[0])
        lo, block = hi + 1, block * 4
    raise ConvergenceError(f"monotonicity switch not found below degree {DEGREE_CAP}")


def g_function(params: ModelParams, coeffs: RieszCoefficients, d: int) -> float:
    """Radius at which mode ``d`` becomes neutral, ``lambda_d(g(d)) = 0``."""
    mu = coeffs.mu_at(d)
    gap = coeffs.alpha_i - mu
    if not gap > 0.0:
        raise DomainError(f"g(d) is undefined for d={d}: mu_d >= alpha I")
    N, a = params.N, params.alpha
    num = d * (d + N - 2) - (N - 1)
    return (num / (2.0 * params.gamma * gap)) ** (1.0 / (N + 1 - a))


def critical_radius(params: ModelParams, coeffs: RieszCoefficients) -> float:
    """Largest radius ``R_bar`` below which the ball is strictly stable.

    ``R_bar = g(d_A)`` if ``d_A > d_I`` and ``g(d_I)`` otherwise; the value
    is cross-checked against a direct minimum of ``g`` over
    ``[d_A, max(d_A, d_I) + 5]``.
    """
    d_a = first_unstable_degree(params, coeffs)
    d_i = monotonicity_switch_degree(params, coeffs)
    r_bar = g_function(params, coeffs, d_a if d_a > d_i else d_i)
    scanned = min(g_function(params, coeffs, d) for d in range(d_a, max(d_a, d_i) + 6))
    if abs(scanned - r_bar) > 1e-12 * r_bar:
        raise ConvergenceError(
            f"critical radius {r_bar!r} disagrees with the scanned minimum {scanned!r}")
    return r_bar


def critical_mass(params: ModelParams, coeffs: RieszCoefficients) -> float:
    """Volume ``omega_N R_bar^N`` of the critical ball."""
    return params.omega_N * critical_radius(params, coeffs) ** params.N


def truncation_degree(params: ModelParams, coeffs: RieszCoefficients, R: float) -> int:
    """Smallest ``D >= 2`` with ``d(d+N-2) - (N-1) >= 2 gamma R^{N+1-alpha} alpha I``.

    Since ``mu_d > 0``, every mode ``d >= D`` has a positive eigenvalue.
    """
    N, a = params.N, params.alpha
    k = 2.0 * params.gamma * R ** (N + 1 - a) * coeffs.alpha_i
    root = 0.5 * (-(N - 2) + math.sqrt((N - 2) ** 2 + 4.0 * (N - 1 + k)))
    D = max(2, math.ceil(root) - 1)
    while D * (D + N - 2) - (N - 1) < k:
        D += 1
    if D > DEGREE_CAP:
        raise ConvergenceError(f"truncation degree {D} exceeds the cap {DEGREE_CAP}")
    return D


@dataclass(frozen=True)
class StabilityReport:
    params: ModelParams
    R: float
    d_A: int
    d_I: int
    R_bar: float
    m_loc: float
    eigenvalues: tuple
    verdict: Verdict
    truncation_degree: int
    min_eigenvalue: float = field(default=math.nan, compare=False)
    min_degree: int = field(default=0, compare=False)

    def to_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "R": self.R,
            "d_A": self.d_A,
            "d_I": self.d_I,
            "R_bar": self.R_bar,
            "m_loc": self.m_loc,
            "eigenvalues": [[int(d), float(v)] for d, v in self.eigenvalues],
            "verdict": self.verdict.value,
            "truncation_degree": self.truncation_degree,
        }


def stability_verdict(params: ModelParams, coeffs: RieszCoefficients,
                      R: float) -> StabilityReport:
    """Decide whether the second variation of ``B_R`` is positive.

    Every degree ``2 <= d <= D`` is checked, with ``D`` from
    :func:`truncation_degree`; higher modes are positive by construction.
    Radii within ``1e-9`` (relative) of ``R_bar`` are reported as marginal.
    """
    if R <= 0:
        raise DomainError("radius must be positive")
    d_a = first_unstable_degree(params, coeffs)
    d_i = monotonicity_switch_degree(params, coeffs)
    r_bar = critical_radius(params, coeffs)
    D = truncation_degree(params, coeffs, R)
    lam = mode_eigenvalues(params, coeffs, R, 2, D)
    j = int(np.argmin(lam))
    if abs(R - r_bar) <= MARGINAL_RTOL * r_bar:
        verdict = Verdict.MARGINAL
    elif lam[j] > 0.0:
        verdict = Verdict.STRICTLY_STABLE
    else:
        verdict = Verdict.UNSTABLE
    shown = min(D, REPORT_DEGREES)
    eig = tuple((d, float(lam[d - 2])) for d in range(2, shown + 1))
    return StabilityReport(
        params=params, R=float(R), d_A=d_a, d_I=d_i, R_bar=r_bar,
        m_loc=params.omega_N * r_bar ** params.N, eigenvalues=eig,
        verdict=verdict, truncation_degree=D,
        min_eigenvalue=float(lam[j]), min_degree=j + 2)


def quadratic_form_spectral(params: ModelParams, coeffs: RieszCoefficients,
                            R: float, phi: HarmonicPerturbation) -> float:
    """Second variation of ``B_R`` at the perturbation ``phi``.

    ``sum_{d,i} R^{N-3} c_{d,i}^2 lambda_d(R)``, where ``c`` are the
    coefficients of ``phi(R x)`` on the unit sphere.
    """
    if not phi.entries:
        raise DomainError("perturbation has no coefficients")
    if phi.N != params.N:
        raise DomainError("perturbation dimension does not match params")
    d = phi.degrees()
    c = phi.coefficients()
    mu = np.array([coeffs.mu_at(int(k)) for k in d])
    lam = _lambda(params, coeffs, R, d, mu)
    return float(R ** (params.N - 3) * np.dot(c * c, lam))


def zonal_harmonic(N: int, d: int, axis: int = -1) -> Callable[[np.ndarray], np.ndarray]:
    """L2-normalised zonal harmonic of degree ``d`` about a coordinate axis.

    ``Y(x) = sqrt(dim H_d / |S^{N-1}|) P_{N,d}(x_axis)`` for unit vectors
    ``x`` given as rows of an ``(n, N)`` array.
    """
    from .numerics import sphere_area

    norm = math.sqrt(harmonic_dimension(N, d) / sphere_area(N))

    def phi(x):
        x = np.asarray(x, dtype=float)
        return norm * legendre_poly(N, d, np.clip(x[..., axis], -1.0, 1.0))

    return phi


class QuadraticFormEstimate(NamedTuple):
    value: float
    std_error: float
    t1: float
    t2: float
    t3: float
    variance_warning: bool
    tolerance: float


def _sphere_grid(n_theta: int):
    z, wz = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(z)
    n_phi = 2 * n_theta
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    w = np.outer(wz, np.full(n_phi, 2.0 * math.pi / n_phi))
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    return th, ph, w


def _to_xyz(theta, phi):
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def _central_diff(f, h):
    # fourth-order central difference
    return (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h)


def _grid_terms(phi_fn, n_theta: int, h: float = 1e-3):
    th, ph, w = _sphere_grid(n_theta)
    f = lambda t, p: phi_fn(_to_xyz(t, p).reshape(-1, 3)).reshape(t.shape)
    d_theta = _central_diff(lambda e: f(th + e, ph), h)
    d_phi = _central_diff(lambda e: f(th, ph + e), h) / np.sin(th)
    grad_sq = float(np.sum(w * (d_theta ** 2 + d_phi ** 2)))
    val = f(th, ph)
    return grad_sq, float(np.sum(w * val * val))


_PAIR_BLOCK = 1 << 18


def quadratic_form_oracle(params: ModelParams, coeffs: RieszCoefficients, R: float,
                          phi_fn: Callable[[np.ndarray], np.ndarray], grid: int,
                          stream: SampleStream, pairs: int,
                          threads: int | None = None) -> QuadraticFormEstimate:
    """Direct evaluation of the ball's second variation for ``N = 3``.

    The three terms are computed without spherical-harmonic expansions:

    * ``T1 = R^{N-3} int (|grad_tau phi|^2 - (N-1) phi^2)`` with
      fourth-order central-difference tangential gradients on a Gauss-Legendre x uniform
      latitude-longitude grid with ``grid`` latitudes;
    * ``T2 = 2 gamma R^{2N-2-alpha} int int phi(x) phi(y) |x-y|^-alpha`` by
      pair Monte Carlo on the sphere;
    * ``T3 = -2 gamma R^{2N-2-alpha} alpha I int phi^2``.

    ``phi_fn`` maps unit vectors (rows of an ``(n, 3)`` array) to values.
    ``T1`` is recomputed on a grid twice as fine and must agree to ``1e-6``
    (relative), otherwise :class:`ConvergenceError` is raised.
    """
    if params.N != 3:
        raise DomainError("the direct quadratic-form oracle is implemented for N = 3 only")
    if grid < 4:
        raise DomainError("grid must be >= 4")
    N, a, gam = params.N, params.alpha, params.gamma
    heavy_tail = a > 1.0
    if heavy_tail:
        warnings.warn("pair Monte Carlo variance is infinite for alpha > 1 on S^2; "
                      "tolerance widened to 5%", RuntimeWarning, stacklevel=2)

    grad_sq, phi_sq = _grid_terms(phi_fn, grid)
    grad_sq_fine, phi_sq_fine = _grid_terms(phi_fn, 2 * grid)
    coarse = grad_sq - (N - 1) * phi_sq
    fine = grad_sq_fine - (N - 1) * phi_sq_fine
    scale = max(abs(fine), grad_sq_fine, phi_sq_fine, 1e-300)
    if abs(fine - coarse) > 1e-6 * scale:
        raise ConvergenceError(
            f"T1 grid not resolved: {coarse!r} (grid {grid}) vs {fine!r} (grid {2 * grid})")
    t1 = R ** (N - 3) * fine

    sizes = [_PAIR_BLOCK] * (pairs // _PAIR_BLOCK)
    if pairs % _PAIR_BLOCK:
        sizes.append(pairs % _PAIR_BLOCK)

    def block(j):
        rng = stream.generator(j)
        x = draw_uniform_sphere(rng, 3, sizes[j])
        y = draw_uniform_sphere(rng, 3, sizes[j])
        v = phi_fn(x) * phi_fn(y) * np.linalg.norm(x - y, axis=1) ** (-a)
        return float(v.sum()), float(np.dot(v, v))

    sums = ordered_map(block, range(len(sizes)), threads)
    total = math.fsum(s for s, _ in sums)
    total_sq = math.fsum(q for _, q in sums)
    mean = total / pairs
    var = max(total_sq / pairs - mean * mean, 0.0) * pairs / (pairs - 1)
    area_sq = (4.0 * math.pi) ** 2
    pref = 2.0 * gam * R ** (2 * N - 2 - a)
    t2 = pref * area_sq * mean
    t2_err = pref * area_sq * math.sqrt(var / pairs)
    t3 = -pref * coeffs.alpha_i * phi_sq_fine
    return QuadraticFormEstimate(t1 + t2 + t3, t2_err, t1, t2, t3, heavy_tail,
                                 0.05 if heavy_tail else 0.02)


class CoercivityProxy(NamedTuple):
    min_l2: float
    min_h1: float
    spectral_floor: float


def coercivity_proxy(params: ModelParams, coeffs: RieszCoefficients, R: float,
                     stream: SampleStream, samples: int = 1000,
                     max_degree: int = 20) -> CoercivityProxy:
    """Minimum of the quadratic form over random unit perturbations.

    Perturbations are Gaussian coefficient vectors over all harmonics of
    degree ``2..max_degree``.  Returns the minimum with the coefficient
    (``l2``) normalisation, the minimum of the ratio to
    ``||grad_tau phi||^2`` (``h1``), and the spectral floor
    ``R^{N-3} min_d lambda_d(R)`` over the same degrees.
    """
    N = params.N
    degrees = np.concatenate([
        np.full(harmonic_dimension(N, d), d) for d in range(2, max_degree + 1)])
    lam = mode_eigenvalues(params, coeffs, R, 2, max_degree)[degrees - 2]
    weight = R ** (N - 3) * lam
    c = stream.generator().standard_normal((samples, degrees.size))
    c2 = c * c
    q = c2 @ weight
    l2 = c2.sum(axis=1)
    h1 = c2 @ (degrees * (degrees + N - 2)).astype(float)
    floor = float(R ** (N - 3) * lam.min())
    return CoercivityProxy(float(np.min(q / l2)), float(np.min(q / h1)), floor)
