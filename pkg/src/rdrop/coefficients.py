"""Funk-Hecke eigenvalues ``mu_d``, the confinement coefficient ``I`` and
the unit-ball self-energy ``c_alpha``.

Each quantity has two independent evaluation routes:

* ``mu_d``: closed form assembled in log space, the degree recurrence,
  and a Funk-Hecke quadrature oracle;
* ``I``: nested coarea quadrature, the ``N = 3`` closed form, and the
  translation identity ``mu_1 = alpha I``;
* ``c_alpha``: radial reduction of the ball potential, and pair Monte Carlo
  (see :func:`rdrop.ballmodel.mc_nonlocal_oracle`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ballmodel import ball_potential
from .errors import DomainError
from .numerics import QuadratureSpec, integrate_1d, legendre_poly, log_gamma
from .params import ModelParams

__all__ = [
    "RieszCoefficients",
    "mu_closed_form",
    "log_mu_closed_form",
    "mu_sequence",
    "mu_ratio",
    "mu_quadrature_oracle",
    "i_coefficient",
    "i_coefficient_closed_n3",
    "ball_self_energy",
    "riesz_coefficients",
]

# ``DEFAULT_SPEC`` gives about 1e-12 relative accuracy for ``I`` and ``c_alpha``.
DEFAULT_SPEC = QuadratureSpec(node_count=16, scheme="tanh_sinh", abs_tol=1e-13,
                              max_refinements=8)


def log_mu_closed_form(params: ModelParams, d: int) -> float:
    """Natural logarithm of :func:`mu_closed_form`."""
    if d < 0:
        raise DomainError(f"degree must be >= 0, got {d}")
    N, a = params.N, params.alpha
    return ((N - 1 - a) * math.log(2.0)
            + math.log(0.5 * params.equator_area)
            + log_gamma(0.5 * a + d) - log_gamma(0.5 * a)
            + log_gamma(0.5 * (N - 1 - a)) + log_gamma(0.5 * (N - 1))
            - log_gamma(N - 1 - 0.5 * a + d))


def mu_closed_form(params: ModelParams, d: int) -> float:
    """Funk-Hecke eigenvalue of ``|x - y|^-alpha`` on ``S^{N-1}`` at degree ``d``.

    The rising product ``prod_{i<d} (alpha/2 + i)`` is written as a ratio of
    Gamma functions so the whole expression is a single exponential of a
    sum of ``log_gamma`` terms; this stays finite for ``d`` up to ``1e6``.
    """
    log_mu = log_mu_closed_form(params, d)
    assert -745.0 < log_mu < 709.0, "mu_d outside the double range"
    return math.exp(log_mu)


def mu_ratio(params: ModelParams, d):
    """``mu_{d+1} / mu_d = (alpha/2 + d) / (N - 1 - alpha/2 + d)``."""
    a = params.alpha
    return (0.5 * a + d) / (params.N - 1 - 0.5 * a + d)


def mu_sequence(params: ModelParams, d_max: int) -> np.ndarray:
    """``mu_0, ..., mu_{d_max}`` from the closed form at ``d = 0`` and the
    degree recurrence."""
    if d_max < 1:
        raise DomainError("d_max must be >= 1")
    mu = np.empty(d_max + 1)
    mu[0] = mu_closed_form(params, 0)
    for d in range(d_max):
        mu[d + 1] = mu_ratio(params, d) * mu[d]
    return mu


def mu_quadrature_oracle(params: ModelParams, d: int,
                         spec: QuadratureSpec | None = None) -> float:
    """Funk-Hecke integral for ``mu_d`` evaluated by quadrature.

    ``mu_d = (N-1) omega_{N-1} int_{-1}^{1} P_{N,d}(t) (2(1-t))^{-alpha/2}
    (1-t^2)^{(N-3)/2} dt``.  With ``1 - t = u^2`` the integrand becomes
    ``2^{1-alpha/2} P(1-u^2) u^{N-2-alpha} (2-u^2)^{(N-3)/2}`` on
    ``[0, sqrt 2]``.  The range is split at ``u = 1`` and the upper part is
    written in ``v = sqrt 2 - u`` so both endpoint singularities sit at the
    origin of a tanh-sinh rule.
    """
    if d < 0:
        raise DomainError(f"degree must be >= 0, got {d}")
    if d > 30:
        raise DomainError("the quadrature oracle is limited to d <= 30")
    spec = (spec or DEFAULT_SPEC).with_scheme("tanh_sinh")
    N, a = params.N, params.alpha
    root2 = math.sqrt(2.0)
    k = (N - 3) / 2.0

    def lower(u):
        t = 1.0 - u * u
        return legendre_poly(N, d, t) * u ** (N - 2 - a) * (2.0 - u * u) ** k

    def upper(v):
        u = root2 - v
        t = np.maximum(1.0 - u * u, -1.0)
        # 2 - u^2 = v (2 sqrt 2 - v)
        return legendre_poly(N, d, t) * u ** (N - 2 - a) * (v * (2.0 * root2 - v)) ** k

    total = integrate_1d(lower, 0.0, 1.0, spec) + integrate_1d(upper, 0.0, root2 - 1.0, spec)
    return params.equator_area * 2.0 ** (1.0 - 0.5 * a) * total


def i_coefficient(params: ModelParams, spec: QuadratureSpec | None = None) -> float:
    """``I = int_{B_1} <x - y, x> |x - y|^{-alpha-2} dy`` for ``|x| = 1``.

    Nested coarea form with ``s = 1 - t``:

        I = (N-1) omega_{N-1} int_0^2 s J(s) ds,
        J(s) = int_s^{sqrt(2s)} (r^2 - s^2)^{(N-3)/2} r^{-alpha-1} dr.

    Writing the inner integral in ``sigma = s / r`` factors out the scale
    of ``s``:

        s J(s) = s^{q-1} L(s),   q = N - 1 - alpha,
        L(s) = int_{sqrt(s/2)}^1 (1 - sigma^2)^{(N-3)/2} sigma^{alpha+2-N} d sigma,

    and the outer substitution ``y = s^q`` absorbs the power, leaving
    ``I = (N-1) omega_{N-1} / q * int_0^{2^q} L(y^{1/q}) dy``.  ``L`` is
    split at ``sigma = 1/2``; near ``sigma = 1`` the variable
    ``tau = 1 - sigma`` puts the ``(1 - sigma^2)^{(N-3)/2}`` endpoint at the
    origin.  The inner rule is tanh-sinh whenever ``N <= 3`` or ``N`` is
    even, otherwise ``spec.scheme``; the outer rule is always tanh-sinh.
    """
    spec = spec or DEFAULT_SPEC
    N, a = params.N, params.alpha
    k = (N - 3) / 2.0
    p = a + 2.0 - N
    q = N - 1.0 - a
    inner_spec = spec.with_tol(spec.abs_tol / 100.0, rel_tol=1e-14)
    if N <= 3 or N % 2 == 0:
        inner_spec = inner_spec.with_scheme("tanh_sinh")
    outer_spec = spec.with_scheme("tanh_sinh")

    def near_one(tau):
        return (tau * (2.0 - tau)) ** k * (1.0 - tau) ** p

    def away(sigma):
        return (1.0 - sigma * sigma) ** k * sigma ** p

    upper_half = integrate_1d(near_one, 0.0, 0.5, inner_spec)

    def inner(s):
        lo = math.sqrt(0.5 * s)
        if lo >= 0.5:
            if lo >= 1.0:
                return 0.0
            return integrate_1d(near_one, 0.0, 1.0 - lo, inner_spec)
        if lo == 0.0:
            return upper_half + integrate_1d(away, 0.0, 0.5, inner_spec.with_scheme("tanh_sinh"))
        return upper_half + integrate_1d(away, lo, 0.5, inner_spec.with_scheme("tanh_sinh"))

    def outer(y):
        return np.array([inner(float(v) ** (1.0 / q)) for v in y])

    return params.equator_area / q * integrate_1d(outer, 0.0, 2.0 ** q, outer_spec)


def i_coefficient_closed_n3(alpha: float) -> float:
    """``I`` in three dimensions: ``2 pi 2^{2-alpha} / ((4-alpha)(2-alpha))``."""
    if not 0.0 <= alpha < 2.0:
        raise DomainError(f"alpha must lie in (0, 2) for N=3, got {alpha!r}")
    return 2.0 * math.pi * 2.0 ** (2.0 - alpha) / ((4.0 - alpha) * (2.0 - alpha))


def ball_self_energy(params: ModelParams, spec: QuadratureSpec | None = None) -> float:
    """``c_alpha = int_{B_1} int_{B_1} |x - y|^-alpha`` via the radial potential.

    ``c_alpha = int_0^1 v_{B_1}(s) N omega_N s^{N-1} ds``.
    """
    spec = (spec or DEFAULT_SPEC).with_scheme("tanh_sinh")
    inner_spec = spec.with_tol(spec.abs_tol / 100.0)
    N = params.N

    def f(s):
        pot = np.array([ball_potential(params, 1.0, float(x), inner_spec) for x in s])
        return pot * params.sphere_area * s ** (N - 1)

    return integrate_1d(f, 0.0, 1.0, spec)


@dataclass(frozen=True)
class RieszCoefficients:
    """Tabulated coefficients for one ``(N, alpha)``.

    ``mu`` holds ``mu_0 .. mu_{d_max}``; :meth:`mu_at` extends the table on
    demand with the closed form.
    """

    params: ModelParams
    mu: np.ndarray = field(repr=False)
    i_coeff: float
    c_alpha: float
    d_max: int

    def mu_at(self, d: int) -> float:
        if 0 <= d <= self.d_max:
            return float(self.mu[d])
        return mu_closed_form(self.params, d)

    def mu_range(self, d_lo: int, d_hi: int) -> np.ndarray:
        """``mu_d`` for ``d_lo <= d <= d_hi`` as an array."""
        if d_hi <= self.d_max:
            return np.array(self.mu[d_lo:d_hi + 1])
        start = max(d_lo, self.d_max)
        base = math.log(self.mu_at(start))
        d = np.arange(start, d_hi)
        log_mu = base + np.concatenate([[0.0], np.cumsum(np.log(mu_ratio(self.params, d)))])
        tail = np.exp(log_mu[d_lo - start:] if d_lo > start else log_mu)
        if d_lo >= self.d_max:
            return tail
        return np.concatenate([self.mu[d_lo:self.d_max], tail])

    @property
    def alpha_i(self) -> float:
        return self.params.alpha * self.i_coeff

    def zero_mode_defect(self) -> float:
        """``|mu_1 - alpha I| / mu_1``; vanishes by translation invariance."""
        return abs(self.mu[1] - self.alpha_i) / self.mu[1]

    def check(self) -> None:
        """Assert the table invariants."""
        mu = self.mu
        assert np.all(mu > 0.0), "mu_d must be positive"
        assert np.all(np.diff(mu) < 0.0), "mu_d must be strictly decreasing"
        assert self.zero_mode_defect() <= 1e-8, (
            f"mu_1 != alpha I (relative defect {self.zero_mode_defect():.2e})")
        if not math.isnan(self.c_alpha):
            lower = self.params.omega_N ** 2 * 2.0 ** (-self.params.alpha)
            assert self.c_alpha >= lower, "c_alpha below omega_N^2 2^-alpha"


def riesz_coefficients(params: ModelParams, d_max: int = 256,
                       spec: QuadratureSpec | None = None,
                       check: bool = True,
                       self_energy: bool = True) -> RieszCoefficients:
    """Build the coefficient table for ``params`` (``gamma`` is irrelevant).

    With ``self_energy=False`` the ball self-energy is skipped and
    ``c_alpha`` is NaN; the stability thresholds do not depend on it.
    """
    spec = spec or DEFAULT_SPEC
    coeffs = RieszCoefficients(
        params=params,
        mu=mu_sequence(params, d_max),
        i_coeff=i_coefficient(params, spec),
        c_alpha=ball_self_energy(params, spec) if self_energy else math.nan,
        d_max=d_max,
    )
    if check:
        coeffs.check()
    return coeffs
