"""Model parameters ``(N, alpha, gamma)`` of the Riesz liquid-drop energy."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

from .errors import DomainError
from .numerics import unit_ball_volume

__all__ = ["ModelParams"]


@dataclass(frozen=True)
class ModelParams:
    """Dimension ``N``, Riesz exponent ``alpha`` and coupling ``gamma``.

    The energy is ``P(E) + gamma * int_E int_E |x - y|^-alpha``; the
    analysis requires ``0 < alpha < N - 1``.
    """

    N: int
    alpha: float
    gamma: float = 1.0

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 2:
            raise DomainError(f"dimension N must be an integer >= 2, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "gamma", float(self.gamma))
        if not 0.0 < self.alpha < self.N - 1:
            raise DomainError(
                f"alpha={self.alpha!r} is outside the valid interval "
                f"(0, {self.N - 1}) for N={self.N}")
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise DomainError(f"gamma must be a finite positive number, got {self.gamma!r}")

    @cached_property
    def omega_N(self) -> float:
        """Volume of the unit ball in ``R^N``."""
        return unit_ball_volume(self.N)

    @cached_property
    def omega_Nm1(self) -> float:
        """Volume of the unit ball in ``R^(N-1)``."""
        return unit_ball_volume(self.N - 1)

    @property
    def sphere_area(self) -> float:
        """``H^{N-1}(S^{N-1}) = N omega_N``."""
        return self.N * self.omega_N

    @property
    def equator_area(self) -> float:
        """``H^{N-2}(S^{N-2}) = (N-1) omega_{N-1}``, the Funk-Hecke prefactor."""
        return (self.N - 1) * self.omega_Nm1

    def with_gamma(self, gamma: float) -> "ModelParams":
        return replace(self, gamma=gamma)

    def as_dict(self) -> dict:
        return {"dim": self.N, "alpha": self.alpha, "gamma": self.gamma}
