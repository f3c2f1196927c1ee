"""Scalar fixed points behind the large-system SINR expressions.

Two functionals show up everywhere:

* ``g(beta, rho)``, the positive solution of ``g = 1/(rho + beta/(1+g))``;
* ``Gamma(beta, rho, w1, w2)``, the positive solution of
  ``Gamma = 1/(rho + beta*w1/(1+w1*Gamma) + beta*w2/(1+w2*Gamma))``.

Both are decreasing in ``rho``; their ``rho``-derivatives have closed forms
obtained by implicit differentiation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class DomainError(ValueError):
    """Raised when an input lies outside the domain of a solver."""


@dataclass(frozen=True)
class SolverConfig:
    abs_tolerance: float = 1e-12
    max_iterations: int = 10_000

    def __post_init__(self):
        if not self.abs_tolerance > 0:
            raise DomainError("abs_tolerance must be positive")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be at least 1")


DEFAULT_SOLVER = SolverConfig()


@dataclass(frozen=True)
class GammaParams:
    """Inputs of the two-population fixed point.

    ``w1`` and ``w2`` are the variances of the two blocks of the estimated
    channel (direct/cross estimate variances for analog feedback, ``(1, eps)``
    for quantized feedback).
    """

    beta: float
    rho: float
    w1: float
    w2: float

    def __post_init__(self):
        _check_positive(beta=self.beta, rho=self.rho)
        if self.w1 < 0 or self.w2 < 0 or not (self.w1 + self.w2) > 0:
            raise DomainError(
                f"weights must be nonnegative with positive sum, got w1={self.w1}, w2={self.w2}"
            )


def _check_positive(**values):
    for name, v in values.items():
        if not (v > 0) or not math.isfinite(v):
            raise DomainError(f"{name} must be positive and finite, got {v!r}")


def solve_g(beta: float, rho: float) -> float:
    """Positive root of ``rho*g**2 + (rho+beta-1)*g - 1 = 0``.

    Uses the cancellation-free form of the quadratic formula: with
    ``b = rho+beta-1`` the roots are ``q/rho`` and ``-1/q`` where
    ``q = -(b + sign(b)*sqrt(b^2 + 4 rho))/2``.
    """
    _check_positive(beta=beta, rho=rho)
    b = rho + beta - 1.0
    s = math.sqrt(b * b + 4.0 * rho)
    if b >= 0:
        # q < 0, positive root is -1/q
        return 2.0 / (b + s)
    return (s - b) / (2.0 * rho)


def g_rho_derivative(beta: float, rho: float) -> float:
    """``dg/drho`` via ``g + rho*g' = beta*g/(beta + rho*(1+g)**2)``.

    Rearranged to ``g' = -g/(rho + beta/(1+g)**2)``, which avoids the
    subtraction of two nearly equal terms at small ``rho``.
    """
    g = solve_g(beta, rho)
    return -g / (rho + beta / (1.0 + g) ** 2)


def _gamma_residual(p: GammaParams, x: float) -> tuple[float, float]:
    """``h(x) = 1 - x*(rho + sum beta*w/(1+w*x))`` and its derivative.

    ``h`` has the same positive root as the fixed point and is strictly
    decreasing, which makes it a safe Newton target.
    """
    a1 = p.w1 * x / (1.0 + p.w1 * x)
    a2 = p.w2 * x / (1.0 + p.w2 * x)
    h = 1.0 - p.rho * x - p.beta * (a1 + a2)
    dh = -p.rho - p.beta * (p.w1 / (1.0 + p.w1 * x) ** 2 + p.w2 / (1.0 + p.w2 * x) ** 2)
    return h, dh


def solve_gamma(p: GammaParams, cfg: SolverConfig = DEFAULT_SOLVER) -> float:
    """Positive fixed point of the two-population map.

    Bisection on ``[0, 1/rho]`` brackets the root (``h(0) = 1 > 0`` and
    ``h(1/rho) <= 0``), then safeguarded Newton steps polish it.
    """
    lo, hi = 0.0, 1.0 / p.rho
    for _ in range(min(cfg.max_iterations, 60)):
        mid = 0.5 * (lo + hi)
        if _gamma_residual(p, mid)[0] > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-4 * hi:
            break
    x = 0.5 * (lo + hi)

    for _ in range(cfg.max_iterations):
        h, dh = _gamma_residual(p, x)
        if h > 0:
            lo = x
        elif h < 0:
            hi = x
        else:
            return x
        x_new = x - h / dh
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 4e-16 * x or hi - lo <= 4e-16 * hi:
            return x_new
        x = x_new
    return x


def gamma_rho_derivative(p: GammaParams, gamma: float) -> float:
    """``dGamma/drho`` in closed form, given the fixed point ``gamma``."""
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma!r}")
    den = (
        p.rho
        + p.beta * p.w1 / (1.0 + p.w1 * gamma) ** 2
        + p.beta * p.w2 / (1.0 + p.w2 * gamma) ** 2
    )
    return -gamma / den
