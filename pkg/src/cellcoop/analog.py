"""Large-system SINRs and uplink power split for analog CSI feedback.

Each user trains its direct and cross channels over an uplink with total
power budget split as ``nu`` (direct) and ``1 - nu`` (cross). The base
station forms per-coefficient MMSE estimates; the resulting error variances
feed the limiting SINR of joint (MCP) or coordinated (CBf) precoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .rmt import DomainError, GammaParams, solve_g, solve_gamma

# regime labels
SCP_OWN_CELL = "SCP_own_cell"
MCP = "MCP"
SCP_OTHER_CELL = "SCP_other_cell"
CBF_INTERIOR = "CBf_interior"
CBF_BOUNDARY = "CBf_boundary"


@dataclass(frozen=True)
class AnalogParams:
    beta: float
    epsilon: float
    gamma_d: float
    gamma_u: float
    kappa: float = 1.0

    def __post_init__(self):
        for name in ("beta", "gamma_d", "gamma_u"):
            v = getattr(self, name)
            if not (v > 0) or not math.isfinite(v):
                raise DomainError(f"{name} must be positive, got {v!r}")
        if not (self.epsilon >= 0) or not math.isfinite(self.epsilon):
            raise DomainError(f"epsilon must be nonnegative, got {self.epsilon!r}")
        if not self.kappa >= 1:
            raise DomainError(f"kappa must be >= 1, got {self.kappa!r}")

    @property
    def gamma_u_bar(self) -> float:
        """Effective uplink SNR, ``2*gamma_u*kappa*(1+eps)``."""
        return 2.0 * self.gamma_u * self.kappa * (1.0 + self.epsilon)


@dataclass(frozen=True)
class EstimatorStats:
    delta_d: float
    delta_c: float
    omega_d: float
    omega_c: float
    gamma_u_bar: float

    @property
    def delta_t(self) -> float:
        return self.delta_d + self.delta_c


@dataclass(frozen=True)
class AnalogResult:
    nu_star: float
    rho_star: float
    sinr_limit: float
    regime: str
    stats: EstimatorStats
    gamma_e: float  # MCP effective SNR, or omega_d*Gamma for CBf
    gamma_star: float = float("nan")  # fixed point at the optimum (CBf only)


def estimator_stats(p: AnalogParams, nu: float) -> EstimatorStats:
    if not 0.0 <= nu <= 1.0:
        raise DomainError(f"nu must lie in [0, 1], got {nu!r}")
    gb = p.gamma_u_bar
    delta_d = 1.0 / (1.0 + nu * gb)
    delta_c = p.epsilon / (1.0 + (1.0 - nu) * gb)
    return EstimatorStats(delta_d, delta_c, 1.0 - delta_d, p.epsilon - delta_c, gb)


def effective_snr(p: AnalogParams, nu: float) -> float:
    """``gamma_e = (omega_d+omega_c)/(delta_d+delta_c+1/gamma_d)``."""
    s = estimator_stats(p, nu)
    return (s.omega_d + s.omega_c) / (s.delta_t + 1.0 / p.gamma_d)


def mcp_sinr_from_gamma_e(beta: float, gamma_e: float, rho: float) -> float:
    """Limiting MCP SINR as a function of the effective SNR only."""
    g = solve_g(beta, rho)
    if gamma_e <= 0:
        return 0.0
    return gamma_e * g * (1.0 + (rho / beta) * (1.0 + g) ** 2) / (gamma_e + (1.0 + g) ** 2)


def mcp_limiting_sinr(p: AnalogParams, nu: float, rho: float) -> float:
    return mcp_sinr_from_gamma_e(p.beta, effective_snr(p, nu), rho)


def optimal_nu_mcp(epsilon: float, gamma_u_bar: float) -> float:
    """Minimiser of the total estimation error over ``nu``.

    The total error is convex in ``nu``; the stationary point is clipped
    to ``[0, 1]``.
    """
    r = math.sqrt(epsilon)
    if r >= gamma_u_bar + 1.0:
        return 0.0
    if r <= 1.0 / (gamma_u_bar + 1.0):
        return 1.0
    return (1.0 + (1.0 - r) / gamma_u_bar) / (1.0 + r)


def mcp_regime(p: AnalogParams) -> str:
    r = math.sqrt(p.epsilon)
    gb = p.gamma_u_bar
    if r <= 1.0 / (gb + 1.0):
        return SCP_OWN_CELL
    if r >= gb + 1.0:
        return SCP_OTHER_CELL
    return MCP


def mcp_optimize(p: AnalogParams) -> AnalogResult:
    nu = optimal_nu_mcp(p.epsilon, p.gamma_u_bar)
    ge = effective_snr(p, nu)
    rho = p.beta / ge
    return AnalogResult(
        nu_star=nu,
        rho_star=rho,
        sinr_limit=solve_g(p.beta, rho),
        regime=mcp_regime(p),
        stats=estimator_stats(p, nu),
        gamma_e=ge,
    )


def _with_eps(p: AnalogParams, eps: float) -> AnalogParams:
    return AnalogParams(p.beta, eps, p.gamma_d, p.gamma_u, p.kappa)


@dataclass(frozen=True)
class EpsilonThresholds:
    """Breakpoints of the optimised MCP SINR along the cross gain.

    ``None`` marks a threshold that does not exist for these parameters.
    """

    eps_scp_max: float
    eps_scp_stationary: float | None
    eps_mcp_stationary: float | None


def mcp_epsilon_thresholds(p: AnalogParams, eps_cap: float = 10.0) -> EpsilonThresholds:
    gt = 2.0 * p.gamma_u * p.kappa  # uplink SNR without the (1+eps) factor

    # end of the own-cell plateau: sqrt(eps)*(gt*(1+eps)+1) = 1, increasing in eps
    eps_scp_max = optimize.brentq(
        lambda e: math.sqrt(e) * (gt * (1.0 + e) + 1.0) - 1.0, 0.0, 1.0, xtol=1e-14
    )

    stat = 1.0 / math.sqrt(p.gamma_d * gt) - 1.0
    eps_scp_stationary = stat if 0.0 <= stat <= eps_scp_max else None

    # minimum of gamma_e(eps) under nu*(eps) inside the cooperative range
    def ge(e):
        return effective_snr(_with_eps(p, e), optimal_nu_mcp(e, gt * (1.0 + e)))

    lo = eps_scp_max
    # upper end of the cooperative regime: sqrt(eps) = gt*(1+eps)+1 has no
    # solution for gt > 0 below the cap, so the cap is the bound in practice
    hi = eps_cap
    grid = np.linspace(lo, hi, 2001)
    vals = np.array([ge(e) for e in grid])
    i = int(np.argmin(vals))
    eps_mcp_stationary = None
    if 0 < i < len(grid) - 1:
        res = optimize.minimize_scalar(
            ge, bracket=(grid[i - 1], grid[i], grid[i + 1]), tol=1e-12
        )
        eps_mcp_stationary = float(res.x)
    return EpsilonThresholds(eps_scp_max, eps_scp_stationary, eps_mcp_stationary)


# ---------------------------------------------------------------- CBf ------


def _cbf_gamma(p: AnalogParams, s: EstimatorStats, rho: float) -> float:
    return solve_gamma(GammaParams(p.beta, rho, s.omega_c, s.omega_d))


def cbf_limiting_sinr(p: AnalogParams, nu: float, rho: float) -> float:
    s = estimator_stats(p, nu)
    if s.omega_d <= 0:
        return 0.0
    gam = _cbf_gamma(p, s, rho)
    qd = 1.0 / (1.0 + s.omega_d * gam) ** 2
    qc = 1.0 / (1.0 + s.omega_c * gam) ** 2
    num = (s.omega_d / p.beta) * gam * (rho + p.beta * s.omega_c * qc + p.beta * s.omega_d * qd)
    den = 1.0 / p.gamma_d + s.delta_t + s.omega_d * qd + s.omega_c * qc
    return num / den


def cbf_optimal_rho(p: AnalogParams, nu: float) -> float:
    s = estimator_stats(p, nu)
    return p.beta * (1.0 / p.gamma_d + s.delta_t)


def cbf_objective(p: AnalogParams, nu: float) -> float:
    """Optimised-``rho`` CBf SINR at a given split, ``omega_d * Gamma``."""
    s = estimator_stats(p, nu)
    if s.omega_d <= 0:
        return 0.0
    return s.omega_d * _cbf_gamma(p, s, cbf_optimal_rho(p, nu))


def cbf_optimize(p: AnalogParams, grid_points: int = 1001) -> AnalogResult:
    """Best split for CBf.

    The objective can be non-concave in ``nu`` so a uniform guard grid
    picks the basin, then golden-section search refines inside it. The
    endpoint ``nu = 1`` is always a candidate; ``nu = 0`` gives zero SINR.
    """
    f = lambda nu: cbf_objective(p, nu)
    grid = np.linspace(0.0, 1.0, grid_points)[1:]
    vals = np.array([f(v) for v in grid])
    i = int(np.argmax(vals))
    best_nu, best_val = 1.0, f(1.0)
    if i < len(grid) - 1:
        a = grid[i - 1] if i > 0 else 0.5 * grid[0]
        b = grid[i + 1]
        res = optimize.minimize_scalar(
            lambda v: -f(v), bounds=(a, b), method="bounded",
            options={"xatol": 1e-12, "maxiter": 500},
        )
        cand = [(float(res.x), -float(res.fun)), (float(grid[i]), float(vals[i]))]
        for nu, val in cand:
            if val > best_val:
                best_nu, best_val = nu, val
    s = estimator_stats(p, best_nu)
    rho = cbf_optimal_rho(p, best_nu)
    return AnalogResult(
        nu_star=best_nu,
        rho_star=rho,
        sinr_limit=best_val,
        regime=CBF_BOUNDARY if best_nu == 1.0 else CBF_INTERIOR,
        stats=s,
        gamma_e=best_val,
        gamma_star=_cbf_gamma(p, s, rho),
    )
