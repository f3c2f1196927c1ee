"""Large-system SINRs and bit partitioning for RVQ-quantized feedback.

Every user quantizes its direct and cross channel directions with random
codebooks, splitting a budget of ``bt_bar`` bits per antenna. Distortions
are summarised through ``x_d = 2**-bd_bar`` and ``X_t = 2**-bt_bar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .rmt import DEFAULT_SOLVER, DomainError, GammaParams, gamma_rho_derivative, solve_g, solve_gamma

RHO_MIN, RHO_MAX = 1e-8, 1e3

BRANCH_XT = "X_t"
BRANCH_XD = "X_d"


@dataclass(frozen=True)
class DigitalParams:
    beta: float
    epsilon: float
    gamma_d: float
    bt_bar: float = 4.0

    def __post_init__(self):
        for name in ("beta", "gamma_d", "bt_bar"):
            v = getattr(self, name)
            if not (v > 0) or not math.isfinite(v):
                raise DomainError(f"{name} must be positive, got {v!r}")
        if not (self.epsilon >= 0) or not math.isfinite(self.epsilon):
            raise DomainError(f"epsilon must be nonnegative, got {self.epsilon!r}")

    @property
    def x_t(self) -> float:
        return 2.0 ** (-self.bt_bar)


@dataclass(frozen=True)
class BitSplit:
    x_d: float
    bt_bar: float

    @property
    def bd_bar(self) -> float:
        return max(0.0, -math.log2(self.x_d))

    @property
    def bc_bar(self) -> float:
        return max(0.0, self.bt_bar - self.bd_bar)


@dataclass(frozen=True)
class CbfGeometry:
    gamma_q: float
    g2: float
    g3: float
    g2p: float
    g3p: float
    gamma_q_prime: float


@dataclass(frozen=True)
class CbfJointResult:
    rho_star: float
    split: BitSplit
    sinr: float
    branch: str
    rho_th: float | None


def _with_eps(p: DigitalParams, eps: float) -> DigitalParams:
    return DigitalParams(p.beta, eps, p.gamma_d, p.bt_bar)


def _check_x(p: DigitalParams, x_d: float):
    xt = p.x_t
    if not (xt * (1 - 1e-12) <= x_d <= 1.0):
        raise DomainError(f"x_d must lie in [{xt}, 1], got {x_d!r}")


# ---------------------------------------------------------------- MCP ------


def quality_d(x_d: float, p: DigitalParams) -> float:
    """Overall CSIT quality ``d`` of a bit split."""
    _check_x(p, x_d)
    xt, eps = p.x_t, p.epsilon
    return (math.sqrt(max(0.0, 1.0 - x_d)) + eps * math.sqrt(max(0.0, 1.0 - xt / x_d))) / (1.0 + eps)


def effective_snr_q(p: DigitalParams, d: float) -> float:
    return d * d / (1.0 - d * d + 1.0 / (p.gamma_d * (1.0 + p.epsilon)))


def mcp_limiting_sinr_q(p: DigitalParams, x_d: float, rho: float) -> float:
    from .analog import mcp_sinr_from_gamma_e

    return mcp_sinr_from_gamma_e(p.beta, effective_snr_q(p, quality_d(x_d, p)), rho)


def mcp_opt_bits(p: DigitalParams) -> BitSplit:
    """Split maximising ``d``; the root of the quartic in ``[X_t, 1]``.

    ``d`` is concave in ``x_d`` with derivative running from ``+inf`` at
    ``X_t`` to ``-inf`` at 1, so bisection on the derivative is safe.
    """
    xt, eps = p.x_t, p.epsilon
    if eps == 0.0:
        return BitSplit(xt, p.bt_bar)

    def slope(x):
        return -1.0 / math.sqrt(1.0 - x) + eps * xt / (x * x * math.sqrt(1.0 - xt / x))

    lo, hi = xt, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if slope(mid) > 0:
            lo = mid
        else:
            hi = mid
    return BitSplit(0.5 * (lo + hi), p.bt_bar)


def mcp_opt_rho_q(p: DigitalParams, d_star: float) -> float:
    # d = 0 carries no CSIT and sends the optimal regularization to infinity
    if not 0.0 < d_star < 1.0:
        raise DomainError(f"d_star must lie in (0, 1), got {d_star!r}")
    return p.beta / effective_snr_q(p, d_star)


def mcp_optimize_q(p: DigitalParams) -> tuple[BitSplit, float, float]:
    """Optimal split, regularization and SINR for joint processing."""
    split = mcp_opt_bits(p)
    rho = mcp_opt_rho_q(p, quality_d(split.x_d, p))
    return split, rho, solve_g(p.beta, rho)


def closed_form_turning_residual(p: DigitalParams, eps: float) -> float:
    """Residual of the closed-form turning-point condition
    ``x_d*^2 = (gd(1+eps) - 1/2) / (eps X_t [gd(1+eps) + 1 + eps/2])``.

    Kept for comparison only: for the canonical settings the right side is
    two orders of magnitude above ``x_d*^2`` and the condition has no root,
    so :func:`mcp_min_epsilon_q` uses :func:`mcp_turning_slope` instead.
    """
    q = _with_eps(p, eps)
    x = mcp_opt_bits(q).x_d
    gd, xt = p.gamma_d, p.x_t
    rhs = (gd * (1 + eps) - 0.5) / (eps * xt * (gd * (1 + eps) + 1 + eps / 2))
    return x * x - rhs


def mcp_turning_slope(p: DigitalParams, eps: float) -> float:
    """Quantity with the sign of ``d gamma_e*/d eps`` at cross gain ``eps``.

    ``x_d*`` maximises ``d`` so only the explicit ``eps``-dependence of
    ``d`` enters (envelope argument):
    ``d' = (sqrt(1 - X_t/x) - sqrt(1 - x)) / (1+eps)^2`` and
    ``d gamma_e/d eps`` is proportional to
    ``2 d' (1 + c/(1+eps)) + d c / (1+eps)^2`` with ``c = 1/gamma_d``.
    """
    q = _with_eps(p, eps)
    x = mcp_opt_bits(q).x_d
    d = quality_d(x, q)
    c = 1.0 / p.gamma_d
    dp = (math.sqrt(max(0.0, 1.0 - q.x_t / x)) - math.sqrt(1.0 - x)) / (1.0 + eps) ** 2
    return 2.0 * dp * (1.0 + c / (1.0 + eps)) + d * c / (1.0 + eps) ** 2


def mcp_min_epsilon_q(p: DigitalParams, lo: float = 1e-4, hi: float = 10.0, n_scan: int = 200) -> float | None:
    """Cross gain minimising the optimised joint-processing SINR.

    The SINR is increasing in ``gamma_e*``, so its minimum sits where
    :func:`mcp_turning_slope` changes sign from negative to positive. A
    log-spaced scan over ``[lo, hi]`` brackets the crossing and bisection
    refines it. ``None`` means no interior minimum in the interval.
    """
    f = lambda e: mcp_turning_slope(p, e)
    grid = np.geomspace(lo, hi, n_scan)
    vals = [f(e) for e in grid]
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa < 0 <= fb:
            return float(optimize.bisect(f, a, b, xtol=1e-14, rtol=1e-15, maxiter=200))
    return None


# ---------------------------------------------------------------- CBf ------


def cbf_geometry(p: DigitalParams, rho: float) -> CbfGeometry:
    gp = GammaParams(p.beta, rho, 1.0, p.epsilon) if p.epsilon > 0 else GammaParams(p.beta, rho, 1.0, 0.0)
    gam = solve_gamma(gp)
    gq = gamma_rho_derivative(gp, gam)
    eps = p.epsilon
    g2 = (1.0 + gam) ** -2
    g3 = (1.0 + eps * gam) ** -2
    g2p = -2.0 * gq * (1.0 + gam) ** -3
    g3p = -2.0 * eps * gq * (1.0 + eps * gam) ** -3
    return CbfGeometry(gam, g2, g3, g2p, g3p, gq)


def _cbf_parts(p: DigitalParams, x_d: float, geo: CbfGeometry):
    xt, eps = p.x_t, p.epsilon
    phi_d = 1.0 - x_d
    phi_c = 1.0 - xt / x_d
    e0 = 1.0 / p.gamma_d + x_d + eps * xt / x_d
    err = e0 + phi_d * geo.g2 + eps * phi_c * geo.g3
    return phi_d, phi_c, e0, err


def cbf_limiting_sinr_q(p: DigitalParams, x_d: float, rho: float, geo: CbfGeometry | None = None) -> float:
    _check_x(p, x_d)
    geo = geo or cbf_geometry(p, rho)
    phi_d, _, _, err = _cbf_parts(p, x_d, geo)
    return -phi_d * geo.gamma_q**2 / (p.beta * err * geo.gamma_q_prime)


def _crossover_den(p: DigitalParams, geo: CbfGeometry) -> float:
    xt = p.x_t
    return 1.0 - geo.g3 - xt * (2.0 - geo.g3)


def epsilon_threshold(p: DigitalParams, rho: float) -> float:
    """Cross gain up to which all bits go to the direct channel.

    Returns ``inf`` when the threshold denominator is nonpositive.
    """
    den = _crossover_den(p, cbf_geometry(p, rho))
    if den <= 0:
        return math.inf
    return p.x_t * (1.0 / p.gamma_d + 1.0) / den


def _all_direct(p: DigitalParams, geo: CbfGeometry) -> bool:
    return p.epsilon * _crossover_den(p, geo) <= p.x_t * (1.0 / p.gamma_d + 1.0)


def _interior_split(p: DigitalParams, geo: CbfGeometry) -> float:
    xt, eps = p.x_t, p.epsilon
    a = 1.0 / p.gamma_d + 1.0 + eps * geo.g3
    c = eps * xt * (1.0 - geo.g3)
    # positive root of a x^2 + 2 c x - c = 0, written without cancellation
    return c / (c + math.sqrt(c * c + a * c))


def cbf_opt_bits(p: DigitalParams, rho: float, geo: CbfGeometry | None = None) -> BitSplit:
    geo = geo or cbf_geometry(p, rho)
    if _all_direct(p, geo):
        return BitSplit(p.x_t, p.bt_bar)
    return BitSplit(max(p.x_t, _interior_split(p, geo)), p.bt_bar)


def _branch_x(p: DigitalParams, branch: str, geo: CbfGeometry) -> float:
    if branch == BRANCH_XT:
        return p.x_t
    return max(p.x_t, _interior_split(p, geo))


def cbf_branch_sinr(p: DigitalParams, rho: float, branch: str) -> float:
    geo = cbf_geometry(p, rho)
    return cbf_limiting_sinr_q(p, _branch_x(p, branch, geo), rho, geo)


def _stationary_rhs(p: DigitalParams, rho: float, branch: str) -> tuple[float, float]:
    """Right side of the stationarity fixed point and the slope sign term.

    With ``Psi = beta*(G2 + eps*G3)`` the SINR is proportional to
    ``Gamma*(rho+Psi)/E``; setting its ``rho``-derivative to zero gives
    ``rho = beta*[(G2'+eps G3') e0 + eps (G2 G3' - G3 G2') (X_t/x - x)] / E'``.
    Along the interior branch ``x`` moves with ``rho`` but, being a
    maximiser in ``x``, contributes nothing to the first derivative.
    """
    geo = cbf_geometry(p, rho)
    x = _branch_x(p, branch, geo)
    eps, xt = p.epsilon, p.x_t
    phi_d, phi_c, e0, err = _cbf_parts(p, x, geo)
    e_prime = phi_d * geo.g2p + eps * phi_c * geo.g3p
    num = (geo.g2p + eps * geo.g3p) * e0 + eps * (geo.g2 * geo.g3p - geo.g3 * geo.g2p) * (xt / x - x)
    rhs = p.beta * num / e_prime
    # d log SINR / d rho = Psi'/(rho+Psi) - E'/E
    psi = p.beta * (geo.g2 + eps * geo.g3)
    psi_p = p.beta * (geo.g2p + eps * geo.g3p)
    slope = psi_p / (rho + psi) - e_prime / err
    return rhs, slope


def cbf_sinr_slope(p: DigitalParams, rho: float, branch: str) -> float:
    """Analytic ``d log SINR / d rho`` on a branch."""
    return _stationary_rhs(p, rho, branch)[1]


def cbf_rho_stationary(
    p: DigitalParams,
    branch: str,
    damping: float = 0.5,
    max_iterations: int = DEFAULT_SOLVER.max_iterations,
    tol: float = 1e-13,
) -> float:
    """Stationary regularization of a branch objective.

    Damped iteration on ``rho = RHS(rho)`` first. If that stalls or leaves
    the search window, bracket a sign change of the analytic slope on
    ``[1e-8, 1e3]``; failing that, maximise the branch SINR directly.
    """
    if branch not in (BRANCH_XT, BRANCH_XD):
        raise ValueError(f"unknown branch {branch!r}")
    rho = p.beta / p.gamma_d + p.beta * p.x_t
    try:
        for _ in range(min(max_iterations, 500)):
            rhs, _ = _stationary_rhs(p, rho, branch)
            if not (rhs > 0) or not math.isfinite(rhs):
                raise ArithmeticError
            new = (1.0 - damping) * rho + damping * rhs
            if abs(new - rho) <= tol * max(1.0, rho):
                return new
            rho = new
    except (ArithmeticError, DomainError, ZeroDivisionError):
        pass

    slope = lambda r: cbf_sinr_slope(p, r, branch)
    grid = np.geomspace(RHO_MIN, RHO_MAX, 121)
    s = [slope(r) for r in grid]
    for a, b, sa, sb in zip(grid[:-1], grid[1:], s[:-1], s[1:]):
        if sa > 0 >= sb:
            return optimize.brentq(slope, a, b, xtol=1e-15, rtol=1e-14)
    res = optimize.minimize_scalar(
        lambda lr: -cbf_branch_sinr(p, math.exp(lr), branch),
        bounds=(math.log(RHO_MIN), math.log(RHO_MAX)), method="bounded",
        options={"xatol": 1e-10},
    )
    return math.exp(res.x)


def rho_threshold(p: DigitalParams) -> float | None:
    """Regularization below which the cross channel receives bits.

    ``None`` when the all-direct split is optimal for every ``rho`` in the
    search window (threshold at or below zero).
    """
    f = lambda r: p.epsilon * _crossover_den(p, cbf_geometry(p, r)) - p.x_t * (1.0 / p.gamma_d + 1.0)
    f_lo, f_hi = f(RHO_MIN), f(RHO_MAX)
    if f_lo <= 0:
        return None
    if f_hi > 0:
        return RHO_MAX
    return optimize.brentq(f, RHO_MIN, RHO_MAX, xtol=1e-15, rtol=1e-14)


def cbf_joint_opt(p: DigitalParams) -> CbfJointResult:
    """Joint regularization and bit split for coordinated beamforming."""
    rho_th = rho_threshold(p)
    rho_t = cbf_rho_stationary(p, BRANCH_XT)
    if rho_th is None or rho_t >= rho_th:
        rho, branch = rho_t, BRANCH_XT
    else:
        rho, branch = cbf_rho_stationary(p, BRANCH_XD), BRANCH_XD
    geo = cbf_geometry(p, rho)
    x = _branch_x(p, branch, geo)
    return CbfJointResult(rho, BitSplit(x, p.bt_bar), cbf_limiting_sinr_q(p, x, rho, geo), branch, rho_th)


# ---------------------------------------------------------------- SCP ------


def scp_limiting_sinr_q(p: DigitalParams) -> tuple[float, float]:
    """Per-cell processing on quantized direct channels only.

    Returns ``(rho_star, sinr)``.
    """
    xt = p.x_t
    ge = (1.0 - xt) / (xt + p.epsilon + 1.0 / p.gamma_d)
    rho = p.beta / ge
    return rho, solve_g(p.beta, rho)
