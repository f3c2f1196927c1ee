"""Parameter sweeps and analog-versus-digital budget conversions.

SNRs enter in dB and are converted to linear scale once, in
:class:`SystemParams`; everything downstream works on linear values.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import analog, digital, mcsim
from .rmt import DomainError, solve_g

SWEEP_VARIABLES = ("epsilon", "N", "bt_bar", "kappa")
BUDGET_MODES = ("uplink_rate", "modulation")
FEEDBACKS = ("analog", "rvq")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SystemParams:
    """Symmetric two-cell network with both feedback models' knobs."""

    beta: float = 0.6
    epsilon: float = 0.5
    gamma_d_db: float = 10.0
    gamma_u_db: float = 0.0
    kappa: float = 1.0
    bt_bar: float = 4.0

    @property
    def gamma_d(self) -> float:
        return db_to_linear(self.gamma_d_db)

    @property
    def gamma_u(self) -> float:
        return db_to_linear(self.gamma_u_db)

    def analog(self) -> analog.AnalogParams:
        return analog.AnalogParams(self.beta, self.epsilon, self.gamma_d, self.gamma_u, self.kappa)

    def digital(self) -> digital.DigitalParams:
        return digital.DigitalParams(self.beta, self.epsilon, self.gamma_d, self.bt_bar)


# ------------------------------------------------------------ budgets -------


@dataclass(frozen=True)
class BudgetConversion:
    """How feedback bits map to the channel uses of analog feedback.

    ``uplink_rate``: bits sent error-free at the rate of the two-BS uplink,
    ``B_t/N = 2 kappa log2(1 + (1+eps) gamma_u)``.
    ``modulation``: a fixed ``eta`` bits-per-symbol mapping,
    ``eta B_t = 2 kappa N``.
    """

    mode: str
    eta: float = 1.0

    def __post_init__(self):
        if self.mode not in BUDGET_MODES:
            raise ValueError(f"unknown budget mode {self.mode!r}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")


def convert_budget(
    conv: BudgetConversion,
    *,
    kappa: float | None = None,
    bt_bar: float | None = None,
    epsilon: float = 0.0,
    gamma_u: float = 1.0,
) -> float:
    """Bits per antenna from ``kappa``, or ``kappa`` from bits per antenna.

    Pass exactly one of ``kappa`` and ``bt_bar``; the other is returned.
    """
    if (kappa is None) == (bt_bar is None):
        raise ValueError("pass exactly one of kappa and bt_bar")
    if conv.mode == "uplink_rate":
        per_use = 2.0 * math.log2(1.0 + (1.0 + epsilon) * gamma_u)
    else:
        per_use = 2.0 / conv.eta
    if kappa is not None:
        return kappa * per_use
    return bt_bar / per_use


# ------------------------------------------------------------- analysis -----

COLUMNS = (
    "variable", "x", "beta", "epsilon", "gamma_d_db", "gamma_u_db", "kappa", "bt_bar", "n_antennas",
    # analog feedback
    "a_mcp_sinr", "a_mcp_nu", "a_mcp_rho", "a_mcp_gamma_e", "a_mcp_regime",
    "a_delta_d", "a_delta_c", "a_omega_d", "a_omega_c",
    "a_cbf_sinr", "a_cbf_nu", "a_cbf_rho", "a_cbf_gamma", "a_cbf_regime",
    "a_cbf_delta_d", "a_cbf_delta_c", "a_scp_sinr",
    # quantized feedback
    "q_mcp_sinr", "q_mcp_bd_bar", "q_mcp_rho", "q_mcp_d", "q_mcp_gamma_e",
    "q_cbf_sinr", "q_cbf_bd_bar", "q_cbf_rho", "q_cbf_gamma", "q_cbf_branch", "q_cbf_rho_th",
    "q_scp_sinr", "q_scp_rho",
    # finite-size simulation (blank unless requested)
    "sim_realizations",
    "sim_a_mcp_sinr", "sim_a_mcp_diff", "sim_a_cbf_sinr", "sim_a_cbf_diff",
    "sim_q_mcp_sinr", "sim_q_mcp_diff", "sim_q_cbf_sinr", "sim_q_cbf_diff",
    "error",
)


def _blank_row() -> dict:
    return {c: None for c in COLUMNS}


def analyze_analog(sp: SystemParams) -> dict:
    ap = sp.analog()
    m = analog.mcp_optimize(ap)
    c = analog.cbf_optimize(ap)
    s1 = analog.estimator_stats(ap, 1.0)
    # per-cell processing sees only direct estimates: nu = 1, no cross terms
    ge_scp = s1.omega_d / (s1.delta_d + ap.epsilon + 1.0 / ap.gamma_d)
    return {
        "a_mcp_sinr": m.sinr_limit, "a_mcp_nu": m.nu_star, "a_mcp_rho": m.rho_star,
        "a_mcp_gamma_e": m.gamma_e, "a_mcp_regime": m.regime,
        "a_delta_d": m.stats.delta_d, "a_delta_c": m.stats.delta_c,
        "a_omega_d": m.stats.omega_d, "a_omega_c": m.stats.omega_c,
        "a_cbf_sinr": c.sinr_limit, "a_cbf_nu": c.nu_star, "a_cbf_rho": c.rho_star,
        "a_cbf_gamma": c.gamma_star, "a_cbf_regime": c.regime,
        "a_cbf_delta_d": c.stats.delta_d, "a_cbf_delta_c": c.stats.delta_c,
        "a_scp_sinr": solve_g(ap.beta, ap.beta / ge_scp),
    }


def analyze_digital(sp: SystemParams) -> dict:
    dp = sp.digital()
    split, rho_m, sinr_m = digital.mcp_optimize_q(dp)
    d = digital.quality_d(split.x_d, dp)
    cj = digital.cbf_joint_opt(dp)
    rho_s, sinr_s = digital.scp_limiting_sinr_q(dp)
    return {
        "q_mcp_sinr": sinr_m, "q_mcp_bd_bar": split.bd_bar, "q_mcp_rho": rho_m,
        "q_mcp_d": d, "q_mcp_gamma_e": digital.effective_snr_q(dp, d),
        "q_cbf_sinr": cj.sinr, "q_cbf_bd_bar": cj.split.bd_bar, "q_cbf_rho": cj.rho_star,
        "q_cbf_gamma": digital.cbf_geometry(dp, cj.rho_star).gamma_q,
        "q_cbf_branch": cj.branch, "q_cbf_rho_th": cj.rho_th,
        "q_scp_sinr": sinr_s, "q_scp_rho": rho_s,
    }


def simulate_point(
    sp: SystemParams, n_antennas: int, n_realizations: int, seed: int, feedbacks=FEEDBACKS,
    rvq_mode: str = "statistical", threads: int = 1,
) -> dict:
    """Monte Carlo check of the optimised MCP and CBf operating points."""
    k = int(round(sp.beta * n_antennas))
    beta = k / n_antennas
    sp = replace(sp, beta=beta)
    out = {"sim_realizations": n_realizations}
    common = dict(n_antennas=n_antennas, n_users=k, epsilon=sp.epsilon, gamma_d=sp.gamma_d,
                  n_realizations=n_realizations, seed=seed)
    if "analog" in feedbacks:
        ap = sp.analog()
        for scheme, res in (("mcp", analog.mcp_optimize(ap)), ("cbf", analog.cbf_optimize(ap))):
            fb = mcsim.AnalogFeedback(res.nu_star, sp.gamma_u, sp.kappa)
            alpha = mcsim.alpha_from_rho(scheme, fb, sp.epsilon, n_antennas, res.rho_star)
            r = mcsim.simulate(mcsim.SimConfig(scheme=scheme, feedback=fb, alpha=alpha, **common),
                               res.sinr_limit, threads)
            out[f"sim_a_{scheme}_sinr"] = r.mean_sinr
            out[f"sim_a_{scheme}_diff"] = r.normalized_diff
    if "rvq" in feedbacks:
        dp = sp.digital()
        split, rho_m, sinr_m = digital.mcp_optimize_q(dp)
        cj = digital.cbf_joint_opt(dp)
        for scheme, sb, rho, lim in (("mcp", split, rho_m, sinr_m), ("cbf", cj.split, cj.rho_star, cj.sinr)):
            fb = mcsim.RvqFeedback(sb.bd_bar, sb.bc_bar, rvq_mode)
            alpha = mcsim.alpha_from_rho(scheme, fb, sp.epsilon, n_antennas, rho)
            r = mcsim.simulate(mcsim.SimConfig(scheme=scheme, feedback=fb, alpha=alpha, **common), lim, threads)
            out[f"sim_q_{scheme}_sinr"] = r.mean_sinr
            out[f"sim_q_{scheme}_diff"] = r.normalized_diff
    return out


# --------------------------------------------------------------- sweeps -----


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep around a fixed operating point.

    ``budget`` ties ``kappa`` and ``bt_bar`` together: sweeping one derives
    the other through :func:`convert_budget`.
    """

    variable: str
    start: float
    stop: float
    step: float
    fixed: SystemParams = field(default_factory=SystemParams)
    feedbacks: tuple = FEEDBACKS
    budget: BudgetConversion | None = None
    simulate: bool = False
    n_antennas: int = 60
    n_realizations: int = 100
    seed: int = 0
    rvq_mode: str = "statistical"

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable {self.variable!r}; choose from {SWEEP_VARIABLES}")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.stop < self.start:
            raise ValueError("empty sweep range (stop < start)")
        bad = set(self.feedbacks) - set(FEEDBACKS)
        if bad:
            raise ValueError(f"unknown feedback type(s) {sorted(bad)}")

    def points(self) -> np.ndarray:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        pts = self.start + self.step * np.arange(n)
        if self.variable == "N":
            pts = np.unique(np.round(pts).astype(int))
        return pts


@dataclass
class SweepResult:
    rows: list[dict]
    failures: list[tuple[float, str]]

    @property
    def ok(self) -> bool:
        return not self.failures


def _point_params(spec: SweepSpec, x) -> tuple[SystemParams, int]:
    sp, n = spec.fixed, spec.n_antennas
    if spec.variable == "N":
        n = int(x)
    else:
        sp = replace(sp, **{spec.variable: float(x)})
    if spec.budget is not None:
        kw = dict(epsilon=sp.epsilon, gamma_u=sp.gamma_u)
        if spec.variable == "bt_bar":
            sp = replace(sp, kappa=convert_budget(spec.budget, bt_bar=sp.bt_bar, **kw))
        else:
            sp = replace(sp, bt_bar=convert_budget(spec.budget, kappa=sp.kappa, **kw))
    return sp, n


def evaluate_point(spec: SweepSpec, x) -> dict:
    row = _blank_row()
    sp, n = _point_params(spec, x)
    row.update(asdict(sp))
    row.update(variable=spec.variable, x=x, n_antennas=n)
    errors = []
    for name, fn in (("analog", analyze_analog), ("rvq", analyze_digital)):
        if name not in spec.feedbacks:
            continue
        try:
            row.update(fn(sp))
        except (DomainError, ValueError, ArithmeticError) as exc:
            errors.append(f"{name}: {exc}")
    if spec.simulate:
        feeds = tuple(f for f in spec.feedbacks if not any(e.startswith(f) for e in errors))
        try:
            row.update(simulate_point(sp, n, spec.n_realizations, spec.seed, feeds, spec.rvq_mode))
        except (DomainError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            errors.append(f"simulation: {exc}")
    row["error"] = "; ".join(errors) if errors else None
    return row


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Evaluate every point of the sweep.

    Points are independent and mapped over ``threads`` workers; rows come
    back in sweep order. A point that fails keeps its row (with the message
    in ``error``) and is listed in ``failures``; the sweep carries on.
    """
    xs = [int(x) if spec.variable == "N" else float(x) for x in spec.points()]
    rows = mcsim.parallel_map(lambda x: evaluate_point(spec, x), xs, threads)
    failures = [(r["x"], r["error"]) for r in rows if r["error"]]
    return SweepResult(rows, failures)
