"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line (printed in the terminal summary)
and then asserts, so a failing criterion also fails the test run.
"""

import math

import numpy as np
import pytest
from scipy import stats

from cellcoop import analog, cli, digital, experiments as ex, mcsim
from cellcoop.analog import AnalogParams
from cellcoop.digital import DigitalParams
from cellcoop.mcsim import AnalogFeedback, RvqFeedback, SimConfig
from cellcoop.rmt import GammaParams, g_rho_derivative, gamma_rho_derivative, solve_g, solve_gamma
from conftest import record_criterion
from oracles import naive_cbf, naive_rci_mcp, naive_sinr

GD = 10.0
CANON = dict(beta=0.6, gamma_d=GD, bt_bar=4.0)


def finish(number, title, checks):
    """``checks`` is a list of ``(label, ok, detail)``."""
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{label} {'ok' if good else 'FAILED'} ({info})" for label, good, info in checks)
    record_criterion(number, title, ok, detail)
    assert ok, detail


# ------------------------------------------------------------------ 1 -----


def test_c01_fixed_point_correctness():
    rng = np.random.default_rng(1)
    m = 10_000
    beta = rng.uniform(0.05, 5.0, m)
    rho = np.exp(rng.uniform(math.log(1e-2), math.log(1e2), m))

    # vectorised damped iteration as the oracle
    g = np.ones(m)
    for _ in range(1_000_000):
        new = 0.5 * g + 0.5 / (rho + beta / (1.0 + g))
        done = np.max(np.abs(new - g)) < 1e-16
        g = new
        if done:
            break
    closed = np.array([solve_g(b, r) for b, r in zip(beta, rho)])
    g_err = float(np.max(np.abs(closed - g)))

    w1 = rng.uniform(0.0, 3.0, m)
    w2 = rng.uniform(0.01, 3.0, m)
    res = []
    for b, r, a, c in zip(beta, rho, w1, w2):
        x = solve_gamma(GammaParams(b, r, a, c))
        res.append(abs(x - 1.0 / (r + b * a / (1 + a * x) + b * c / (1 + c * x))))
    gam_res = float(max(res))

    d_err = 0.0
    for b, r, a, c in list(zip(beta, rho, w1, w2))[:1000]:
        h = 1e-6 * r
        fd = (solve_g(b, r + h) - solve_g(b, r - h)) / (2 * h)
        d_err = max(d_err, abs(g_rho_derivative(b, r) / fd - 1))
        p = GammaParams(b, r, a, c)
        fd = (solve_gamma(GammaParams(b, r + h, a, c)) - solve_gamma(GammaParams(b, r - h, a, c))) / (2 * h)
        d_err = max(d_err, abs(gamma_rho_derivative(p, solve_gamma(p)) / fd - 1))
    finish(1, "fixed-point solvers", [
        ("g vs damped iteration", g_err < 1e-10, f"max abs err {g_err:.2e}"),
        ("Gamma residual", gam_res < 1e-12, f"max {gam_res:.2e}"),
        ("derivatives vs central differences", d_err < 1e-5, f"max rel err {d_err:.2e}"),
    ])


# ------------------------------------------------------------------ 2 -----


def _cbf_sinr_vec(p, x, geo):
    """CBf quantized-feedback limit, re-derived for an array of splits."""
    xt, e = p.x_t, p.epsilon
    phi_d, phi_c = 1 - x, 1 - xt / x
    err = 1 / p.gamma_d + phi_d * geo.g2 + e * phi_c * geo.g3 + x + e * xt / x
    return -phi_d * geo.gamma_q**2 / (p.beta * err * geo.gamma_q_prime)


def _joint_oracle(p):
    """200 x 200 grid over (log rho, x_d), then local zooms."""
    lr = np.linspace(math.log(1e-4), math.log(20.0), 200)
    xs = np.linspace(p.x_t, 1.0, 200)

    def table(lrs, xg):
        return np.array([_cbf_sinr_vec(p, xg, digital.cbf_geometry(p, math.exp(t))) for t in lrs])

    v = table(lr, xs)
    i, j = np.unravel_index(np.argmax(v), v.shape)
    best, cl, cx = v[i, j], lr[i], xs[j]
    dl, dx = lr[1] - lr[0], xs[1] - xs[0]
    for _ in range(7):
        lrs = np.linspace(cl - dl, cl + dl, 21)
        xg = np.unique(np.clip(np.linspace(cx - dx, cx + dx, 21), p.x_t, 1.0))
        t = table(lrs, xg)
        a, b = np.unravel_index(np.argmax(t), t.shape)
        if t[a, b] >= best:
            best, cl, cx = t[a, b], lrs[a], xg[b]
        dl, dx = dl / 5, dx / 5
    return math.exp(cl), cx, best


def test_c02_optimizers_match_grid_oracles():
    rng = np.random.default_rng(2)
    worst = {"nu": 0.0, "nu_sinr": 0.0, "xq": 0.0, "xc": 0.0, "xc_sinr": 0.0,
             "j_rho": 0.0, "j_x": 0.0, "j_sinr": 0.0}
    nus = np.arange(0.0, 1.0 + 5e-6, 1e-5)
    for _ in range(100):
        beta = rng.uniform(0.2, 1.2)
        eps = rng.uniform(0.0, 2.0)
        gd = math.exp(rng.uniform(0.0, math.log(100.0)))
        gu = math.exp(rng.uniform(math.log(0.1), math.log(10.0)))
        bt = rng.uniform(1.0, 8.0)

        ap = AnalogParams(beta, eps, gd, gu)
        r = analog.mcp_optimize(ap)
        gb = ap.gamma_u_bar
        dt = 1 / (1 + nus * gb) + eps / (1 + (1 - nus) * gb)
        k = int(np.argmin(dt))
        worst["nu"] = max(worst["nu"], abs(nus[k] - r.nu_star))
        s_grid = solve_g(beta, beta / analog.effective_snr(ap, nus[k]))
        worst["nu_sinr"] = max(worst["nu_sinr"], s_grid - r.sinr_limit)

        dp = DigitalParams(beta, eps, gd, bt)
        xs = np.arange(dp.x_t, 1.0 + 5e-6, 1e-5)
        xs = xs[xs <= 1.0]
        d = (np.sqrt(1 - xs) + eps * np.sqrt(np.clip(1 - dp.x_t / xs, 0, None))) / (1 + eps)
        worst["xq"] = max(worst["xq"], abs(xs[int(np.argmax(d))] - digital.mcp_opt_bits(dp).x_d))

        rho = math.exp(rng.uniform(math.log(0.01), math.log(2.0)))
        geo = digital.cbf_geometry(dp, rho)
        vals = _cbf_sinr_vec(dp, xs, geo)
        x_opt = digital.cbf_opt_bits(dp, rho, geo).x_d
        worst["xc"] = max(worst["xc"], abs(xs[int(np.argmax(vals))] - x_opt))
        worst["xc_sinr"] = max(worst["xc_sinr"], vals.max() - digital.cbf_limiting_sinr_q(dp, x_opt, rho, geo))

        j = digital.cbf_joint_opt(dp)
        o_rho, o_x, o_best = _joint_oracle(dp)
        worst["j_rho"] = max(worst["j_rho"], abs(o_rho - j.rho_star))
        worst["j_x"] = max(worst["j_x"], abs(o_x - j.split.x_d))
        worst["j_sinr"] = max(worst["j_sinr"], o_best - j.sinr)
    finish(2, "optimizers vs grid oracles (100 draws)", [
        ("joint-processing analog split", worst["nu"] < 1e-4 and worst["nu_sinr"] < 1e-6,
         f"arg {worst['nu']:.1e}, sinr shortfall {worst['nu_sinr']:.1e}"),
        ("joint-processing bit split", worst["xq"] < 1e-4, f"arg {worst['xq']:.1e}"),
        ("coordinated bit split", worst["xc"] < 1e-4 and worst["xc_sinr"] < 1e-6,
         f"arg {worst['xc']:.1e}, sinr shortfall {worst['xc_sinr']:.1e}"),
        ("coordinated joint (rho, split)",
         worst["j_rho"] < 1e-4 and worst["j_x"] < 1e-4 and worst["j_sinr"] < 1e-6,
         f"rho {worst['j_rho']:.1e}, x {worst['j_x']:.1e}, sinr shortfall {worst['j_sinr']:.1e}"),
    ])


# ------------------------------------------------------------------ 3 -----


def test_c03_quantized_feedback_thresholds():
    from scipy.optimize import brentq

    canon = lambda e: DigitalParams(epsilon=e, **CANON)
    branch = lambda e: digital.cbf_joint_opt(canon(e)).branch == digital.BRANCH_XD
    lo, hi = 0.05, 0.5
    assert not branch(lo) and branch(hi)
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if branch(mid) else (mid, hi)
    switch = 0.5 * (lo + hi)
    valley = digital.mcp_min_epsilon_q(canon(0.5))
    scp = lambda e: digital.scp_limiting_sinr_q(canon(e))[1]
    x_mcp = brentq(lambda e: scp(e) - digital.mcp_optimize_q(canon(e))[2], 0.01, 0.5)
    x_cbf = brentq(lambda e: scp(e) - digital.cbf_joint_opt(canon(e)).sinr, 0.3, 1.5)
    finish(3, "quantized-feedback thresholds", [
        ("all-direct bit split ends", abs(switch - 0.19) <= 0.03, f"{switch:.4f} vs 0.19"),
        ("joint-processing SINR minimum", abs(valley - 0.72) <= 0.03, f"{valley:.4f} vs 0.72"),
        ("per-cell vs joint crossover", abs(x_mcp - 0.13) <= 0.03, f"{x_mcp:.4f} vs 0.13"),
        ("per-cell vs coordinated crossover", abs(x_cbf - 0.82) <= 0.05, f"{x_cbf:.4f} vs 0.82"),
    ])


# ------------------------------------------------------------- 4 and 5 ----

NS = (10, 20, 30, 40, 50, 60)


def _convergence(scheme, fb, rho, limit, n, reals):
    alpha = mcsim.alpha_from_rho(scheme, fb, 0.5, n, rho)
    k = int(round(0.6 * n))
    r = mcsim.simulate(SimConfig(n, k, 0.5, GD, scheme, fb, alpha, reals, 2024), limit)
    se = r.sem_sum_rate / r.mean_sum_rate  # relative standard error, same scale as the diff
    return r.normalized_diff, se


def _trend_ok(diffs, ses):
    return all(b <= a + 2 * math.hypot(sa, sb) for (a, sa), (b, sb) in zip(zip(diffs, ses), zip(diffs[1:], ses[1:])))


def test_c04_analog_finite_size_convergence():
    ap = AnalogParams(0.6, 0.5, GD, 1.0)
    checks = []
    for scheme, res, target in (("mcp", analog.mcp_optimize(ap), 0.013), ("cbf", analog.cbf_optimize(ap), 0.005)):
        fb = AnalogFeedback(res.nu_star, 1.0)
        out = [_convergence(scheme, fb, res.rho_star, res.sinr_limit, n, 1000) for n in NS]
        diffs, ses = [o[0] for o in out], [o[1] for o in out]
        trail = ", ".join(f"{d * 100:.2f}" for d in diffs)
        checks.append((f"{scheme} at N=60", abs(diffs[-1] - target) <= 0.01,
                       f"{diffs[-1] * 100:.2f}% vs {target * 100:.1f}+-1 pp"))
        checks.append((f"{scheme} non-increasing in N", _trend_ok(diffs, ses), f"[{trail}]%"))
    finish(4, "analog finite-size convergence", checks)


def test_c05_rvq_finite_size_convergence():
    dp = DigitalParams(0.6, 0.5, GD, 4.0)
    split, rho_m, lim_m = digital.mcp_optimize_q(dp)
    cj = digital.cbf_joint_opt(dp)
    checks = []
    for scheme, sb, rho, lim, target in (("mcp", split, rho_m, lim_m, 0.031), ("cbf", cj.split, cj.rho_star, cj.sinr, 0.016)):
        fb = RvqFeedback(sb.bd_bar, sb.bc_bar, "statistical")
        d, _ = _convergence(scheme, fb, rho, lim, 60, 1000)
        checks.append((f"{scheme} at N=60", abs(d - target) <= 0.015, f"{d * 100:.2f}% vs {target * 100:.1f}+-1.5 pp"))
    finish(5, "RVQ finite-size convergence", checks)


# ------------------------------------------------------------------ 6 -----


def test_c06_finite_size_allocation_gap():
    eps_grid = np.round(np.arange(0.1, 1.01, 0.1), 10)
    gaps = {"mcp_a": [], "cbf_a": [], "mcp_q": [], "cbf_q": []}
    for e in eps_grid:
        sp = ex.SystemParams(epsilon=float(e))
        ap, dp = sp.analog(), sp.digital()
        for scheme, res in (("mcp", analog.mcp_optimize(ap)), ("cbf", analog.cbf_optimize(ap))):
            fb = AnalogFeedback(res.nu_star, sp.gamma_u)
            c = SimConfig(10, 6, float(e), sp.gamma_d, scheme, fb,
                          mcsim.alpha_from_rho(scheme, fb, float(e), 10, res.rho_star), 250, 6)
            gaps[f"{scheme}_a"].append(mcsim.grid_search_feedback_fs(c, 101).normalized_gap)
        split, rho_m, _ = digital.mcp_optimize_q(dp)
        cj = digital.cbf_joint_opt(dp)
        for scheme, sb, rho in (("mcp", split, rho_m), ("cbf", cj.split, cj.rho_star)):
            fb = RvqFeedback(sb.bd_bar, sb.bc_bar)
            c = SimConfig(10, 6, float(e), sp.gamma_d, scheme, fb,
                          mcsim.alpha_from_rho(scheme, fb, float(e), 10, rho), 250, 6)
            gaps[f"{scheme}_q"].append(mcsim.grid_search_feedback_fs(c).normalized_gap)
    limits = {"cbf_a": 0.06, "mcp_a": 0.01, "mcp_q": 0.01, "cbf_q": 0.02}
    finish(6, "finite-size allocation gap (N=10, K=6)", [
        (key, max(gaps[key]) < lim, f"peak {max(gaps[key]) * 100:.2f}% < {lim * 100:.0f}%")
        for key, lim in limits.items()
    ])


# ------------------------------------------------------------------ 7 -----


def test_c07_quantizer_and_estimator_consistency():
    n, b, m = 4, 8, 100_000
    h = mcsim._cn(np.random.default_rng(70), (m, n))
    _, t_exp = mcsim.rvq_quantize_explicit(h, b, np.random.default_rng(71))
    _, t_sta = mcsim.rvq_quantize_statistical(h, b, np.random.default_rng(72))
    mean_gap = abs(t_exp.mean() / t_sta.mean() - 1)
    ks = stats.ks_2samp(t_exp, t_sta).statistic
    crit = 1.628 * math.sqrt(2 / m)  # two-sample KS, alpha = 0.01

    eps, nu = 0.5, 0.5
    ch = mcsim.draw_channels(SimConfig(50, 1000, eps, GD, "mcp", AnalogFeedback(nu, 1.0), 1.0),
                             mcsim.realization_rng(73, 0))
    est = mcsim.analog_feedback_estimate(ch, nu, 1.0, 1.0, rng=np.random.default_rng(74))
    err = np.abs(ch.h - est.h_hat) ** 2
    s = analog.estimator_stats(AnalogParams(0.6, eps, GD, 1.0), nu)
    dd = np.mean(np.concatenate([err[0, :, 0].ravel(), err[1, :, 1].ravel()]))
    dc = np.mean(np.concatenate([err[0, :, 1].ravel(), err[1, :, 0].ravel()]))
    finish(7, "quantizer and estimator consistency", [
        ("RVQ mean distortion", mean_gap < 0.02, f"{mean_gap * 100:.2f}% apart"),
        ("RVQ two-sample KS", ks < crit, f"D={ks:.4f} < {crit:.4f}"),
        ("analog direct error", abs(dd / s.delta_d - 1) < 0.01, f"{dd:.5f} vs {s.delta_d:.5f}"),
        ("analog cross error", abs(dc / s.delta_c - 1) < 0.01, f"{dc:.5f} vs {s.delta_c:.5f}"),
    ])


# ------------------------------------------------------------------ 8 -----


def test_c08_small_instance_oracle():
    worst = 0.0
    count = 0
    for n in (2, 3):
        for k in (1, 2):
            for scheme in ("mcp", "cbf"):
                for fb in (AnalogFeedback(0.6, 1.0), RvqFeedback(1.0, 1.0)):
                    c = SimConfig(n, k, 0.7, GD, scheme, fb, 0.9, 100, 88)
                    for idx in range(100):
                        rng = mcsim.realization_rng(88, idx)
                        ch = mcsim.draw_channels(c, rng)
                        est = mcsim.estimate_channels(c, ch, rng)
                        got = mcsim.compute_sinr(ch, mcsim.build_precoder(c, est)).per_user_sinr
                        if scheme == "mcp":
                            w, c2 = naive_rci_mcp(est.h_hat, 0.9, 2 * GD)
                        else:
                            w, c2 = naive_cbf(est.h_hat, 0.9, GD)
                        ref = naive_sinr(ch.h, w, c2, scheme)
                        worst = max(worst, float(np.max(np.abs(got - ref) / np.maximum(1.0, np.abs(ref)))))
                        count += 1
    finish(8, "small-instance oracle equivalence", [
        ("pipeline vs naive loops", worst < 1e-12, f"max rel err {worst:.1e} over {count} realizations"),
    ])


# ------------------------------------------------------------------ 9 -----


def _comparison(mode):
    spec = ex.SweepSpec("epsilon", 0.1, 2.0, 0.1, budget=ex.BudgetConversion(mode, 1.0))
    res = ex.run_sweep(spec)
    assert res.ok, res.failures
    eps = np.array([r["x"] for r in res.rows])
    get = lambda key: np.array([r[key] for r in res.rows])
    return eps, get("a_mcp_sinr"), get("q_mcp_sinr"), get("a_cbf_sinr"), get("q_cbf_sinr")


def _single_crossover(adv):
    """Quantized ahead (adv > 0) on a prefix, analog ahead on the suffix."""
    s = np.sign(adv)
    return s[0] > 0 and s[-1] < 0 and np.count_nonzero(np.diff(s)) == 1


def test_c09_analog_vs_quantized_ordering():
    checks = []
    # uplink-rate conversion, kappa = 1, gamma_u = 0 dB
    eps, am, qm, ac, qc = _comparison("uplink_rate")
    low = eps < 1.0 - 1e-9
    checks.append(("uplink-rate: quantized ahead below eps=1 (both schemes)",
                   bool(np.all(qm[low] > am[low]) and np.all(qc[low] > ac[low])),
                   f"min margin {min(np.min(qm[low] - am[low]), np.min(qc[low] - ac[low])):.4f}"))
    checks.append(("uplink-rate: quantized coordinated ahead on all of (0, 2]", bool(np.all(qc > ac)),
                   f"min margin {np.min(qc - ac):.4f}"))
    high = eps > 1.5 + 1e-9
    checks.append(("uplink-rate: analog joint processing ahead above eps=1.5", bool(np.all(am[high] > qm[high])),
                   f"analog minus quantized at eps=2: {am[-1] - qm[-1]:+.4f}"))
    # modulation conversion, eta = 1 (2 bits per antenna)
    eps, am, qm, ac, qc = _comparison("modulation")
    checks.append(("fixed-bits: joint processing single crossover", _single_crossover(qm - am),
                   f"analog ahead from eps={eps[np.argmax(am > qm)]:.1f}"))
    checks.append(("fixed-bits: coordinated single crossover", _single_crossover(qc - ac),
                   f"analog ahead from eps={eps[np.argmax(ac > qc)]:.1f}"))
    # budget round trips
    rng = np.random.default_rng(9)
    rt = 0.0
    for _ in range(1000):
        conv = ex.BudgetConversion(str(rng.choice(ex.BUDGET_MODES)), float(rng.uniform(0.2, 4)))
        kw = dict(epsilon=float(rng.uniform(0, 2)), gamma_u=float(rng.uniform(0.1, 10)))
        kappa = float(rng.uniform(1, 10))
        back = ex.convert_budget(conv, bt_bar=ex.convert_budget(conv, kappa=kappa, **kw), **kw)
        rt = max(rt, abs(back / kappa - 1))
    checks.append(("budget round trip", rt < 1e-12, f"max rel err {rt:.1e}"))
    finish(9, "analog vs quantized comparison", checks)


# ----------------------------------------------------------------- 10 -----


def test_c10_determinism_across_threads(tmp_path):
    base = ["sweep", "--start", "0.2", "--stop", "1.0", "--step", "0.4", "--simulate", "--n", "12",
            "--realizations", "16", "--seed", "77"]
    blobs = []
    for t in (1, 4, 8):
        path = tmp_path / f"run{t}.csv"
        assert cli.main(base + ["--threads", str(t), "--out", str(path)]) == 0
        blobs.append(path.read_bytes())
    same = blobs[0] == blobs[1] == blobs[2]
    finish(10, "determinism across thread counts", [
        ("byte-identical CSV for threads 1, 4, 8", same, f"{len(blobs[0])} bytes"),
    ])
