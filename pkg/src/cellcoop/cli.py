"""Batch command line: analyze, simulate, sweep, compare.

Parameters come from an optional JSON config file and from flags; flags
win. Results are written as CSV or JSON with a fixed column order.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields

from . import analog, digital, experiments, mcsim

THREADS_ENV = "CELLCOOP_THREADS"
SIG_DIGITS = 12

DEFAULTS = {
    "beta": 0.6,
    "gamma_d_db": 10.0,
    "gamma_u_db": 0.0,
    "kappa": 1.0,
    "bt_bar": 4.0,
    "scheme": "mcp",
    "feedback": "analog",
    "n": 60,
    "realizations": 100,
    "seed": 0,
    "threads": None,
    "out": None,
    "format": "csv",
    "variable": "epsilon",
    "start": None,
    "stop": None,
    "step": None,
    "budget": "uplink_rate",
    "eta": 1.0,
    "rvq_mode": "statistical",
    "simulate": False,
}
CONFIG_KEYS = frozenset(DEFAULTS) | {"epsilon", "subcommand"}

SIM_COLUMNS = (
    "scheme", "feedback", "rvq_mode", "n_antennas", "n_users", "beta", "epsilon", "gamma_d_db",
    "gamma_u_db", "kappa", "bt_bar", "nu", "bd_bits", "bc_bits", "rho", "alpha", "realizations",
    "seed", "limit_sinr", "mean_sinr", "mean_sum_rate", "sem_sum_rate", "normalized_diff",
)


class ConfigError(ValueError):
    """Invalid or incomplete run configuration; names the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class EmitError(RuntimeError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)
    output_path: str | None = None
    format: str = "csv"
    seed: int = 0
    threads: int = 1

    def system(self) -> experiments.SystemParams:
        p = self.params
        return experiments.SystemParams(
            beta=p["beta"], epsilon=p.get("epsilon", 0.0), gamma_d_db=p["gamma_d_db"],
            gamma_u_db=p["gamma_u_db"], kappa=p["kappa"], bt_bar=p["bt_bar"],
        )

    def to_json(self) -> str:
        d = dict(self.params)
        d.update(subcommand=self.subcommand, out=self.output_path, format=self.format,
                 seed=self.seed, threads=self.threads)
        return json.dumps(d, sort_keys=True, indent=2)


# --------------------------------------------------------------- parsing ----


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("network")
    g.add_argument("--config", help="JSON file of parameter values (flags override it)")
    g.add_argument("--beta", type=float, help="users per antenna K/N (default 0.6)")
    g.add_argument("--epsilon", type=float, help="cross-channel gain (required unless swept)")
    g.add_argument("--gamma-d-db", type=float, help="downlink SNR in dB (default 10)")
    g.add_argument("--gamma-u-db", type=float, help="uplink SNR in dB (default 0)")
    g.add_argument("--kappa", type=float, help="analog feedback channel uses per coefficient (default 1)")
    g.add_argument("--bt-bar", type=float, help="feedback bits per antenna (default 4)")
    s = common.add_argument_group("simulation")
    s.add_argument("--scheme", choices=["mcp", "cbf", "scp"], help="precoding scheme (default mcp)")
    s.add_argument("--feedback", choices=["analog", "rvq"], help="feedback model (default analog)")
    s.add_argument("--rvq-mode", choices=list(mcsim.RVQ_MODES), help="RVQ sampler (default statistical)")
    s.add_argument("--n", type=int, help="BS antennas N (default 60)")
    s.add_argument("--realizations", type=int, help="Monte Carlo realizations (default 100)")
    s.add_argument("--seed", type=int, help="base seed (default 0)")
    s.add_argument("--threads", help=f"worker threads or 'auto' (default ${THREADS_ENV} or 1)")
    w = common.add_argument_group("sweep / compare")
    w.add_argument("--variable", choices=list(experiments.SWEEP_VARIABLES), help="swept quantity (default epsilon)")
    w.add_argument("--start", type=float, help="first sweep value")
    w.add_argument("--stop", type=float, help="last sweep value (inclusive)")
    w.add_argument("--step", type=float, help="sweep increment")
    w.add_argument("--budget", choices=list(experiments.BUDGET_MODES), help="bits/channel-use conversion (compare)")
    w.add_argument("--eta", type=float, help="bits per feedback symbol for --budget modulation (default 1)")
    w.add_argument("--simulate", action="store_true", default=None, help="add Monte Carlo columns to a sweep")
    o = common.add_argument_group("output")
    o.add_argument("--out", help="output file (default stdout)")
    o.add_argument("--format", choices=["csv", "json"], help="output format (default csv)")
    o.add_argument("--dump-config", action="store_true", help="print the resolved config as JSON and exit")

    parser = argparse.ArgumentParser(
        prog="cellcoop",
        description="Large-system and Monte Carlo analysis of two-cell cooperative precoding with CSI feedback.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("analyze", parents=[common], help="limiting SINRs and optimal allocations at one point")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo at the optimised operating point")
    sub.add_parser("sweep", parents=[common], help="analysis (and optionally simulation) along one variable")
    sub.add_parser("compare", parents=[common], help="analog vs quantized feedback at an equal budget")
    return parser


def _load_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must hold a JSON object")
    for key in data:
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown config key")
    return data


def _threads(value) -> int:
    if value is None:
        value = os.environ.get(THREADS_ENV, "1")
    if isinstance(value, str) and value.strip().lower() == "auto":
        return os.cpu_count() or 1
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise ConfigError("threads", f"expected an integer or 'auto', got {value!r}") from None
    if n < 1:
        raise ConfigError("threads", "must be at least 1")
    return n


def parse_config(argv=None) -> tuple[RunConfig, argparse.Namespace]:
    ns = build_parser().parse_args(argv)
    merged = dict(DEFAULTS)
    if ns.config:
        filed = _load_file(ns.config)
        if "subcommand" in filed and filed["subcommand"] != ns.subcommand:
            raise ConfigError("subcommand", f"config is for {filed['subcommand']!r}, not {ns.subcommand!r}")
        filed.pop("subcommand", None)
        merged.update(filed)
    for key in CONFIG_KEYS - {"subcommand"}:
        v = getattr(ns, key, None)
        if v is not None:
            merged[key] = v

    sc = ns.subcommand
    swept = merged["variable"] if sc == "sweep" or (sc == "compare" and merged.get("start") is not None) else None
    if swept != "epsilon" and merged.get("epsilon") is None:
        raise ConfigError("epsilon", f"required for '{sc}'" + (f" when sweeping {swept}" if swept else ""))
    if sc == "sweep" or swept:
        for key in ("start", "stop", "step"):
            if merged.get(key) is None:
                raise ConfigError(key, f"required for a sweep over {merged['variable']}")
    if merged["format"] not in ("csv", "json"):
        raise ConfigError("format", "must be csv or json")
    for key in ("beta", "epsilon", "gamma_d_db", "gamma_u_db", "kappa", "bt_bar", "eta", "start", "stop", "step"):
        if merged.get(key) is None:
            continue
        try:
            merged[key] = float(merged[key])
        except (TypeError, ValueError):
            raise ConfigError(key, f"expected a number, got {merged[key]!r}") from None
    for key in ("n", "realizations", "seed"):
        try:
            merged[key] = int(merged[key])
        except (TypeError, ValueError):
            raise ConfigError(key, f"expected an integer, got {merged[key]!r}") from None
    if merged["realizations"] < 1:
        raise ConfigError("realizations", "must be at least 1")
    if merged["n"] < 2:
        raise ConfigError("n", "must be at least 2")
    threads = _threads(merged.pop("threads"))
    cfg = RunConfig(
        subcommand=sc,
        params={k: v for k, v in merged.items() if k not in ("out", "format", "seed")},
        output_path=merged["out"],
        format=merged["format"],
        seed=merged["seed"],
        threads=threads,
    )
    return cfg, ns


# --------------------------------------------------------------- output -----


def _fmt(v):
    if v is None:
        return None
    if isinstance(v, bool):
        return v
    if isinstance(v, int):
        return v
    if isinstance(v, float):
        if not math.isfinite(v):
            return None
        return float(f"{v:.{SIG_DIGITS}g}")
    return v


def _csv_cell(v) -> str:
    v = _fmt(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.{SIG_DIGITS}g}"
    return str(v)


def render(rows: list[dict], fmt: str, columns) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(columns)
        for r in rows:
            wr.writerow([_csv_cell(r.get(c)) for c in columns])
        return buf.getvalue()
    records = [{c: _fmt(r.get(c)) for c in columns} for r in rows]
    return json.dumps(records, indent=2) + "\n"


def emit(rows: list[dict], fmt: str, path: str | None, columns=experiments.COLUMNS) -> None:
    """Write records with a fixed header; no file is created for no rows."""
    if not rows:
        raise EmitError("no results to write")
    if fmt not in ("csv", "json"):
        raise EmitError(f"unknown format {fmt!r}")
    text = render(rows, fmt, columns)
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc}") from exc


# ------------------------------------------------------------ commands ------


def _sweep_spec(cfg: RunConfig, budget=None, simulate=False) -> experiments.SweepSpec:
    p = cfg.params
    return experiments.SweepSpec(
        variable=p["variable"], start=float(p["start"]), stop=float(p["stop"]), step=float(p["step"]),
        fixed=cfg.system(), budget=budget, simulate=simulate, n_antennas=p["n"],
        n_realizations=p["realizations"], seed=cfg.seed, rvq_mode=p["rvq_mode"],
    )


def cmd_analyze(cfg: RunConfig) -> tuple[list[dict], tuple, bool]:
    spec = experiments.SweepSpec("epsilon", cfg.params["epsilon"], cfg.params["epsilon"], 1.0,
                                 fixed=cfg.system(), n_antennas=cfg.params["n"])
    row = experiments.evaluate_point(spec, cfg.params["epsilon"])
    row["variable"] = None
    return [row], experiments.COLUMNS, row["error"] is None


def simulate_operating_point(cfg: RunConfig) -> dict:
    """Monte Carlo of one scheme at its large-system optimum."""
    p, sp = cfg.params, cfg.system()
    n = p["n"]
    k = int(round(sp.beta * n))
    sp = experiments.replace(sp, beta=k / n)
    scheme, feed = p["scheme"], p["feedback"]
    row = dict(asdict(sp), scheme=scheme, feedback=feed, n_antennas=n, n_users=k,
               realizations=p["realizations"], seed=cfg.seed)
    if feed == "analog":
        ap = sp.analog()
        if scheme == "mcp":
            res = analog.mcp_optimize(ap)
            nu, rho, lim = res.nu_star, res.rho_star, res.sinr_limit
        elif scheme == "cbf":
            res = analog.cbf_optimize(ap)
            nu, rho, lim = res.nu_star, res.rho_star, res.sinr_limit
        else:
            s = analog.estimator_stats(ap, 1.0)
            ge = s.omega_d / (s.delta_d + ap.epsilon + 1.0 / ap.gamma_d)
            nu, rho = 1.0, ap.beta / ge
            lim = analog.solve_g(ap.beta, rho)
        fb = mcsim.AnalogFeedback(nu, sp.gamma_u, sp.kappa)
        row["nu"] = nu
    else:
        dp = sp.digital()
        if scheme == "mcp":
            split, rho, lim = digital.mcp_optimize_q(dp)
        elif scheme == "cbf":
            cj = digital.cbf_joint_opt(dp)
            split, rho, lim = cj.split, cj.rho_star, cj.sinr
        else:
            split = digital.BitSplit(dp.x_t, dp.bt_bar)
            rho, lim = digital.scp_limiting_sinr_q(dp)
        fb = mcsim.RvqFeedback(split.bd_bar, split.bc_bar, p["rvq_mode"])
        row["bd_bits"], row["bc_bits"] = mcsim.integer_bits(split.bd_bar, split.bc_bar, n)
        row["rvq_mode"] = p["rvq_mode"]
    alpha = mcsim.alpha_from_rho(scheme, fb, sp.epsilon, n, rho)
    sim_cfg = mcsim.SimConfig(n, k, sp.epsilon, sp.gamma_d, scheme, fb, alpha, p["realizations"], cfg.seed)
    r = mcsim.simulate(sim_cfg, lim, cfg.threads)
    row.update(rho=rho, alpha=alpha, limit_sinr=lim, mean_sinr=r.mean_sinr, mean_sum_rate=r.mean_sum_rate,
               sem_sum_rate=r.sem_sum_rate, normalized_diff=r.normalized_diff)
    return row


def cmd_simulate(cfg):
    return [simulate_operating_point(cfg)], SIM_COLUMNS, True


def cmd_sweep(cfg):
    res = experiments.run_sweep(_sweep_spec(cfg, simulate=bool(cfg.params["simulate"])), cfg.threads)
    return res.rows, experiments.COLUMNS, res.ok


def cmd_compare(cfg):
    budget = experiments.BudgetConversion(cfg.params["budget"], cfg.params["eta"])
    if cfg.params.get("start") is not None:
        spec = _sweep_spec(cfg, budget=budget)
    else:
        e = cfg.params["epsilon"]
        spec = experiments.SweepSpec("epsilon", e, e, 1.0, fixed=cfg.system(), budget=budget)
    res = experiments.run_sweep(spec, cfg.threads)
    return res.rows, experiments.COLUMNS, res.ok


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "sweep": cmd_sweep, "compare": cmd_compare}


def main(argv=None) -> int:
    try:
        cfg, ns = parse_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if ns.dump_config:
        print(cfg.to_json())
        return 0
    try:
        rows, columns, ok = COMMANDS[cfg.subcommand](cfg)
        emit(rows, cfg.format, cfg.output_path, columns)
    except (EmitError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not ok:
        bad = [r for r in rows if r.get("error")]
        for r in bad:
            print(f"warning: point {r.get('x')}: {r['error']}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
