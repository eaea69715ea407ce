"""Command-line front end.

``rbq analyze|simulate|verify CONFIG [--format json|csv] [--out PATH] [--seed U64] [--threads N]``

Exit codes: 0 success, 1 a verification check failed, 2 invalid config,
3 unstable model, 4 numerical failure.  The log level is read from the
``RBQ_LOG`` environment variable (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import replace
from typing import Any

import numpy as np
from scipy import stats

from . import config as cfgmod
from .errors import ConfigError, DomainError, InstabilityError, NumericError, RBPViolation
from .gm1 import Gm1Model, steady_state
from .gmn1 import first_departure_prob, steady_state_gmn1
from .mngn1 import MnGn1Model, first_arrival_prob, residuals_mngn1, steady_state_mngn1
from .sim import SimConfig, SimStats, empirical_lst, simulate

log = logging.getLogger("rbq")

ANALYSIS_SCHEMA = "rbq.analysis/1"
VERIFY_SCHEMA = "rbq.verify/1"
SIG_DIGITS = 12

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_NUMERIC = 0, 1, 2, 3, 4


# -- analytic side -------------------------------------------------------------

class Analysis:
    """Uniform view of the three steady-state solutions, indexed by queue length."""

    def __init__(self, cfg: cfgmod.ModelConfig):
        self.cfg = cfg
        self.kind = cfg.kind
        model = cfg.model
        if isinstance(model, Gm1Model):
            self.sol = steady_state(model)
            self.sigma = self.sol.sigma
        elif isinstance(model, MnGn1Model):
            self.sol = steady_state_mngn1(model)
            self.sigma = None
            n_top = max(cfg.output.n_max, cfg.sim.residual_levels or 0, 1)
            self._mn_res = residuals_mngn1(model, n_top + 1)
            lam = np.array([model.arrival_rate(n) for n in range(len(self.sol.pi_n))])
            flow = lam * self.sol.pi_n
            self._mn_a = flow / math.fsum(flow)
        else:
            self.sol = steady_state_gmn1(model)
            self.sigma = self.sol.sigma_tail

    def pi(self, n: int) -> float:
        if isinstance(self.sol.model, MnGn1Model):
            return float(self.sol.pi_n[n]) if n < len(self.sol.pi_n) else 0.0
        return self.sol.pi(n)

    def a(self, n: int) -> float:
        """Arrival-epoch probability of finding ``n``."""
        if isinstance(self.sol.model, MnGn1Model):
            return float(self._mn_a[n]) if n < len(self._mn_a) else 0.0
        return self.sol.a(n)

    def residual_levels(self) -> range:
        top = self.cfg.output.n_max
        return range(1, top + 1) if isinstance(self.sol.model, MnGn1Model) else range(0, top + 1)

    def residual(self, n: int):
        if isinstance(self.sol.model, Gm1Model):
            return self.sol.residual
        if isinstance(self.sol.model, MnGn1Model):
            return self._mn_res[n - 1]
        return self.sol.residual(n)

    def first_prob(self, n: int) -> float:
        m = self.sol.model
        if isinstance(m, MnGn1Model):
            return 1.0 if n == 1 else first_arrival_prob(m, n)
        if isinstance(m, Gm1Model):
            return 1.0 - m.inter_arrival.lst(m.mu)
        return first_departure_prob(m, n)

    def idle_lst(self, s: float) -> float:
        m = self.sol.model
        if isinstance(m, MnGn1Model):
            lam0 = m.arrival_rate(0)
            return lam0 / (lam0 + s)
        return self.residual(0).eval(s)

    def report(self) -> dict[str, Any]:
        grid = self.cfg.output.s_grid
        top = self.cfg.output.n_max
        out: dict[str, Any] = {"schema": ANALYSIS_SCHEMA, "kind": self.kind,
                               "model": self.cfg.record["model"]}
        if self.sigma is not None:
            out["sigma"] = self.sigma
        if isinstance(self.sol.model, Gm1Model):
            out["rho"] = self.sol.rho
        out["a_n"] = {str(n): self.a(n) for n in range(top + 1)}
        out["pi_n"] = {str(n): self.pi(n) for n in range(top + 1)}
        out["residual_lst"] = {
            str(n): {"values": [{"s": s, "value": self.residual(n).eval(s)} for s in grid],
                     "mean": self.residual(n).mean}
            for n in self.residual_levels()}
        return out


def analyze(cfg: cfgmod.ModelConfig) -> dict[str, Any]:
    return Analysis(cfg).report()


# -- simulation side -------------------------------------------------------------

def sim_config(cfg: cfgmod.ModelConfig, threads: int = 1) -> SimConfig:
    o = cfg.sim
    levels = o.residual_levels if o.residual_levels is not None else cfg.output.n_max
    try:
        return SimConfig(model=cfg.sim_model, seed=o.seed, events=o.events, horizon=o.horizon,
                         warmup=o.warmup, trackers=o.trackers, replications=o.replications,
                         residual_levels=levels, threads=threads)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def run_simulation(cfg: cfgmod.ModelConfig, threads: int = 1) -> SimStats:
    cfg.sim_model.check_stable()
    return simulate(sim_config(cfg, threads))


def simulate_report(cfg: cfgmod.ModelConfig, threads: int = 1) -> dict[str, Any]:
    st = run_simulation(cfg, threads)
    return st.to_record(cfg.output.s_grid, cfg.output.n_max + 1)


# -- verification ------------------------------------------------------------------

def _critical(alpha: float, k: int, df: int | None) -> float:
    """Two-sided Bonferroni critical value, never below 3."""
    q = alpha / (2 * max(k, 1))
    crit = stats.t.isf(q, df) if df is not None else stats.norm.isf(q)
    return max(3.0, float(crit))


def verify(cfg: cfgmod.ModelConfig, threads: int = 1) -> dict[str, Any]:
    """Analytic values against simulation; one row per check."""
    an = Analysis(cfg)
    st = run_simulation(cfg, threads)
    opts = cfg.verify
    reps = len(st.reps)
    df = reps - 1 if reps > 1 else None
    grid = cfg.output.s_grid
    top = cfg.output.n_max
    sim_kind_mn = isinstance(cfg.sim_model, MnGn1Model)

    # (name, n, s, analytic, empirical, se, uses replication SE)
    stat_rows: list[tuple[str, int | None, float | None, float, float, float, bool]] = []
    pi, pi_se = st.time_avg
    a, a_se = st.arrival_epoch
    for n in range(top + 1):
        if an.pi(n) >= opts.min_prob and n < len(pi):
            stat_rows.append(("pi", n, None, an.pi(n), pi[n], pi_se[n], True))
        if an.a(n) >= opts.min_prob and n < len(a):
            stat_rows.append(("arrival_epoch", n, None, an.a(n), a[n], a_se[n], True))
    if an.sigma is not None and not sim_kind_mn:
        start = max(1, cfg.servers or 1)
        for n in range(start, start + 3):
            if an.a(n) >= opts.min_prob:
                r, r_se = st.epoch_ratio(n, "arrival")
                if math.isfinite(r):
                    stat_rows.append(("arrival_ratio", n, None, an.a(n) / an.a(n - 1), r, r_se, True))
    for n in an.residual_levels():
        x = st.residuals(n)
        if x.size < opts.min_samples:
            continue
        for s, (e, se) in zip(grid, empirical_lst(x, grid)):
            stat_rows.append(("residual_lst", n, s, an.residual(n).eval(s), e, se, False))
        flags = st.first_flags(n)
        p = float(flags.mean())
        stat_rows.append(("first_fraction", n, None, an.first_prob(n), p,
                          math.sqrt(p * (1 - p) / flags.size), False))
    idle = st.idle_periods
    if idle.size >= opts.min_samples:
        for s, (e, se) in zip(grid, empirical_lst(idle, grid)):
            stat_rows.append(("idle_lst", None, s, an.idle_lst(s), e, se, False))

    k = len(stat_rows)
    crit_rep = _critical(opts.alpha, k, df)
    crit_iid = _critical(opts.alpha, k, None)
    checks = []
    for name, n, s, ana, emp, se, rep in stat_rows:
        z = crit_rep if rep else crit_iid
        se = float(se) if math.isfinite(se) else 0.0
        tol = z * se + 1e-12
        checks.append({"check": name, "n": n, "s": s, "analytic": float(ana), "empirical": float(emp),
                       "se": se, "tolerance": tol, "pass": bool(abs(ana - emp) <= tol)})
    imbalance = st.rbp_max_imbalance
    checks.append({"check": "rbp_max_imbalance", "n": None, "s": None, "analytic": 1.0,
                   "empirical": float(imbalance), "se": 0.0, "tolerance": 0.0, "pass": imbalance <= 1})
    conserved = all(r.total_arrivals == r.total_departures + r.final_state for r in st.reps)
    checks.append({"check": "conservation", "n": None, "s": None, "analytic": 1.0,
                   "empirical": float(conserved), "se": 0.0, "tolerance": 0.0, "pass": conserved})
    if cfg.kind == "gmc":
        # analytic geometric tail from c on
        c = cfg.servers
        ratios = [an.pi(n) / an.pi(n - 1) for n in range(c + 1, c + 6)]
        dev = max(abs(r - an.sigma) for r in ratios)
        checks.append({"check": "pi_tail_geometric", "n": c, "s": None, "analytic": an.sigma,
                       "empirical": float(ratios[-1]), "se": 0.0, "tolerance": 1e-9, "pass": dev <= 1e-9})
    passed = all(c["pass"] for c in checks)
    return {"schema": VERIFY_SCHEMA, "kind": cfg.kind, "seed": cfg.sim.seed, "replications": reps,
            "alpha": opts.alpha, "critical_replication": crit_rep, "critical_iid": crit_iid,
            "passed": passed, "checks": checks}


# -- output ----------------------------------------------------------------------------

def round_sig(obj: Any, digits: int = SIG_DIGITS) -> Any:
    """Round every float to ``digits`` significant digits; non-finite floats become None."""
    if isinstance(obj, dict):
        return {k: round_sig(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v, digits) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.{digits}g}") if math.isfinite(x) else None
    return obj


def _flatten(obj: Any, prefix: str = "") -> list[tuple[str, Any]]:
    if isinstance(obj, dict):
        return [kv for k, v in obj.items() for kv in _flatten(v, f"{prefix}.{k}" if prefix else str(k))]
    if isinstance(obj, list):
        return [kv for i, v in enumerate(obj) for kv in _flatten(v, f"{prefix}[{i}]")]
    return [(prefix, obj)]


def render(report: dict[str, Any], fmt: str) -> str:
    report = round_sig(report)
    if fmt == "json":
        return json.dumps(report, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if "checks" in report:
        cols = ["check", "n", "s", "analytic", "empirical", "se", "tolerance", "pass"]
        w.writerow(cols)
        for row in report["checks"]:
            w.writerow(["" if row[c] is None else row[c] for c in cols])
    else:
        w.writerow(["key", "value"])
        for k, v in _flatten(report):
            w.writerow([k, "" if v is None else v])
    return buf.getvalue()


# -- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rbq", description="Rate-balance queueing analytics and simulation.")
    p.add_argument("command", choices=["analyze", "simulate", "verify"])
    p.add_argument("config", help="path to a JSON model configuration")
    p.add_argument("--format", choices=["json", "csv"], default=None,
                   help="output format (default: the config's output.format, else json)")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.add_argument("--seed", type=int, default=None, help="override sim.seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, default=1, help="worker processes for replications")
    return p


def _configure_logging() -> None:
    level = os.environ.get("RBQ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def run(args: argparse.Namespace) -> int:
    cfg = cfgmod.load(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = replace(cfg, sim=replace(cfg.sim, seed=args.seed))
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    fmt = args.format or cfg.output.format
    log.info("%s %s (kind %s)", args.command, args.config, cfg.kind)
    if args.command == "analyze":
        report = analyze(cfg)
    elif args.command == "simulate":
        report = simulate_report(cfg, args.threads)
    else:
        report = verify(cfg, args.threads)
    text = render(report, fmt)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.command == "verify" and not report["passed"]:
        failed = [c for c in report["checks"] if not c["pass"]]
        for c in failed:
            print(f"FAIL {c['check']} n={c['n']} s={c['s']}: analytic {c['analytic']:.6g}, "
                  f"empirical {c['empirical']:.6g}, tolerance {c['tolerance']:.3g}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"unstable model: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except RBPViolation as exc:
        print(f"rate-balance invariant violated: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
