"""Experiment driver: oracle, replications, regret traces and CSV export."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._optim import grid_then_golden
from .config import RunConfig
from .delay import DelayLedger
from .glm import L1, GlmPolicy
from .gp import GpPricingState, SampledTruthEnv, delayed_gp_round, gp_pricing_round
from .market import DelayConfig, DomainError, MarketEnv, MarketParams, expected_revenue

ORACLE_GRID = 10**6
CSV_HEADER = ["run_id", "t", "price", "demand", "claims", "regret", "cum_regret",
              "trace_metric", "beta_err"]


class ReplicationError(RuntimeError):
    """A replication aborted on a numerical or domain error."""

    def __init__(self, run_id, seed, t, cause):
        self.run_id, self.seed, self.t, self.cause = run_id, seed, t, cause
        super().__init__(f"run {run_id} (seed {seed}) failed at t={t}: "
                         f"{type(cause).__name__}: {cause}")

    def report(self):
        return {"run_id": self.run_id, "seed": self.seed, "t": self.t,
                "error": type(self.cause).__name__, "message": str(self.cause)}


def oracle_optimal_price(truth, n_grid=ORACLE_GRID):
    """Maximiser and maximum of expected revenue by grid scan plus golden section.

    ``truth`` is either :class:`MarketParams` or an environment exposing
    ``expected_revenue``, ``p_low`` and ``p_high``.
    """
    if isinstance(truth, MarketParams):
        def f(x):
            return expected_revenue(x, truth)
    else:
        f = truth.expected_revenue
    return grid_then_golden(f, truth.p_low, truth.p_high, n_grid, f_scalar=f)


def rate_series(cumulative):
    t = np.arange(1, len(cumulative) + 1, dtype=float)
    return np.asarray(cumulative, dtype=float) / np.sqrt(t * np.log(np.maximum(t, 2.0)))


@dataclass
class RegretTrace:
    run_id: str
    prices: np.ndarray
    demands: np.ndarray
    claims: np.ndarray
    per_period_regret: np.ndarray
    realized_revenue: np.ndarray
    trace_metric: np.ndarray | None = None
    beta_err: np.ndarray | None = None
    p_star: float = float("nan")
    r_star: float = float("nan")
    branches: list = field(default_factory=list)
    guard_violations: int = 0

    @property
    def cumulative(self):
        return np.cumsum(self.per_period_regret)

    @property
    def rate_series(self):
        return rate_series(self.cumulative)

    @property
    def horizon(self):
        return len(self.prices)

    def __len__(self):
        return len(self.prices)


def truth_mode(config, policy):
    mode = config.truth.mode
    if mode != "auto":
        return mode
    if policy == "glm" and config.policy.algo != "compare":
        return "parametric"
    return "sampled"


def make_env(config, mode, delayed, seed):
    d = config.delay
    delay_cfg = DelayConfig(d.m, d.distribution, d.fixed, d.geom_p) if delayed else DelayConfig()
    T = config.horizon
    if mode == "parametric":
        return MarketEnv(config.market.build(), delay_cfg, seed=seed, horizon=T)
    tr = config.truth
    m = config.market
    return SampledTruthEnv(m.p_low, m.p_high, tr.kernel_d.build(), tr.kernel_c.build(),
                           tr.noise_sd, tr.mean_d, tr.mean_c, tr.grid_size, delay_cfg,
                           seed=seed, horizon=T)


def _run_glm(config, env, mode, delayed, run_id, seed):
    g = config.policy.glm
    params = config.market.build()
    scale = g.claims_scale if g.claims_scale != "auto" else ("log" if mode == "parametric" else "level")
    pol = GlmPolicy(params, g.initial_prices, g.c, g.K, g.estimate_sigma2, claims_scale=scale)
    ledger = DelayLedger(config.delay.m) if delayed else None
    T = config.horizon
    metric = np.empty(T)
    err = np.full(T, np.nan)
    out = _Recorder()
    violations = 0
    t = 0
    try:
        for t in range(1, T + 1):
            price = pol.next_price(t)
            obs = env.step(price, t)
            if ledger is None:
                pol.observe(price, obs.demand, obs.claim)
            else:
                pol.observe(price, obs.demand)
                ledger.record_delay(t, obs.claim_visible_at - t, obs.claim)
                for origin, claim in ledger.collect(t):
                    pol.observe_claim(pol.prices[origin - 1], claim)
            dec = pol.decisions[-1]
            metric[t - 1] = pol.design.trace_metric
            if dec.branch in ("cep", "perturbed"):
                # guard before the decision, and the one-step condition after the update
                if dec.trace_metric < dec.floor or metric[t - 1] < L1(t, pol.c):
                    violations += 1
            if mode == "parametric":
                err[t - 1] = pol.beta_error()
            out.add(env, price, obs)
    except (np.linalg.LinAlgError, DomainError, FloatingPointError, ValueError) as e:
        raise ReplicationError(run_id, seed, t, e) from e
    return out.finish(run_id, env, trace_metric=metric, beta_err=err,
                      branches=[d.branch for d in pol.decisions], guard_violations=violations)


def _run_gp(config, env, delayed, run_id, seed):
    g = config.policy.gp
    m = config.market
    state = GpPricingState.create(m.p_low, m.p_high, g.kernel_d.build(), g.kernel_c.build(),
                                  g.noise_sd, g.noise_sd, g.prior_mean_d, g.prior_mean_c,
                                  g.delta, g.grid_size)
    ledger = DelayLedger(config.delay.m) if delayed else None
    out = _Recorder()
    t = 0
    try:
        for t in range(1, config.horizon + 1):
            if ledger is None:
                price, obs, state = gp_pricing_round(state, env, t)
            else:
                price, obs, state = delayed_gp_round(state, env, ledger, t)
            out.add(env, price, obs)
    except (np.linalg.LinAlgError, DomainError, FloatingPointError, ValueError) as e:
        raise ReplicationError(run_id, seed, t, e) from e
    return out.finish(run_id, env)


class _Recorder:
    def __init__(self):
        self.rows = []

    def add(self, env, price, obs):
        self.rows.append((price, obs.demand, obs.claim, env.expected_revenue(float(price))))

    def finish(self, run_id, env, **extra):
        p_star, r_star = oracle_optimal_price(env.params if isinstance(env, MarketEnv) else env)
        rows = np.array(self.rows, dtype=float).reshape(-1, 4)
        prices, demands, claims, rev = rows.T
        return RegretTrace(
            run_id=run_id, prices=prices, demands=demands, claims=claims,
            per_period_regret=r_star - rev, realized_revenue=prices * demands - claims,
            p_star=p_star, r_star=r_star, **extra,
        )


def run_id_for(policy, delayed, seed):
    return f"{policy}{'-delayed' if delayed else ''}-seed{seed}"


def run_experiment(config: RunConfig, policy, delayed=False, seed=0):
    """One replication of ``policy`` ("glm" or "gp"); deterministic given the seed.

    Regret is measured in expected revenue against the oracle optimum.
    Demand, claims, delays and the sampled truth draw from separate streams,
    so runs that differ only in ``delayed`` see the same market noise.
    """
    if policy not in ("glm", "gp"):
        raise DomainError(f"unknown policy {policy!r}")
    run_id = run_id_for(policy, delayed, seed)
    mode = truth_mode(config, policy)
    env = make_env(config, mode, delayed, seed)
    if policy == "glm":
        return _run_glm(config, env, mode, delayed, run_id, seed)
    return _run_gp(config, env, delayed, run_id, seed)


def _run_one(args):
    return run_experiment(*args)


def run_replications(config, policy, delayed=False, seeds=None, jobs=1):
    """Traces for every seed, in seed order regardless of completion order."""
    seeds = list(config.seeds if seeds is None else seeds)
    tasks = [(config, policy, delayed, s) for s in seeds]
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_one(a) for a in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_run_one, tasks))


# -- export -------------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def export_csv(trace, path):
    """Write one row per period; trace_metric and beta_err stay empty for GP runs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cum = trace.cumulative
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i in range(len(trace)):
            w.writerow([
                trace.run_id, i + 1, _fmt(trace.prices[i]), _fmt(trace.demands[i]),
                _fmt(trace.claims[i]), _fmt(trace.per_period_regret[i]), _fmt(cum[i]),
                "" if trace.trace_metric is None else _fmt(trace.trace_metric[i]),
                "" if trace.beta_err is None else _fmt(trace.beta_err[i]),
            ])
    os.replace(tmp, path)
    return path


def read_csv(path):
    """Parse a file written by :func:`export_csv` back into a list of dicts."""
    rows = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {"run_id": rec["run_id"], "t": int(rec["t"])}
            for k in CSV_HEADER[2:]:
                row[k] = None if rec[k] == "" else float(rec[k])
            rows.append(row)
    return rows


def write_plot_script(directory, csv_names):
    """Gnuplot script drawing cumulative regret and the rate series for each CSV."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = sorted(csv_names)
    lines = [
        "# gnuplot -p plot.gp",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 't'",
        "set multiplot layout 2,1",
        "set ylabel 'cumulative regret'",
    ]
    if names:
        lines.append("plot " + ", \\\n     ".join(
            f"'{n}' using 2:7 with lines title '{Path(n).stem}'" for n in names))
        lines.append("set ylabel 'cum_regret / sqrt(t log t)'")
        lines.append("plot " + ", \\\n     ".join(
            f"'{n}' using 2:($7/sqrt($2*log($2 < 2 ? 2 : $2))) with lines title '{Path(n).stem}'"
            for n in names))
    lines.append("unset multiplot")
    path = directory / "plot.gp"
    path.write_text("\n".join(lines) + "\n")
    return path


def summarize(traces):
    """Mean and standard error of final cumulative regret."""
    finals = np.array([t.cumulative[-1] if len(t) else 0.0 for t in traces])
    se = float(finals.std(ddof=1) / math.sqrt(len(finals))) if len(finals) > 1 else float("nan")
    return {"n": len(finals), "mean_cum_regret": float(finals.mean()), "se": se}
