"""Command-line entry point: ``premium-bandit --algo glm --horizon 500 --seeds 0-9``."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ALGOS, ConfigError, parse_config
from .harness import (ReplicationError, export_csv, run_replications, summarize,
                      write_plot_script)

SEED_ENV = "PREMIUM_BANDIT_SEED"


def parse_seeds(text):
    """'0,3,5-7' -> [0, 3, 5, 6, 7]."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def _seed_list(text):
    try:
        return parse_seeds(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def build_parser():
    p = argparse.ArgumentParser(
        prog="premium-bandit",
        description="Simulate adaptive insurance pricing policies and measure their regret.",
    )
    p.add_argument("--config", metavar="PATH", help="YAML run configuration")
    p.add_argument("--algo", choices=ALGOS, help="scenario to run (default: from config, else glm)")
    p.add_argument("--horizon", type=int, metavar="N", help="number of periods T")
    p.add_argument("--seeds", type=_seed_list, metavar="LIST",
                   help="replication seeds, e.g. 0-19 or 1,4,9")
    p.add_argument("--delay-max", type=int, metavar="M", help="maximum claim delay m")
    p.add_argument("--jobs", type=int, metavar="N",
                   help="parallel replications (default: available CPUs)")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.epilog = f"Environment: {SEED_ENV} overrides the base seed added to every seed."
    return p


def resolve_config(args, environ=None):
    """Defaults < config file < flags; the seed environment variable sets base_seed."""
    environ = os.environ if environ is None else environ
    cfg = parse_config(args.config) if args.config else parse_config(None)
    data = cfg.to_dict()
    if args.algo is not None:
        data["policy"]["algo"] = args.algo
    if args.horizon is not None:
        data["horizon"] = args.horizon
    if args.seeds is not None:
        data["seeds"] = args.seeds
    if args.delay_max is not None:
        data["delay"]["m"] = args.delay_max
    if args.out is not None:
        data["output_dir"] = args.out
    if environ.get(SEED_ENV):
        try:
            data["base_seed"] = int(environ[SEED_ENV])
        except ValueError as e:
            raise ConfigError([(SEED_ENV, f"expected an integer, got {environ[SEED_ENV]!r}")]) from e
    return parse_config(data)


def scenarios(cfg):
    """(policy, delayed) pairs for the configured algo."""
    algo = cfg.policy.algo
    if algo == "compare":
        return [("glm", False), ("gp", False), ("glm", True), ("gp", True)]
    policy, _, suffix = algo.partition("-")
    return [(policy, suffix == "delayed" or cfg.delay.enabled)]


def run(cfg, jobs=None, stdout=None):
    stdout = sys.stdout if stdout is None else stdout
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(cfg.dump())
    seeds = [cfg.base_seed + s for s in cfg.seeds]
    rows = []
    for policy, delayed in scenarios(cfg):
        name = f"{policy}{'-delayed' if delayed else ''}"
        traces = run_replications(cfg, policy, delayed, seeds, jobs)
        run_dir = out / name
        files = [export_csv(tr, run_dir / f"{tr.run_id}.csv").name for tr in traces]
        write_plot_script(run_dir, files)
        rows.append((name, summarize(traces)))
    lines = [f"{'policy':<12} {'n':>4} {'mean_cum_regret':>16} {'se':>10}"]
    for name, s in rows:
        lines.append(f"{name:<12} {s['n']:>4} {s['mean_cum_regret']:>16.4f} {s['se']:>10.4f}")
    table = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(table)
    stdout.write(table)
    return rows


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # --help or a usage error
        return int(e.code or 0)
    try:
        cfg = resolve_config(args)
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError([("--jobs", "must be >= 1")])
        run(cfg, jobs=args.jobs)
    except ConfigError as e:
        for path, msg in e.problems:
            print(f"config error: {path}: {msg}", file=sys.stderr)
        return 2
    except ReplicationError as e:
        print(f"replication failed: {e.report()}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
