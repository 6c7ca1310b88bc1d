"""
Claims that arrive late
=======================

Demand is seen at once but each claim shows up after a random delay of at most
m periods. The ledger tracks what has arrived, and the effective delays of the
observed sequence add up to the true delays.
"""

import numpy as np

from premium_bandit import DelayLedger, effective_delays
from premium_bandit.config import parse_config
from premium_bandit.harness import run_replications

# a small hand-made schedule
taus = [2, 0, 1, 3, 0, 0]
ledger = DelayLedger(3)
for t, tau in enumerate(taus, start=1):
    ledger.record_delay(t, tau, claim=float(t))
for t in range(1, 8):
    print(f"period {t}: claims from periods {[o for o, _ in ledger.collect(t)]}")

# pad with zero delays so every claim lands inside the horizon
full = taus + [0, 0, 0]
eff = effective_delays(full, 3)
print("delays", full, "effective", eff.tolist(), "sums", sum(full), int(eff.sum()))

# the same seeds with and without delays; market noise is shared
cfg = parse_config({"horizon": 1000, "delay": {"m": 5}})
seeds = list(range(5))
base = run_replications(cfg, "glm", False, seeds, jobs=1)
late = run_replications(cfg, "glm", True, seeds, jobs=1)
for s, a, b in zip(seeds, base, late):
    print(f"seed {s}: regret {a.cumulative[-1]:8.2f} without delays, "
          f"{b.cumulative[-1]:8.2f} with delays")
print(f"mean difference {np.mean([b.cumulative[-1] - a.cumulative[-1] for a, b in zip(base, late)]):+.2f}")
