"""Bookkeeping for claims that are reported after a bounded delay.

A claim originating in period t with delay tau arrives in period t + tau.
``N(t)`` counts claims that arrived strictly before t. Claims are numbered
s = 1, 2, ... in the order they are observed (arrival period, then origin),
``rho(s)`` is the origin period of the s-th observed claim and the effective
delay is ``s - 1 - N(rho(s))``. Over a completed horizon the effective delays
sum to the true delays and never exceed twice the delay cap.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .market import DomainError


class LedgerStateError(RuntimeError):
    """The ledger is not in a state that supports the requested query."""


class DelayLedger:
    def __init__(self, m):
        if m < 0:
            raise DomainError("maximum delay must be >= 0")
        self.m = int(m)
        self.taus = []
        self._pending = defaultdict(list)  # arrival period -> [(origin, claim)]
        self.arrivals = {}  # period -> origins collected in that period
        self.observed = []  # origins in observation order

    def __len__(self):
        return len(self.taus)

    def record_delay(self, t, tau, claim):
        """Enqueue the claim of period ``t``; periods must be recorded in order."""
        if not 0 <= tau <= self.m:
            raise DomainError(f"delay {tau} outside [0, {self.m}]")
        if t != len(self.taus) + 1:
            raise LedgerStateError(f"expected period {len(self.taus) + 1}, got {t}")
        self.taus.append(int(tau))
        self._pending[t + tau].append((t, claim))

    def collect(self, t):
        """Remove and return the (origin, claim) pairs arriving in period ``t``, by origin."""
        if t < 1:
            raise DomainError("period index starts at 1")
        batch = sorted(self._pending.pop(t, []), key=lambda oc: oc[0])
        self.arrivals[t] = [o for o, _ in batch]
        self.observed.extend(o for o, _ in batch)
        return batch

    @property
    def pending_count(self):
        return sum(len(v) for v in self._pending.values())

    # -- derived sequences --------------------------------------------------
    def _arrival_times(self):
        return np.arange(1, len(self.taus) + 1) + np.asarray(self.taus, dtype=int)

    def counts(self, t):
        """N(t) = #{i < t : i + tau_i < t}."""
        return int(np.sum(self._arrival_times() < t))

    def counts_series(self):
        """N(1), ..., N(T+1)."""
        T = len(self.taus)
        arrive = self._arrival_times()
        return np.array([int(np.sum(arrive < t)) for t in range(1, T + 2)])

    def rho(self):
        """Origin periods in observation order, from the recorded delays."""
        T = len(self.taus)
        arrive = self._arrival_times()
        origins = np.arange(1, T + 1)
        return origins[np.lexsort((origins, arrive))]

    def effective_delays(self):
        """tau~_s = s - 1 - N(rho(s)) for s = 1..T; needs every claim arrived by T."""
        T = len(self.taus)
        if T and int(np.max(self._arrival_times())) > T:
            raise LedgerStateError("some claims arrive after the last recorded period")
        N = self.counts_series()
        rho = self.rho()
        s = np.arange(1, T + 1)
        return s - 1 - N[rho - 1]


def effective_delays(taus, m=None):
    """Effective delays of a complete delay schedule (periods 1..T)."""
    taus = list(taus)
    ledger = DelayLedger(max(taus, default=0) if m is None else m)
    for t, tau in enumerate(taus, start=1):
        ledger.record_delay(t, tau, None)
    return ledger.effective_delays()
