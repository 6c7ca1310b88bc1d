"""Simulated insurance market.

Demand and log-claims follow generalised linear models in the price:

    E[D(p)]     = h1(a0 + a1 p)
    E[log C(p)] = h2(b0 + b1 p)

Claims are exactly lognormal, so the expected claims entering the revenue
function carry the usual ``sigma2**2 / 2`` mean correction. Demand noise is
centred logistic (or Gaussian) with scale ``sigma1`` and is truncated at zero,
which biases the mean upwards only when the expected demand is close to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class Link(str, Enum):
    IDENTITY = "identity"
    LOG = "log"
    LOGIT = "logit"


def link_inverse(link, eta):
    """Mean function h(eta) of a canonical link."""
    link = Link(link)
    eta = np.asarray(eta, dtype=float)
    if link is Link.IDENTITY:
        return eta
    if link is Link.LOG:
        return np.exp(eta)
    return 1.0 / (1.0 + np.exp(-eta))


def link_derivative(link, eta):
    """dh/deta; equal to the variance function v(h(eta)) for canonical links."""
    link = Link(link)
    eta = np.asarray(eta, dtype=float)
    if link is Link.IDENTITY:
        return np.ones_like(eta)
    if link is Link.LOG:
        return np.exp(eta)
    s = 1.0 / (1.0 + np.exp(-eta))
    return s * (1.0 - s)


@dataclass(frozen=True)
class MarketParams:
    """True market parameters.

    Demand and claims coefficients and price bounds default to the reference
    experiment; the noise scales are not part of it and default to small
    values (logistic demand scale 0.25, log-claims sd 0.05).
    """

    a0: float = 11.0
    a1: float = -0.8
    b0: float = 3.0
    b1: float = 0.25
    sigma1: float = 0.25
    sigma2: float = 0.05
    demand_link: Link = Link.IDENTITY
    claims_link: Link = Link.IDENTITY
    p_low: float = 0.5
    p_high: float = 10.0
    demand_noise: str = "logistic"
    claims_enabled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "demand_link", Link(self.demand_link))
        object.__setattr__(self, "claims_link", Link(self.claims_link))
        if not 0 < self.p_low <= self.p_high:
            raise DomainError(
                f"price bounds must satisfy 0 < p_low <= p_high, got [{self.p_low}, {self.p_high}]"
            )
        for name in ("sigma1", "sigma2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and nonnegative, got {v}")
        for name in ("a0", "a1", "b0", "b1"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.demand_noise not in ("logistic", "gaussian"):
            raise DomainError(f"unknown demand noise family {self.demand_noise!r}")
        grid = np.linspace(self.p_low, self.p_high, 257)
        if np.any(self.mean_demand(grid) < 0):
            raise DomainError("expected demand is negative somewhere on the price interval")

    @property
    def beta(self):
        """True parameters as a 2x2 array with rows (a0, a1) and (b0, b1)."""
        return np.array([[self.a0, self.a1], [self.b0, self.b1]])

    def with_beta(self, beta, sigma2=None):
        """Copy with the GLM parameters (and optionally sigma2) replaced, for plug-in revenue."""
        beta = np.asarray(beta, dtype=float)
        changes = dict(a0=beta[0, 0], a1=beta[0, 1], b0=beta[1, 0], b1=beta[1, 1])
        if sigma2 is not None:
            changes["sigma2"] = float(sigma2)
        return _replace_unchecked(self, **changes)

    def mean_demand(self, price):
        return link_inverse(self.demand_link, self.a0 + self.a1 * np.asarray(price, dtype=float))

    def mean_log_claims(self, price):
        return link_inverse(self.claims_link, self.b0 + self.b1 * np.asarray(price, dtype=float))

    def mean_claims(self, price):
        if not self.claims_enabled:
            return np.zeros_like(np.asarray(price, dtype=float))
        return np.exp(self.mean_log_claims(price) + 0.5 * self.sigma2**2)


def _replace_unchecked(params, **changes):
    # plug-in estimates may imply negative demand; skip validation
    new = object.__new__(MarketParams)
    for field in MarketParams.__dataclass_fields__:
        object.__setattr__(new, field, changes.get(field, getattr(params, field)))
    return new


@dataclass(frozen=True)
class DelayConfig:
    """Claim reporting delays, capped at ``max_delay`` periods.

    ``distribution`` is one of ``uniform`` (on {0..m}), ``deterministic``
    (always ``fixed``) or ``geometric`` (success probability ``geom_p``,
    truncated at m).
    """

    max_delay: int = 0
    distribution: str = "uniform"
    fixed: int = 0
    geom_p: float = 0.5

    def __post_init__(self):
        if self.max_delay < 0:
            raise DomainError("max_delay must be >= 0")
        if self.distribution not in ("uniform", "deterministic", "geometric"):
            raise DomainError(f"unknown delay distribution {self.distribution!r}")
        if self.distribution == "deterministic" and not 0 <= self.fixed <= self.max_delay:
            raise DomainError("fixed delay must lie in [0, max_delay]")
        if not 0 < self.geom_p <= 1:
            raise DomainError("geom_p must lie in (0, 1]")

    def sample(self, rng, t=None, horizon=None):
        """Draw one delay. With a horizon, the cap shrinks to ``horizon - t``
        so that every claim is reported by the end of the run."""
        cap = self.max_delay
        if horizon is not None and t is not None:
            cap = max(0, min(cap, horizon - t))
        if self.distribution == "deterministic":
            tau = self.fixed
        elif self.distribution == "uniform":
            tau = int(rng.integers(0, self.max_delay + 1))
        else:
            tau = int(rng.geometric(self.geom_p)) - 1
        return min(tau, cap)


@dataclass
class Streams:
    """Independent random streams for one replication."""

    demand: np.random.Generator
    claims: np.random.Generator
    delay: np.random.Generator
    truth: np.random.Generator

    @classmethod
    def from_seed(cls, seed):
        children = np.random.SeedSequence(seed).spawn(4)
        return cls(*(np.random.default_rng(s) for s in children))


@dataclass(frozen=True)
class Observation:
    t: int
    price: float
    demand: float
    claim: float
    claim_visible_at: int


def _check_price(price, params):
    if not (params.p_low - 1e-12 <= price <= params.p_high + 1e-12):
        raise DomainError(f"price {price} outside [{params.p_low}, {params.p_high}]")


def sample_demand(price, params, rng):
    _check_price(price, params)
    if params.demand_noise == "logistic":
        eps = rng.logistic()
    else:
        eps = rng.standard_normal()
    return max(0.0, float(params.mean_demand(price)) + params.sigma1 * eps)


def sample_total_claims(price, params, rng):
    _check_price(price, params)
    z = rng.standard_normal()
    if not params.claims_enabled:
        return 0.0
    return math.exp(float(params.mean_log_claims(price)) + params.sigma2 * z)


def _h(link, eta):
    if link is Link.IDENTITY:
        return eta
    if link is Link.LOG:
        return math.exp(eta)
    return 1.0 / (1.0 + math.exp(-eta))


def _revenue_scalar(p, params):
    r = p * _h(params.demand_link, params.a0 + params.a1 * p)
    if params.claims_enabled:
        r -= math.exp(_h(params.claims_link, params.b0 + params.b1 * p) + 0.5 * params.sigma2**2)
    return r


def expected_revenue(price, params):
    """price * E[D(price)] - E[C(price)]; vectorised over ``price``."""
    if isinstance(price, (float, int)):
        _check_price(price, params)
        return _revenue_scalar(float(price), params)
    p = np.asarray(price, dtype=float)
    if np.any(p < params.p_low - 1e-12) or np.any(p > params.p_high + 1e-12):
        raise DomainError(f"price outside [{params.p_low}, {params.p_high}]")
    r = p * params.mean_demand(p) - params.mean_claims(p)
    return float(r) if r.ndim == 0 else r


def step(price, t, params, delay_cfg, streams, horizon=None):
    """Play one period: demand and claims are drawn independently given the price."""
    if t < 1:
        raise DomainError("period index starts at 1")
    d = sample_demand(price, params, streams.demand)
    c = sample_total_claims(price, params, streams.claims)
    tau = delay_cfg.sample(streams.delay, t, horizon)
    return Observation(t=t, price=float(price), demand=d, claim=c, claim_visible_at=t + tau)


class MarketEnv:
    """Parametric market bound to one replication's random streams."""

    def __init__(self, params, delay_cfg=None, seed=0, horizon=None):
        self.params = params
        self.delay_cfg = delay_cfg or DelayConfig()
        self.streams = Streams.from_seed(seed)
        self.horizon = horizon

    @property
    def p_low(self):
        return self.params.p_low

    @property
    def p_high(self):
        return self.params.p_high

    def step(self, price, t):
        return step(price, t, self.params, self.delay_cfg, self.streams, self.horizon)

    def expected_revenue(self, price):
        return expected_revenue(price, self.params)
