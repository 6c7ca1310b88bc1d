"""Gaussian-process UCB pricing with separate demand and claims posteriors.

Demand and claims are modelled by independent GPs. Their posteriors combine
into a posterior for revenue ``p * f_d(p) - f_c(p)``, and the policy plays the
grid price maximising ``mu_r + sqrt(phi_t) * sd_r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .market import DelayConfig, DomainError, Observation, Streams

UCB_GRID = 512
JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class KernelKind(str, Enum):
    SQUARED_EXPONENTIAL = "squared_exponential"
    MATERN_1_2 = "matern_1_2"
    MATERN_3_2 = "matern_3_2"
    MATERN_5_2 = "matern_5_2"


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind = KernelKind.MATERN_5_2
    length_scale: float = 1.0
    variance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if not self.length_scale > 0:
            raise DomainError("length_scale must be positive")
        if not self.variance > 0:
            raise DomainError("kernel variance must be positive")


def _kernel_of_distance(spec, r):
    s = np.abs(r) / spec.length_scale
    if spec.kind is KernelKind.SQUARED_EXPONENTIAL:
        k = np.exp(-0.5 * s**2)
    elif spec.kind is KernelKind.MATERN_1_2:
        k = np.exp(-s)
    elif spec.kind is KernelKind.MATERN_3_2:
        u = math.sqrt(3.0) * s
        k = (1.0 + u) * np.exp(-u)
    else:
        u = math.sqrt(5.0) * s
        k = (1.0 + u + u**2 / 3.0) * np.exp(-u)
    return spec.variance * k


def kernel_eval(spec, p, p2):
    return float(_kernel_of_distance(spec, float(p) - float(p2)))


def kernel_matrix(spec, x, y=None):
    x = np.asarray(x, dtype=float).ravel()
    y = x if y is None else np.asarray(y, dtype=float).ravel()
    return _kernel_of_distance(spec, x[:, None] - y[None, :])


def cholesky_with_jitter(A, jitters=JITTERS):
    """Lower Cholesky factor of ``A``, retrying with growing diagonal jitter.

    Returns (L, jitter_used); raises LinAlgError once the ladder is exhausted.
    """
    A = np.asarray(A, dtype=float)
    try:
        return np.linalg.cholesky(A), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = max(1.0, float(np.max(np.abs(np.diag(A))))) if A.size else 1.0
    eye = np.eye(len(A))
    for j in jitters:
        try:
            return np.linalg.cholesky(A + j * scale * eye), j * scale
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("Cholesky failed after maximum jitter")


class GpPosterior:
    """GP regression posterior with a Cholesky factor grown one row at a time."""

    def __init__(self, kernel=None, noise_sd=0.05, prior_mean=0.0):
        if not (math.isfinite(noise_sd) and noise_sd >= 0):
            raise DomainError("noise_sd must be finite and nonnegative")
        self.kernel = kernel or KernelSpec()
        self.noise_sd = float(noise_sd)
        self.prior_mean = float(prior_mean)
        self._points = np.empty(0)
        self._values = np.empty(0)
        self.chol = np.empty((0, 0))
        self.jitter = 0.0

    @property
    def points(self):
        return self._points

    @property
    def values(self):
        return self._values

    def __len__(self):
        return len(self._points)

    def copy(self):
        new = GpPosterior(self.kernel, self.noise_sd, self.prior_mean)
        new._points = self._points.copy()
        new._values = self._values.copy()
        new.chol = self.chol.copy()
        new.jitter = self.jitter
        return new

    def _noisy_gram(self, x):
        return kernel_matrix(self.kernel, x) + (self.noise_sd**2 + self.jitter) * np.eye(len(x))

    def add(self, p, y):
        """Condition on one more observation, in place."""
        p, y = float(p), float(y)
        if not (math.isfinite(p) and math.isfinite(y)):
            raise DomainError("observation must be finite")
        n = len(self._points)
        k_new = kernel_matrix(self.kernel, self._points, [p])[:, 0]
        kpp = self.kernel.variance + self.noise_sd**2 + self.jitter
        points = np.append(self._points, p)
        if n == 0:
            l_row, d = np.empty(0), kpp
        else:
            l_row = solve_triangular(self.chol, k_new, lower=True)
            d = kpp - float(l_row @ l_row)
        if d > 1e-12 * kpp:
            L = np.zeros((n + 1, n + 1))
            L[:n, :n] = self.chol
            L[n, :n] = l_row
            L[n, n] = math.sqrt(d)
        else:
            # near-duplicate point with tiny noise: refactor with jitter
            base = kernel_matrix(self.kernel, points) + self.noise_sd**2 * np.eye(n + 1)
            L, self.jitter = cholesky_with_jitter(base)
        self.chol = L
        self._points = points
        self._values = np.append(self._values, y)
        return self

    def predict(self, query):
        """Posterior mean and standard deviation at ``query`` (array or scalar)."""
        q = np.atleast_1d(np.asarray(query, dtype=float))
        prior_var = np.full(q.shape, self.kernel.variance)
        if len(self._points) == 0:
            return np.full(q.shape, self.prior_mean), np.sqrt(prior_var)
        Kxq = kernel_matrix(self.kernel, self._points, q)
        alpha = cho_solve((self.chol, True), self._values - self.prior_mean)
        mean = self.prior_mean + Kxq.T @ alpha
        V = solve_triangular(self.chol, Kxq, lower=True)
        var = np.clip(prior_var - np.sum(V * V, axis=0), 0.0, None)
        return mean, np.sqrt(var)


def gp_update(post, p, y):
    """Return a new posterior conditioned on (p, y); ``post`` is left untouched."""
    return post.copy().add(p, y)


def revenue_posterior(mu_d, sd_d, mu_c, sd_c, price):
    """Revenue mean and width from demand and claims posteriors.

    The widths add linearly (p * sd_d + sd_c), a conservative bound that holds
    without assuming independence of the two posteriors.
    """
    if np.any(np.asarray(sd_d) < 0) or np.any(np.asarray(sd_c) < 0):
        raise DomainError("standard deviations must be nonnegative")
    mu_r = price * mu_d - mu_c
    sd_r = price * sd_d + sd_c
    return mu_r, sd_r


def varphi(t, delta):
    """Confidence schedule 2 log(2 t^2 pi^2 / (3 delta)) + 2 log(t^2)."""
    if t < 1:
        raise DomainError("t must be >= 1")
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    return 2.0 * math.log(2.0 * t * t * math.pi**2 / (3.0 * delta)) + 2.0 * math.log(t * t)


def ucb_scores(post_d, post_c, grid, phi):
    grid = np.asarray(grid, dtype=float)
    mu_d, sd_d = post_d.predict(grid)
    mu_c, sd_c = post_c.predict(grid)
    mu_r, sd_r = revenue_posterior(mu_d, sd_d, mu_c, sd_c, grid)
    return mu_r + math.sqrt(phi) * sd_r


def ucb_select(post_d, post_c, grid, phi):
    """Grid price maximising the revenue UCB; np.argmax breaks ties toward the lowest price."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DomainError("price grid is empty")
    return float(grid[int(np.argmax(ucb_scores(post_d, post_c, grid, phi)))])


def information_gain(K, sigma):
    """0.5 log det(I + K / sigma^2) from a Cholesky factor."""
    K = np.asarray(K, dtype=float)
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if K.size == 0:
        return 0.0
    L = np.linalg.cholesky(np.eye(len(K)) + K / sigma**2)
    return float(np.sum(np.log(np.diag(L))))


@dataclass
class GpPricingState:
    """Demand and claims posteriors plus the fixed UCB grid."""

    post_d: GpPosterior
    post_c: GpPosterior
    grid: np.ndarray
    delta: float = 0.1
    prices: list = field(default_factory=list)

    @classmethod
    def create(cls, p_low, p_high, kernel_d=None, kernel_c=None, noise_d=0.05, noise_c=0.05,
               prior_mean_d=0.0, prior_mean_c=0.0, delta=0.1, n_grid=UCB_GRID):
        if not 0 < delta < 1:
            raise DomainError("delta must lie in (0, 1)")
        if n_grid < 1:
            raise DomainError("grid needs at least one point")
        return cls(
            post_d=GpPosterior(kernel_d, noise_d, prior_mean_d),
            post_c=GpPosterior(kernel_c, noise_c, prior_mean_c),
            grid=np.linspace(p_low, p_high, int(n_grid)),
            delta=delta,
        )

    def next_price(self, t):
        return ucb_select(self.post_d, self.post_c, self.grid, varphi(t, self.delta))


def gp_pricing_round(state, env, t):
    """Select a price, observe demand and claims, and update both posteriors."""
    price = state.next_price(t)
    obs = env.step(price, t)
    state.prices.append(price)
    state.post_d.add(price, obs.demand)
    state.post_c.add(price, obs.claim)
    return price, obs, state


def delayed_gp_round(state, env, ledger, t):
    """As :func:`gp_pricing_round`, but claims enter the posterior only on arrival."""
    price = state.next_price(t)
    obs = env.step(price, t)
    state.prices.append(price)
    state.post_d.add(price, obs.demand)
    ledger.record_delay(t, obs.claim_visible_at - t, obs.claim)
    for origin, claim in ledger.collect(t):
        state.post_c.add(state.prices[origin - 1], claim)
    return price, obs, state


def sample_gp_path(kernel, grid, rng, mean=0.0):
    """One draw of a zero-noise GP on ``grid``."""
    L, _ = cholesky_with_jitter(kernel_matrix(kernel, grid))
    return mean + L @ rng.standard_normal(len(grid))


class SampledTruthEnv:
    """Market whose demand and claims curves are single draws from GP priors.

    The curves are drawn once on ``grid`` and interpolated linearly between grid
    points. Observations add Gaussian noise with standard deviation ``noise_sd``;
    they are not truncated, so sampled demand and claims may be negative.
    """

    def __init__(self, p_low=0.5, p_high=10.0, kernel_d=None, kernel_c=None, noise_sd=0.05,
                 mean_d=0.0, mean_c=0.0, n_grid=UCB_GRID, delay_cfg=None, seed=0, horizon=None):
        if not 0 < p_low <= p_high:
            raise DomainError("price bounds must satisfy 0 < p_low <= p_high")
        self.p_low, self.p_high = float(p_low), float(p_high)
        self.noise_sd = float(noise_sd)
        self.delay_cfg = delay_cfg or DelayConfig()
        self.horizon = horizon
        self.streams = Streams.from_seed(seed)
        self.grid = np.linspace(self.p_low, self.p_high, int(n_grid))
        self.f_d = sample_gp_path(kernel_d or KernelSpec(KernelKind.MATERN_3_2), self.grid,
                                  self.streams.truth, mean_d)
        self.f_c = sample_gp_path(kernel_c or KernelSpec(KernelKind.MATERN_5_2), self.grid,
                                  self.streams.truth, mean_c)

    def _check(self, p):
        if np.any(p < self.p_low - 1e-12) or np.any(p > self.p_high + 1e-12):
            raise DomainError(f"price outside [{self.p_low}, {self.p_high}]")

    def mean_demand(self, price):
        return np.interp(price, self.grid, self.f_d)

    def mean_claims(self, price):
        return np.interp(price, self.grid, self.f_c)

    def expected_revenue(self, price):
        p = np.asarray(price, dtype=float)
        self._check(p)
        r = p * self.mean_demand(p) - self.mean_claims(p)
        return float(r) if np.ndim(r) == 0 else r

    def step(self, price, t):
        if t < 1:
            raise DomainError("period index starts at 1")
        self._check(price)
        d = float(self.mean_demand(price)) + self.noise_sd * self.streams.demand.standard_normal()
        c = float(self.mean_claims(price)) + self.noise_sd * self.streams.claims.standard_normal()
        tau = self.delay_cfg.sample(self.streams.delay, t, self.horizon)
        return Observation(t=t, price=float(price), demand=d, claim=c, claim_visible_at=t + tau)
