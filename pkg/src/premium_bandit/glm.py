"""Adaptive GLM pricing with controlled price dispersion.

The policy estimates demand and log-claims GLMs by maximum quasi-likelihood
and prices at the certainty-equivalent price, unless the design matrix of
price vectors (1, p) is not dispersed enough. Dispersion is measured by
``1 / tr(P^-1)``, which sandwiches the smallest eigenvalue of ``P``, and is
kept above ``L1(t) = c sqrt(t log t)`` by replaying earlier prices or by
nudging the certainty-equivalent price along the weakest eigen-direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._optim import grid_then_golden
from .market import DomainError, Link, expected_revenue, link_derivative, link_inverse

CEP_GRID = 2048


class SingularDesignError(np.linalg.LinAlgError):
    """Dispersion is undefined because the design matrix is singular."""


def price_vector(price):
    return np.array([1.0, float(price)])


@dataclass
class DesignState:
    """Design matrix P = sum p p^T with a Sherman-Morrison maintained inverse.

    ``P_inv`` is None until P first becomes nonsingular; from then on it is
    updated by rank-one corrections only.
    """

    P: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    P_inv: np.ndarray | None = None
    n_points: int = 0

    @classmethod
    def from_matrix(cls, P, n_points=0):
        P = np.array(P, dtype=float)
        inv = np.linalg.inv(P) if abs(np.linalg.det(P)) > 0 else None
        return cls(P=P, P_inv=inv, n_points=n_points)

    @property
    def trace_metric(self):
        """1 / tr(P^-1), or 0 while P is singular."""
        if self.P_inv is None:
            return 0.0
        return 1.0 / float(np.trace(self.P_inv))

    def copy(self):
        inv = None if self.P_inv is None else self.P_inv.copy()
        return DesignState(self.P.copy(), inv, self.n_points)


def sherman_morrison(A_inv, u):
    """(A + u u^T)^-1 from A^-1."""
    Au = A_inv @ u
    return A_inv - np.outer(Au, Au) / (1.0 + u @ Au)


def update_design(state, price):
    if not math.isfinite(price):
        raise DomainError("price must be finite")
    x = price_vector(price)
    P = state.P + np.outer(x, x)
    if state.P_inv is not None:
        P_inv = sherman_morrison(state.P_inv, x)
    else:
        det = P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]
        # rank-deficient designs (repeated prices) keep P_inv unset
        P_inv = np.linalg.inv(P) if det > 1e-12 * max(1.0, np.trace(P)) ** 2 else None
    return DesignState(P=P, P_inv=P_inv, n_points=state.n_points + 1)


def trace_inv_metric(P):
    """(tr(P^-1))^-1 for a symmetric positive definite 2x2 matrix.

    For 2x2 matrices tr(P^-1) = tr(P) / det(P), so the metric is det / tr.
    """
    P = np.asarray(P, dtype=float)
    det = P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]
    tr = P[0, 0] + P[1, 1]
    if not det > 0 or not tr > 0:
        raise SingularDesignError("dispersion undefined for a singular design matrix")
    return float(det / tr)


def eigen2x2(P):
    """Closed-form eigenpairs ((lam_max, v1), (lam_min, v2)) of a symmetric 2x2 matrix.

    v2 is v1 rotated by -90 degrees. When the eigenvalues coincide, v2 = (1, 0).
    """
    P = np.asarray(P, dtype=float)
    a, b, d = P[0, 0], 0.5 * (P[0, 1] + P[1, 0]), P[1, 1]
    mid = 0.5 * (a + d)
    rad = math.hypot(0.5 * (a - d), b)
    lam_max, lam_min = mid + rad, mid - rad
    if rad == 0.0:
        v1 = np.array([0.0, 1.0])
    elif b == 0.0:
        v1 = np.array([1.0, 0.0]) if a > d else np.array([0.0, 1.0])
    else:
        # pick the better-conditioned of the two null-space representations
        c1 = np.array([lam_max - d, b])
        c2 = np.array([b, lam_max - a])
        v1 = c1 if np.hypot(*c1) >= np.hypot(*c2) else c2
        v1 = v1 / math.hypot(v1[0], v1[1])
    v2 = np.array([v1[1], -v1[0]])
    return (lam_max, v1), (lam_min, v2)


def solve_mqle(prices, responses, link=Link.IDENTITY, beta0=None, tol=1e-10, max_iter=100,
               max_cond=1e12):
    """Root of the canonical-link quasi-score sum_i x_i (y_i - h(x_i^T beta)) = 0.

    Damped Newton with step halving. Returns None when the estimate does not
    exist: singular or ill-conditioned Fisher matrix, or no convergence. The
    score tolerance is relative to ``max(1, |X^T y|_inf)``.
    """
    p = np.asarray(prices, dtype=float)
    y = np.asarray(responses, dtype=float)
    if p.shape != y.shape:
        raise DomainError("prices and responses differ in length")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(y))):
        raise DomainError("MQLE input contains NaN or infinite values")
    if len(p) < 2:
        return None
    X = np.column_stack([np.ones_like(p), p])
    scale = max(1.0, float(np.max(np.abs(X.T @ y))))
    beta = np.zeros(2) if beta0 is None else np.array(beta0, dtype=float)
    if not np.all(np.isfinite(beta)):
        beta = np.zeros(2)

    def score(b):
        return X.T @ (y - link_inverse(link, X @ b))

    g = score(beta)
    gnorm = float(np.linalg.norm(g))
    for _ in range(max_iter):
        if gnorm <= tol * scale:
            return beta
        w = link_derivative(link, X @ beta)
        F = (X * w[:, None]).T @ X
        if not np.all(np.isfinite(F)):
            return None
        (lam_hi, _), (lam_lo, _) = eigen2x2(F)
        if not lam_lo > 0 or lam_hi / lam_lo > max_cond:
            return None
        step = np.linalg.solve(F, g)
        lam = 1.0
        for _ in range(30):
            cand = beta + lam * step
            gc = score(cand)
            gcn = float(np.linalg.norm(gc))
            if np.isfinite(gcn) and gcn < gnorm:
                break
            lam *= 0.5
        else:
            return None
        beta, g, gnorm = cand, gc, gcn
    return beta if gnorm <= tol * scale else None


def L1(t, c):
    """Dispersion floor c sqrt(t log t), with log(max(t, 2))."""
    return c * math.sqrt(t * math.log(max(t, 2)))


def L1_dot(t, c):
    """Analytic derivative of c sqrt(t log t)."""
    if t <= 1:
        raise DomainError("L1 derivative is undefined for t <= 1")
    lt = math.log(t)
    return c * (lt + 1.0) / (2.0 * math.sqrt(t * lt))


def default_perturbation_constant(c, t0=3):
    """Largest K with K sqrt(L1'(t0)) <= 1; L1' decreases for t >= 3."""
    return 1.0 / math.sqrt(L1_dot(t0, c))


def perturbation_phi(t, c, K, cep, v2):
    """K sqrt(L1'(t)) (v2[0] * cep - v2) for a price vector ``cep`` = (1, p).

    The first coordinate of the result is always zero, so the perturbed vector
    is again a price vector.
    """
    eps = K * math.sqrt(L1_dot(t, c))
    if abs(eps) > 1.0 + 1e-12:
        raise DomainError(f"|K sqrt(L1'(t))| = {abs(eps):.4g} exceeds 1")
    cep = np.asarray(cep, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    return eps * (v2[0] * cep - v2)


def certainty_equivalent_price(beta_hat, params, sigma2=None, n_grid=CEP_GRID,
                               claims_scale="log"):
    """Price maximising plug-in expected revenue over [p_low, p_high].

    With ``claims_scale="log"`` the second GLM models log-claims and expected
    claims carry the lognormal correction; with ``"level"`` it models claims
    directly and plug-in revenue is ``p h1(a0 + a1 p) - h2(b0 + b1 p)``.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    if not np.all(np.isfinite(beta_hat)):
        raise DomainError("parameter estimate must be finite")
    if claims_scale == "log":
        plug = params.with_beta(beta_hat, sigma2)

        def revenue(x):
            return expected_revenue(x, plug)
    elif claims_scale == "level":
        (a0, a1), (b0, b1) = beta_hat

        def revenue(x):
            d = link_inverse(params.demand_link, a0 + a1 * np.asarray(x))
            c = link_inverse(params.claims_link, b0 + b1 * np.asarray(x))
            return x * d - c
    else:
        raise DomainError(f"unknown claims scale {claims_scale!r}")
    p, _ = grid_then_golden(revenue, params.p_low, params.p_high, n_grid, f_scalar=revenue)
    return p


def two_point_metric(P, x):
    """1 / tr((P + x x^T)^-1) without forming the inverse."""
    Q = P + np.outer(x, x)
    det = Q[0, 0] * Q[1, 1] - Q[0, 1] * Q[1, 0]
    tr = Q[0, 0] + Q[1, 1]
    return det / tr if det > 0 else 0.0


class _Buffer:
    """Append-only float array with amortised growth."""

    def __init__(self, capacity=64):
        self._data = np.empty(capacity)
        self._n = 0

    def append(self, value):
        if self._n == len(self._data):
            self._data = np.concatenate([self._data, np.empty(len(self._data))])
        self._data[self._n] = float(value)
        self._n += 1

    def view(self):
        return self._data[: self._n]

    def __len__(self):
        return self._n


@dataclass
class GlmDecision:
    price: float
    branch: str  # init | replay | cep | perturbed
    trace_metric: float
    floor: float
    beta_hat: np.ndarray | None


class GlmPolicy:
    """Dispersion-controlled certainty-equivalent pricing.

    Call :meth:`next_price` for period ``t`` and then :meth:`observe` with the
    demand and, when reported, the claim of that period. Delayed claims are
    reported later through :meth:`observe_claim`; the log-claims GLM is fitted
    only on claims already reported.
    """

    def __init__(self, params, initial_prices=(3.0, 3.3, 4.7), L1_coeff=0.01, K=None,
                 estimate_sigma2=True, claims_scale="log"):
        if len(initial_prices) < 3:
            raise DomainError("need three initial prices")
        init = [float(p) for p in initial_prices]
        X = np.column_stack([np.ones(3), init[:3]])
        if np.linalg.matrix_rank(X) < 2:
            raise DomainError("initial price vectors must span R^2")
        if L1_coeff <= 0:
            raise DomainError("L1 coefficient must be positive")
        self.params = params
        self.initial_prices = init
        self.c = float(L1_coeff)
        self.K = default_perturbation_constant(self.c) if K is None else float(K)
        self.estimate_sigma2 = estimate_sigma2
        if claims_scale not in ("log", "level"):
            raise DomainError(f"unknown claims scale {claims_scale!r}")
        self.claims_scale = claims_scale
        self.design = DesignState()
        self.design_claims = DesignState()
        self._prices = _Buffer()
        self._demands = _Buffer()
        self._claim_prices = _Buffer()
        self._claim_responses = _Buffer()
        self.replay_ptr = 0
        self.beta_hat = None
        self.decisions = []

    @property
    def prices(self):
        return self._prices.view()

    @property
    def demands(self):
        return self._demands.view()

    @property
    def claim_prices(self):
        return self._claim_prices.view()

    @property
    def claim_responses(self):
        return self._claim_responses.view()

    # -- estimation -------------------------------------------------------
    def estimate(self):
        a = solve_mqle(self.prices, self.demands, self.params.demand_link,
                       beta0=None if self.beta_hat is None else self.beta_hat[0])
        if a is None or not self.params.claims_enabled:
            b = np.array([self.params.b0, self.params.b1]) if a is not None else None
        else:
            b = solve_mqle(self.claim_prices, self.claim_responses, self.params.claims_link,
                           beta0=None if self.beta_hat is None else self.beta_hat[1])
        if a is None or b is None:
            return None
        return np.vstack([a, b])

    def sigma2_hat(self, beta):
        if (not self.estimate_sigma2 or self.claims_scale == "level"
                or len(self.claim_responses) < 3 or not self.params.claims_enabled):
            return self.params.sigma2
        p = self.claim_prices
        resid = self.claim_responses - link_inverse(self.params.claims_link,
                                                            beta[1, 0] + beta[1, 1] * p)
        return math.sqrt(float(resid @ resid) / (len(p) - 2))

    # -- pricing ----------------------------------------------------------
    def next_price(self, t):
        s = t - 1  # observations so far
        if t <= 3:
            d = GlmDecision(self.initial_prices[t - 1], "init", self.design.trace_metric,
                            L1(max(s, 1), self.c), None)
            self.decisions.append(d)
            return d.price
        beta = self.estimate()
        self.beta_hat = beta if beta is not None else self.beta_hat
        metric = self.design.trace_metric
        floor = L1(s, self.c)
        if beta is None or metric < floor:
            price = float(self.prices[self.replay_ptr])
            self.replay_ptr += 1
            d = GlmDecision(price, "replay", metric, floor, beta)
        else:
            self.replay_ptr = 0
            d = self._branch_two(s, beta, metric, floor)
        self.decisions.append(d)
        return d.price

    def _branch_two(self, s, beta, metric, floor):
        sig2 = self.sigma2_hat(beta)
        cep = certainty_equivalent_price(beta, self.params, sig2, claims_scale=self.claims_scale)
        x = price_vector(cep)
        if two_point_metric(self.design.P, x) >= L1(s + 1, self.c):
            return GlmDecision(cep, "cep", metric, floor, beta)
        _, (_, v2) = eigen2x2(self.design.P)
        # orient v2 so that its coefficient in cep is <= 0; the step is then positive
        if v2 @ x > 0:
            v2 = -v2
        phi = perturbation_phi(s, self.c, self.K, x, v2)
        price = float(np.clip(cep + phi[1], self.params.p_low, self.params.p_high))
        return GlmDecision(price, "perturbed", metric, floor, beta)

    # -- feedback ---------------------------------------------------------
    def observe(self, price, demand, claim=None):
        self._prices.append(price)
        self._demands.append(demand)
        self.design = update_design(self.design, price)
        if claim is not None:
            self.observe_claim(price, claim)

    def observe_claim(self, price, claim):
        if self.params.claims_enabled:
            self._claim_prices.append(price)
            self.design_claims = update_design(self.design_claims, price)
            y = math.log(claim) if self.claims_scale == "log" else float(claim)
            self._claim_responses.append(y)

    def beta_error(self, true_beta=None):
        """Squared distance of (a_hat, b_hat) from the true parameters."""
        if self.beta_hat is None:
            return float("nan")
        truth = self.params.beta if true_beta is None else np.asarray(true_beta, dtype=float)
        return float(np.sum((self.beta_hat - truth) ** 2))


def glm_next_price(state, t, history=None):
    """Functional entry point: ``history`` is a sequence of (price, demand, claim)."""
    if history is not None and len(state.prices) < len(history):
        for price, demand, claim in history[len(state.prices):]:
            state.observe(price, demand, claim)
    return state.next_price(t)
