"""
Pricing against a market drawn from Gaussian processes
=======================================================

Demand and claims curves are random draws from Matern GPs. The policy keeps
one posterior per curve and picks the price with the largest upper confidence
bound on revenue p * f_d(p) - f_c(p).
"""

import numpy as np

from premium_bandit import (GpPricingState, KernelSpec, SampledTruthEnv, gp_pricing_round,
                            oracle_optimal_price)

env = SampledTruthEnv(seed=3)
p_star, r_star = oracle_optimal_price(env)
print(f"sampled market: optimal price {p_star:.3f}, revenue {r_star:.3f}")

state = GpPricingState.create(0.5, 10.0, KernelSpec("matern_3_2"), KernelSpec("matern_5_2"),
                              0.05, 0.05, delta=0.1)
regret = []
for t in range(1, 101):
    price, obs, state = gp_pricing_round(state, env, t)
    regret.append(r_star - env.expected_revenue(price))
    if t in (1, 2, 5, 10, 25, 50, 100):
        print(f"t={t:3d}  price {price:6.3f}  regret {regret[-1]:8.4f}")

regret = np.array(regret)
print(f"mean regret, first 20 periods {regret[:20].mean():.3f}; "
      f"last 20 periods {regret[-20:].mean():.4f}")

# the posterior mean of revenue next to the truth at a few prices
q = np.array([1.0, 3.0, p_star, 7.0, 9.5])
md, _ = state.post_d.predict(q)
mc, _ = state.post_c.predict(q)
for x, est in zip(q, q * md - mc):
    print(f"p={x:5.2f}  estimated {est:8.3f}  true {env.expected_revenue(float(x)):8.3f}")
