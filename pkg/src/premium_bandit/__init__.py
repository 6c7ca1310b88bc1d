"""Adaptive insurance pricing: GLM and Gaussian-process bandit policies, with delayed claims."""

from .config import ConfigError, RunConfig, parse_config
from .delay import DelayLedger, LedgerStateError, effective_delays
from .glm import (DesignState, GlmPolicy, SingularDesignError, certainty_equivalent_price,
                  eigen2x2, glm_next_price, perturbation_phi, solve_mqle, trace_inv_metric,
                  update_design)
from .gp import (GpPosterior, GpPricingState, KernelKind, KernelSpec, SampledTruthEnv,
                 delayed_gp_round, gp_pricing_round, gp_update, information_gain, kernel_eval,
                 revenue_posterior, ucb_select, varphi)
from .harness import (RegretTrace, ReplicationError, export_csv, oracle_optimal_price,
                      run_experiment, run_replications)
from .market import (DelayConfig, DomainError, Link, MarketEnv, MarketParams, Observation,
                     expected_revenue, sample_demand, sample_total_claims, step)

__version__ = "0.1.0"
