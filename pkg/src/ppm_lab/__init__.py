"""Posted-price mechanisms for prophet-style markets, with offline benchmarks
and a seeded simulation harness."""

from .bounds import (
    BoundReport,
    exp_static_best,
    exp_static_welfare,
    mdp_bound_check,
    ratio_trend_fit,
    static_case_check,
)
from .distributions import (
    DomainError,
    Exponential,
    OrderStatsTable,
    Uniform,
    Weibull,
    check_babaioff_ratio,
    check_quantile_maximum,
    check_quantiles1,
    check_quantiles2,
    hazard_monotone_check,
    max_expectation,
    order_stat_mean,
    parse_distribution,
    quantile,
)
from .fixed_point import FixedPointError, purchase_probabilities, solve_dynamic_prices
from .market import (
    AdditiveIndependent,
    IndependentUnitDemand,
    Separable,
    ValidationError,
    best_response,
    pad_to_square,
    parse_model,
    sample_profile,
)
from .mechanisms import MECHANISM_IDS, make_mechanism, static_single_price
from .oracle import max_weight_matching, separable_optimum
from .pricing import ConfigurationError, vcg_separable, virtual_value
from .simulation import SimulationSummary, allocation_frequency_audit, run_trials, sweep

__version__ = "0.1.0"
