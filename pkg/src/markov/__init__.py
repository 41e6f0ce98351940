"""
Population model for the node churn chain
Stationary pmf, truncation windows and weighted sums
"""

from .population import (
    DEFAULT_TAIL_EPS,
    PopulationModel,
    TruncationWindow,
    event_rate_normalizer,
    log_stationary_pmf,
    stationary_pmf,
    stationary_pmf_array,
    truncation_window,
    weighted_range_sum,
    weighted_tail_sum,
)
