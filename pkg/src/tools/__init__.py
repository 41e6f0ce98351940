"""
Cost tools for D2DRegen
Contains the closed-form cost model, the churn simulator and the scheme planner
"""

from .cost_model import (
    BaseStationOnly,
    CostBreakdown,
    CostOptions,
    Mbr,
    Msr,
    Replication,
    Scheme,
    SimpleCaching,
    SystemParams,
    asymptotic_regenerating_cost,
    cost_base_station_only,
    cost_regenerating,
    cost_replication,
    cost_simple_caching,
    relative_cost,
    scheme_breakdown,
    scheme_cost,
)
from .churn_simulator import (
    ChurnSimulator,
    Comparison,
    SimConfig,
    SimPolicy,
    SimReport,
    StoragePlan,
    compare_to_analytic,
    occupancy_tv_distance,
    simulate,
)
from .planner import (
    Crossing,
    DesignSpace,
    MethodPlanner,
    SchemeKind,
    SearchSettings,
    ThresholdResult,
    best_k,
    best_method,
    cost_by_k,
    fit_log_threshold,
    sweep_p,
    threshold,
    threshold_result,
    threshold_surface,
)
