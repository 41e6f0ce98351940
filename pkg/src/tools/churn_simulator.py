"""
Churn Simulator
Continuous-time Monte Carlo of node churn, file requests, allocation, redundancy and repair
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.stats import t as student_t

from src.codes import CodeParams, CodePoint, validate_against_population
from src.exceptions import InvalidParameterError, UnderSampledError
from src.markov import PopulationModel, stationary_pmf_array
from src.tools.cost_model import (
    BaseStationOnly,
    CostOptions,
    Mbr,
    Msr,
    Replication,
    Scheme,
    SimpleCaching,
    SystemParams,
    cost_base_station_only,
    cost_simple_caching,
    scheme_breakdown,
    scheme_point,
)

CATEGORIES = (
    "allocation",
    "redundancy",
    "repair",
    "remote_retrieval",
    "reconstruction_storage",
    "reconstruction_nonstorage",
    "d2d_retrieval",
)

# cost category -> analytic term of the six-term model
CATEGORY_TERMS = {
    "allocation": "c1",
    "redundancy": "c2",
    "repair": "c3",
    "remote_retrieval": "c4",
    "reconstruction_storage": "c5",
    "reconstruction_nonstorage": "c6",
}

DRAW_BLOCK = 65536


@dataclass(frozen=True)
class SimPolicy:
    """
    Modelling switches of a simulation run

    Attributes:
        repair_from: Lowest state ("n+1" or "n+2") whose storage departures are repaired
        state_coupling: "deterministic" keeps b = min(i, n); "strict" tracks blocks honestly
        start: "warm" draws the initial state from the stationary law, "cold" starts empty
    """

    repair_from: Literal["n+1", "n+2"] = "n+2"
    state_coupling: Literal["deterministic", "strict"] = "deterministic"
    start: Literal["warm", "cold"] = "warm"

    def __post_init__(self):
        if self.repair_from not in ("n+1", "n+2"):
            raise InvalidParameterError(f"repair_from must be 'n+1' or 'n+2', got {self.repair_from!r}")
        if self.state_coupling not in ("deterministic", "strict"):
            raise InvalidParameterError(f"state_coupling must be 'deterministic' or 'strict', got {self.state_coupling!r}")
        if self.start not in ("warm", "cold"):
            raise InvalidParameterError(f"start must be 'warm' or 'cold', got {self.start!r}")

    @property
    def repair_offset(self) -> int:
        return 1 if self.repair_from == "n+1" else 2


@dataclass(frozen=True)
class SimConfig:
    """
    One simulation run; exactly one of max_events / max_time bounds the horizon
    """

    params: SystemParams
    scheme: Scheme
    seed: int = 0
    max_events: Optional[int] = None
    max_time: Optional[float] = None
    policy: SimPolicy = field(default_factory=SimPolicy)
    batch_count: int = 10
    min_events_per_batch: int = 10

    def __post_init__(self):
        if (self.max_events is None) == (self.max_time is None):
            raise InvalidParameterError("exactly one of max_events and max_time must be set")
        if self.max_events is not None and self.max_events < 0:
            raise InvalidParameterError(f"max_events >= 0 required, got {self.max_events}")
        if self.max_time is not None and not self.max_time >= 0:
            raise InvalidParameterError(f"max_time >= 0 required, got {self.max_time}")
        if self.batch_count < 10:
            raise InvalidParameterError(f"batch_count >= 10 required, got {self.batch_count}")
        if self.min_events_per_batch < 1:
            raise InvalidParameterError("min_events_per_batch >= 1 required")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def min_events(self) -> int:
        return self.batch_count * self.min_events_per_batch


@dataclass(frozen=True)
class StoragePlan:
    """Block layout rules of a coded scheme: n storage nodes, degrees k and d, alpha and gamma"""

    n: int
    k: int
    d: int
    alpha: float
    gamma: float

    @classmethod
    def from_code(cls, code: CodeParams, point: CodePoint) -> "StoragePlan":
        return cls(n=code.n, k=code.k, d=code.d, alpha=float(point.alpha), gamma=float(point.gamma))

    @classmethod
    def from_scheme(cls, scheme: Scheme) -> "StoragePlan":
        point = scheme_point(scheme)
        if isinstance(scheme, Replication):
            return cls(n=scheme.n, k=1, d=max(scheme.n - 1, 1), alpha=float(point.alpha), gamma=float(point.gamma))
        return cls.from_code(scheme.code, point)


@dataclass(frozen=True)
class SimReport:
    """Outcome of one simulation run"""

    elapsed_sim_time: float
    total_cost: float
    cost_by_category: Dict[str, float]
    event_counts: Dict[str, int]
    transitions: Dict[str, int]
    mean_cost_rate: Optional[float]
    ci_halfwidth_95: Optional[float]
    drift_diagnostic: Optional[float]
    state_occupancy: Dict[int, float]
    batch_rates: Tuple[float, ...]

    @property
    def is_empty(self) -> bool:
        return self.mean_cost_rate is None

    def category_rate(self, category: str) -> float:
        return self.cost_by_category[category] / self.elapsed_sim_time

    @classmethod
    def empty(cls) -> "SimReport":
        return cls(
            elapsed_sim_time=0.0,
            total_cost=0.0,
            cost_by_category={c: 0.0 for c in CATEGORIES},
            event_counts={c: 0 for c in CATEGORIES},
            transitions={"arrival": 0, "departure": 0, "request": 0},
            mean_cost_rate=None,
            ci_halfwidth_95=None,
            drift_diagnostic=None,
            state_occupancy={},
            batch_rates=(),
        )


@dataclass(frozen=True)
class Comparison:
    """Analytic cost rate against the simulated one"""

    scheme: str
    analytic_rate: float
    empirical_rate: Optional[float]
    relative_error: Optional[float]
    ci_halfwidth_95: Optional[float]
    inside_ci: Optional[bool]
    terms: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)
    report: Optional[SimReport] = None


# ----- per-scheme event rules ------------------------------------------------

class _StorageRules:
    """Event effects of a scheme; every handler returns (category, cost) or None"""

    strict = False

    def start(self, i: int, u: float):
        pass

    def on_arrival(self, i: int, v: float):
        return None

    def on_departure(self, i: int, v: float):
        return None

    def on_request(self, i: int, v: float):
        return None

    def drifted(self, i: int) -> bool:
        return False


class _BaseStationRules(_StorageRules):

    def __init__(self, R: float):
        self.R = R

    def on_request(self, i, v):
        return "remote_retrieval", self.R


class _SimpleCachingRules(_StorageRules):
    """One designated cacher; after it leaves the next requester refetches from the base station"""

    def __init__(self, params: SystemParams):
        self.R = params.R
        total_request_rate = params.N * params.omega
        self.present_share = total_request_rate / (total_request_rate + params.lam)
        self.cacher_present = False

    def start(self, i, u):
        self.cacher_present = i > 0 and u < self.present_share

    def on_departure(self, i, v):
        if self.cacher_present and v * i < 1.0:
            self.cacher_present = False
        return None

    def on_request(self, i, v):
        if not self.cacher_present:
            self.cacher_present = True
            return "remote_retrieval", self.R
        if v * i < 1.0:
            return None  # the cacher itself
        return "d2d_retrieval", 1.0


class _CoupledRules(_StorageRules):
    """Stored-block count tied to the population: b = min(i, n) when i >= k, else 0"""

    def __init__(self, plan: StoragePlan, R: float, repair_offset: int):
        self.plan = plan
        self.R = R
        self.repair_state = plan.n + repair_offset
        self.allocation_cost = R * plan.k * plan.alpha
        self.full_reconstruction = plan.k * plan.alpha
        self.partial_reconstruction = (plan.k - 1) * plan.alpha

    def on_arrival(self, i, v):
        plan = self.plan
        if i == plan.k - 1:
            return "allocation", self.allocation_cost
        if plan.k <= i <= plan.d - 1:
            return "redundancy", self.full_reconstruction
        if plan.d <= i <= plan.n - 1:
            return "redundancy", plan.gamma
        return None

    def on_departure(self, i, v):
        if i >= self.repair_state and v * i < self.plan.n:
            return "repair", self.plan.gamma
        return None

    def on_request(self, i, v):
        plan = self.plan
        if i <= plan.k - 1:
            return "remote_retrieval", self.R
        if i <= plan.n:
            return "reconstruction_storage", self.partial_reconstruction
        if v * i < plan.n:
            return "reconstruction_nonstorage", self.partial_reconstruction
        return "reconstruction_nonstorage", self.full_reconstruction


class _StrictRules(_CoupledRules):
    """Stored-block count b evolves from the events alone; blocks survive when i < k"""

    strict = True

    def __init__(self, plan: StoragePlan, R: float):
        super().__init__(plan, R, repair_offset=1)
        self.blocks = 0

    def coupled(self, i: int) -> int:
        return min(i, self.plan.n) if i >= self.plan.k else 0

    def start(self, i, u):
        self.blocks = self.coupled(i)

    def _creation_cost(self) -> float:
        return self.full_reconstruction if self.blocks < self.plan.d else self.plan.gamma

    def on_arrival(self, i, v):
        plan, b = self.plan, self.blocks
        if b < plan.k:
            if i + 1 >= plan.k:
                self.blocks = plan.k
                return "allocation", self.R * (plan.k - b) * plan.alpha
            return None
        if b < plan.n:
            cost = self._creation_cost()
            self.blocks += 1
            return "redundancy", cost
        return None

    def on_departure(self, i, v):
        if v * i >= self.blocks:
            return None
        self.blocks -= 1
        if self.blocks >= self.plan.k and i - 1 > self.blocks:
            cost = self._creation_cost()
            self.blocks += 1
            return "repair", cost
        return None

    def on_request(self, i, v):
        plan = self.plan
        if self.blocks < plan.k:
            return "remote_retrieval", self.R
        category = "reconstruction_storage" if i <= plan.n else "reconstruction_nonstorage"
        if v * i < self.blocks:
            return category, self.partial_reconstruction
        return category, self.full_reconstruction

    def drifted(self, i):
        return self.blocks != self.coupled(i)


# ----- simulator -------------------------------------------------------------

class ChurnSimulator:
    """
    Exponential-race event loop over the node population

    In state i the next event is an arrival (rate N*lambda), a departure of a
    uniformly chosen node (rate i*lambda) or a request by a uniformly chosen
    node (rate i*omega).
    """

    def __init__(self, config: SimConfig, plan: Optional[StoragePlan] = None, draw_block: int = DRAW_BLOCK):
        """
        Initialize the simulator

        Args:
            config: Run configuration
            plan: Block layout overriding the one derived from config.scheme
            draw_block: Number of random draws generated per refill
        """
        self.config = config
        self.params = config.params
        self.draw_block = draw_block
        self.rules = self._build_rules(plan)

    def _build_rules(self, plan: Optional[StoragePlan]) -> _StorageRules:
        scheme, params, policy = self.config.scheme, self.params, self.config.policy
        if isinstance(scheme, BaseStationOnly):
            return _BaseStationRules(params.R)
        if isinstance(scheme, SimpleCaching):
            return _SimpleCachingRules(params)
        if isinstance(scheme, (Mbr, Msr, Replication)):
            plan = plan or StoragePlan.from_scheme(scheme)
            if policy.state_coupling == "strict":
                return _StrictRules(plan, params.R)
            return _CoupledRules(plan, params.R, policy.repair_offset)
        raise InvalidParameterError(f"unknown scheme {scheme!r}")

    def run(self) -> SimReport:
        """
        Run the event loop up to the configured horizon

        Returns:
            SimReport (empty when the horizon is zero)
        """
        config = self.config
        by_events = config.max_events is not None
        horizon = config.max_events if by_events else config.max_time
        if horizon == 0:
            return SimReport.empty()
        if by_events and horizon < config.min_events:
            raise UnderSampledError(
                f"{horizon} events cannot form {config.batch_count} batches of "
                f"{config.min_events_per_batch} events (need at least {config.min_events})"
            )

        params, rules = self.params, self.rules
        rng = np.random.default_rng(config.seed)
        arrival_rate = params.N * params.lam
        lam, omega = params.lam, params.omega
        batch_count = config.batch_count
        batch_width = None if by_events else horizon / batch_count

        if config.policy.start == "warm":
            i = int(rng.poisson(params.N))
        else:
            i = 0
        rules.start(i, float(rng.random()))

        cost_by_category = dict.fromkeys(CATEGORIES, 0.0)
        event_counts = dict.fromkeys(CATEGORIES, 0)
        transitions = {"arrival": 0, "departure": 0, "request": 0}
        batch_cost = [0.0] * batch_count
        batch_time = [0.0] * batch_count
        occupancy: Dict[int, float] = {}
        drift_time = 0.0
        strict = rules.strict

        t = 0.0
        events = 0
        pos = self.draw_block
        exps = uniforms = targets = None

        while True:
            if by_events and events >= horizon:
                break
            if pos == self.draw_block:
                exps = rng.standard_exponential(self.draw_block).tolist()
                uniforms = rng.random(self.draw_block).tolist()
                targets = rng.random(self.draw_block).tolist()
                pos = 0
            total_rate = arrival_rate + i * (lam + omega)
            dt = exps[pos] / total_rate
            x = uniforms[pos] * total_rate
            v = targets[pos]
            pos += 1

            if not by_events and t + dt >= horizon:
                dt = horizon - t
                occupancy[i] = occupancy.get(i, 0.0) + dt
                if strict and rules.drifted(i):
                    drift_time += dt
                t = horizon
                break

            occupancy[i] = occupancy.get(i, 0.0) + dt
            if strict and rules.drifted(i):
                drift_time += dt
            t += dt

            if x < arrival_rate:
                outcome = rules.on_arrival(i, v)
                i += 1
                transitions["arrival"] += 1
            elif x < arrival_rate + i * lam:
                outcome = rules.on_departure(i, v)
                i -= 1
                transitions["departure"] += 1
            else:
                outcome = rules.on_request(i, v)
                transitions["request"] += 1

            if by_events:
                batch = events * batch_count // horizon
                batch_time[batch] += dt
            else:
                batch = min(int(t / batch_width), batch_count - 1)

            if outcome is not None:
                category, cost = outcome
                cost_by_category[category] += cost
                event_counts[category] += 1
                batch_cost[batch] += cost
            events += 1

        if events < config.min_events:
            raise UnderSampledError(
                f"only {events} events in simulated time {horizon:g}; "
                f"{config.batch_count} batches need at least {config.min_events}"
            )
        if not by_events:
            batch_time = [batch_width] * batch_count

        total_cost = 0.0
        for category in CATEGORIES:
            total_cost += cost_by_category[category]

        rates = np.asarray(batch_cost) / np.asarray(batch_time)
        halfwidth = float(student_t.ppf(0.975, batch_count - 1) * rates.std(ddof=1) / math.sqrt(batch_count))

        report = SimReport(
            elapsed_sim_time=t,
            total_cost=total_cost,
            cost_by_category=cost_by_category,
            event_counts=event_counts,
            transitions=transitions,
            mean_cost_rate=total_cost / t,
            ci_halfwidth_95=halfwidth,
            drift_diagnostic=drift_time / t if strict else None,
            state_occupancy={state: occupancy[state] / t for state in sorted(occupancy)},
            batch_rates=tuple(float(r) for r in rates),
        )
        logger.info(
            f"🔄 simulated {events} events of {config.scheme.label} over t={t:.6g}: "
            f"rate {report.mean_cost_rate:.6g} ± {halfwidth:.3g}"
        )
        return report


def simulate(config: SimConfig) -> SimReport:
    """Run one simulation"""
    return ChurnSimulator(config).run()


def analytic_rate(config: SimConfig, options: Optional[CostOptions] = None) -> Tuple[float, Dict[str, float]]:
    """
    Closed-form total and per-category rates matching a simulation config

    The repair offset always follows the simulation policy; tail_eps and the
    normalizer come from options.
    """
    params, scheme = config.params, config.scheme
    if isinstance(scheme, SimpleCaching):
        return (cost_simple_caching(params) if params.omega > 0 else 0.0), {}
    if isinstance(scheme, BaseStationOnly):
        total = cost_base_station_only(params)
        return total, {"remote_retrieval": total}
    options = replace(options or CostOptions(), repair_offset=config.policy.repair_offset)
    breakdown = scheme_breakdown(params, scheme, **options.as_kwargs())
    terms = {category: getattr(breakdown, term) for category, term in CATEGORY_TERMS.items()}
    return breakdown.total, terms


def compare_to_analytic(config: SimConfig,
                        draw_block: int = DRAW_BLOCK,
                        options: Optional[CostOptions] = None) -> Comparison:
    """
    Simulate and set the empirical cost rate against the closed form

    Returns:
        Comparison with relative error, CI membership and per-category pairs
    """
    analytic, analytic_terms = analytic_rate(config, options)
    report = ChurnSimulator(config, draw_block=draw_block).run()
    scheme = config.scheme
    flags: List[str] = []

    if isinstance(scheme, (Mbr, Msr)):
        flags.extend(validate_against_population(scheme.code, config.params.N))
    if isinstance(scheme, SimpleCaching) and config.params.N < 100:
        flags.append("small N: the simple-caching closed form is a renewal approximation, expect bias")

    if report.is_empty:
        return Comparison(scheme=scheme.label, analytic_rate=analytic, empirical_rate=None,
                          relative_error=None, ci_halfwidth_95=None, inside_ci=None, flags=flags, report=report)

    empirical = report.mean_cost_rate
    relative_error = abs(empirical - analytic) / analytic if analytic > 0 else abs(empirical)
    inside = abs(empirical - analytic) <= report.ci_halfwidth_95
    if not inside:
        flags.append("analytic value lies outside the 95% confidence interval")

    terms = {
        category: (value, report.category_rate(category))
        for category, value in analytic_terms.items()
    }
    logger.info(f"📊 {scheme.label}: analytic {analytic:.6g}, simulated {empirical:.6g} "
                f"(relative error {relative_error:.3%})")
    return Comparison(scheme=scheme.label, analytic_rate=analytic, empirical_rate=empirical,
                      relative_error=relative_error, ci_halfwidth_95=report.ci_halfwidth_95,
                      inside_ci=inside, terms=terms, flags=flags, report=report)


def occupancy_tv_distance(report: SimReport, model: PopulationModel) -> float:
    """Total-variation distance between the simulated state occupancy and the Poisson pmf"""
    if not report.state_occupancy:
        raise InvalidParameterError("empty report has no state occupancy")
    states = np.fromiter(report.state_occupancy.keys(), dtype=int)
    empirical = np.fromiter(report.state_occupancy.values(), dtype=float)
    pmf = stationary_pmf_array(model, states)
    unobserved_mass = max(0.0, 1.0 - float(pmf.sum()))
    return 0.5 * (float(np.abs(empirical - pmf).sum()) + unobserved_mass)
