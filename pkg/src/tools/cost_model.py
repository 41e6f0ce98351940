"""
Transmission Cost Model
Closed-form expected cost per time unit for every storage scheme
"""

from dataclasses import dataclass, field
from numbers import Integral
from typing import Union

from loguru import logger

from src.codes import CodeFlavor, CodeParams, CodePoint, mbr_point, msr_point
from src.exceptions import InvalidParameterError, NoRequestsError
from src.markov import (
    DEFAULT_TAIL_EPS,
    PopulationModel,
    event_rate_normalizer,
    stationary_pmf,
    weighted_range_sum,
    weighted_tail_sum,
)

# C3 starts at state n + repair_offset; 2 is the default lower limit, 1 the n+1 variant
DEFAULT_REPAIR_OFFSET = 2

DEFAULT_NORMALIZER = "asymptotic"

COST_TERMS = ("c1", "c2", "c3", "c4", "c5", "c6")

NORMALIZERS = ("asymptotic", "exact")


@dataclass(frozen=True)
class CostOptions:
    """
    Numerical choices shared by every closed-form evaluation

    Attributes:
        repair_offset: C3 lower limit is n + repair_offset (1 or 2)
        tail_eps: Truncation tolerance of the infinite sums
        normalizer: "asymptotic" (2N*lambda) or "exact" event rate
    """

    repair_offset: int = DEFAULT_REPAIR_OFFSET
    tail_eps: float = DEFAULT_TAIL_EPS
    normalizer: str = DEFAULT_NORMALIZER

    def __post_init__(self):
        if self.repair_offset not in (1, 2):
            raise InvalidParameterError(f"repair_offset must be 1 (n+1) or 2 (n+2), got {self.repair_offset}")
        if not 0 < self.tail_eps < 1:
            raise InvalidParameterError(f"0 < tail_eps < 1 required, got {self.tail_eps}")
        if self.normalizer not in NORMALIZERS:
            raise InvalidParameterError(f"normalizer must be one of {NORMALIZERS}, got {self.normalizer!r}")

    @classmethod
    def from_settings(cls, settings: dict) -> "CostOptions":
        """Options from the markov and cost_model sections of config.yaml"""
        return cls(
            repair_offset=settings["cost_model"]["repair_offset"],
            tail_eps=settings["markov"]["tail_eps"],
            normalizer=settings["cost_model"]["normalizer"],
        )

    def as_kwargs(self) -> dict:
        return {"repair_offset": self.repair_offset, "tail_eps": self.tail_eps, "normalizer": self.normalizer}


@dataclass(frozen=True)
class SystemParams:
    """
    System environment

    Attributes:
        N: Expected number of nodes
        lam: Node departure rate (1/T)
        omega: Per-node file request rate
        R: Base-station to D2D cost ratio
        B: File size (fixed to 1)
    """

    N: float
    lam: float
    omega: float
    R: float
    B: float = 1

    def __post_init__(self):
        if not self.N > 0:
            raise InvalidParameterError(f"N > 0 required, got N={self.N}")
        if not self.lam > 0:
            raise InvalidParameterError(f"lambda > 0 required, got lambda={self.lam}")
        if not self.omega >= 0:
            raise InvalidParameterError(f"omega >= 0 required, got omega={self.omega}")
        if not self.R > 1:
            raise InvalidParameterError(f"R > 1 required, got R={self.R}")
        if self.B != 1:
            raise InvalidParameterError(f"B = 1 required, got B={self.B}")

    @classmethod
    def from_popularity(cls, N: float, p: float, R: float, lam: float = 1.0) -> "SystemParams":
        """Build parameters from the popularity p = omega / lambda"""
        return cls(N=N, lam=lam, omega=p * lam, R=R)

    @property
    def p(self) -> float:
        """Expected number of requests per node sojourn"""
        return self.omega / self.lam

    @property
    def population(self) -> PopulationModel:
        return PopulationModel(expected_nodes=self.N, departure_rate=self.lam)


# ----- storage schemes -------------------------------------------------------

@dataclass(frozen=True)
class SimpleCaching:
    label: str = field(default="simple-caching", init=False)


@dataclass(frozen=True)
class BaseStationOnly:
    label: str = field(default="base-station-only", init=False)


@dataclass(frozen=True)
class Mbr:
    code: CodeParams
    label: str = field(default="mbr", init=False)

    def __post_init__(self):
        if self.code.k < 2:
            raise InvalidParameterError("MBR scheme requires k >= 2 (k = 1 is replication)")


@dataclass(frozen=True)
class Msr:
    code: CodeParams
    label: str = field(default="msr", init=False)

    def __post_init__(self):
        if self.code.k < 2:
            raise InvalidParameterError("MSR scheme requires k >= 2 (k = 1 is replication)")


@dataclass(frozen=True)
class Replication:
    n: int
    label: str = field(default="replication", init=False)

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, Integral) or self.n < 1:
            raise InvalidParameterError(f"replication requires an integer n >= 1, got n={self.n!r}")
        object.__setattr__(self, "n", int(self.n))


Scheme = Union[SimpleCaching, Mbr, Msr, Replication, BaseStationOnly]


@dataclass(frozen=True)
class CostBreakdown:
    """Six cost rates of a coded scheme; total is their sum"""

    c1: float  # allocation
    c2: float  # redundancy creation
    c3: float  # repair
    c4: float  # remote retrieval
    c5: float  # reconstruction by storage nodes
    c6: float  # reconstruction with many nodes

    def __post_init__(self):
        for name in COST_TERMS:
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"cost term {name} must be nonnegative")

    @property
    def total(self) -> float:
        return self.c1 + self.c2 + self.c3 + self.c4 + self.c5 + self.c6

    def as_dict(self) -> dict:
        terms = {name: getattr(self, name) for name in COST_TERMS}
        terms["total"] = self.total
        return terms


# ----- closed forms ----------------------------------------------------------

def cost_simple_caching(params: SystemParams) -> float:
    """
    Simple caching: one node caches the file, the next requester refetches it after a loss

    C_sc = ((N-1)omega + R*lambda) / (1 + lambda / (N*omega))
    """
    if params.omega == 0:
        raise NoRequestsError("no requests: cost is 0 by convention")

    N, lam, omega, R = params.N, params.lam, params.omega, params.R
    return ((N - 1) * omega + R * lam) / (1 + lam / (N * omega))


def cost_base_station_only(params: SystemParams) -> float:
    """Every request is served by the base station: R*N*omega"""
    return params.R * params.N * params.omega


def _six_terms(params: SystemParams, n: int, k: int, d: int, alpha: float, gamma: float,
               repair_offset: int, tail_eps: float, normalizer: str = DEFAULT_NORMALIZER) -> CostBreakdown:
    model = params.population
    N, omega, R = params.N, params.omega, params.R
    rate = event_rate_normalizer(model, normalizer, tail_eps=tail_eps)

    def arrival_share(i):
        return N / (i + N)

    c1 = rate * stationary_pmf(model, k - 1) * (N / (k - 1 + N)) * R * k * alpha
    c2 = rate * (
        weighted_range_sum(model, k, d - 1, arrival_share) * k * alpha
        + weighted_range_sum(model, d, n - 1, arrival_share) * gamma
    )
    c3 = rate * weighted_tail_sum(model, n + repair_offset, lambda i: n * gamma / (i + N), tail_eps=tail_eps)
    c4 = weighted_range_sum(model, 1, k - 1, lambda i: i * omega * R)
    c5 = weighted_range_sum(model, k, n, lambda i: i * omega * (k - 1) * alpha)
    c6 = weighted_tail_sum(model, n + 1, lambda i: (k * i - n) * alpha * omega, tail_eps=tail_eps)

    return CostBreakdown(c1=c1, c2=c2, c3=c3, c4=c4, c5=c5, c6=c6)


def _check_repair_offset(repair_offset: int):
    if repair_offset not in (1, 2):
        raise InvalidParameterError(f"repair_offset must be 1 (n+1) or 2 (n+2), got {repair_offset}")


def cost_regenerating(params: SystemParams,
                      code: CodeParams,
                      point: CodePoint,
                      *,
                      repair_offset: int = DEFAULT_REPAIR_OFFSET,
                      tail_eps: float = DEFAULT_TAIL_EPS,
                      normalizer: str = DEFAULT_NORMALIZER) -> CostBreakdown:
    """
    Expected cost rate of a regenerating code, split into its six terms

    Args:
        params: System parameters
        code: (n, k, d) code parameters
        point: alpha/gamma derived from code (MBR or MSR)
        repair_offset: C3 lower limit is n + repair_offset
        tail_eps: Truncation tolerance of the infinite sums
        normalizer: "asymptotic" (2N*lambda) or "exact" event rate

    Returns:
        CostBreakdown
    """
    _check_repair_offset(repair_offset)
    breakdown = _six_terms(params, code.n, code.k, code.d, float(point.alpha), float(point.gamma),
                           repair_offset, tail_eps, normalizer)
    logger.debug(f"{point.flavor.value} {code} p={params.p:.4g}: total={breakdown.total:.6g}")
    return breakdown


def cost_replication(params: SystemParams,
                     n: int,
                     *,
                     repair_offset: int = DEFAULT_REPAIR_OFFSET,
                     tail_eps: float = DEFAULT_TAIL_EPS,
                     normalizer: str = DEFAULT_NORMALIZER) -> CostBreakdown:
    """
    Replication on n nodes: the regenerating cost with k = alpha = gamma = 1

    The repair degree plays no role; n - 1 is used as placeholder.
    """
    _check_repair_offset(repair_offset)
    if isinstance(n, bool) or not isinstance(n, Integral) or n < 1:
        raise InvalidParameterError(f"replication requires an integer n >= 1, got n={n!r}")
    n = int(n)

    return _six_terms(params, n, 1, max(n - 1, 1), 1.0, 1.0, repair_offset, tail_eps, normalizer)


def asymptotic_regenerating_cost(params: SystemParams, code: CodeParams, point: CodePoint) -> float:
    """
    Large-N approximation (N >> n): only repairs and many-node reconstructions remain

    lambda * n * gamma + omega * alpha * (k*N - n)
    """
    alpha, gamma = float(point.alpha), float(point.gamma)
    return params.lam * code.n * gamma + params.omega * alpha * (code.k * params.N - code.n)


def scheme_cost(params: SystemParams,
                scheme: Scheme,
                *,
                repair_offset: int = DEFAULT_REPAIR_OFFSET,
                tail_eps: float = DEFAULT_TAIL_EPS,
                normalizer: str = DEFAULT_NORMALIZER) -> float:
    """Total expected cost rate of any scheme"""
    if isinstance(scheme, SimpleCaching):
        return cost_simple_caching(params) if params.omega > 0 else 0.0
    if isinstance(scheme, BaseStationOnly):
        return cost_base_station_only(params)
    if isinstance(scheme, Replication):
        return cost_replication(params, scheme.n, repair_offset=repair_offset, tail_eps=tail_eps,
                                normalizer=normalizer).total
    if isinstance(scheme, (Mbr, Msr)):
        return scheme_breakdown(params, scheme, repair_offset=repair_offset, tail_eps=tail_eps,
                                normalizer=normalizer).total
    raise InvalidParameterError(f"unknown scheme {scheme!r}")


def scheme_breakdown(params: SystemParams,
                     scheme: Scheme,
                     *,
                     repair_offset: int = DEFAULT_REPAIR_OFFSET,
                     tail_eps: float = DEFAULT_TAIL_EPS,
                     normalizer: str = DEFAULT_NORMALIZER) -> CostBreakdown:
    """Six-term breakdown for the coded schemes (MBR, MSR, replication)"""
    if isinstance(scheme, Replication):
        return cost_replication(params, scheme.n, repair_offset=repair_offset, tail_eps=tail_eps,
                                normalizer=normalizer)
    if isinstance(scheme, (Mbr, Msr)):
        point = scheme_point(scheme, params.B)
        return cost_regenerating(params, scheme.code, point, repair_offset=repair_offset, tail_eps=tail_eps,
                                 normalizer=normalizer)
    raise InvalidParameterError(f"scheme {scheme.label} has no six-term breakdown")


def scheme_point(scheme: Scheme, B=1) -> CodePoint:
    """CodePoint stored by a coded scheme (replication is the k = 1 MBR point)"""
    if isinstance(scheme, Mbr):
        return mbr_point(B, scheme.code)
    if isinstance(scheme, Msr):
        return msr_point(B, scheme.code)
    if isinstance(scheme, Replication):
        return CodePoint(alpha=1, gamma=1, flavor=CodeFlavor.MBR)
    raise InvalidParameterError(f"scheme {scheme.label} stores no coded blocks")


def relative_cost(cost: float, params: SystemParams) -> float:
    """Cost relative to simple caching under the same parameters"""
    return cost / cost_simple_caching(params)
