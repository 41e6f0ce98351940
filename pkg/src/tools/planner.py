"""
Scheme Planner
Optimal reconstruction degree, cheapest scheme, popularity sweeps and switching thresholds
"""

import math
from dataclasses import dataclass
from enum import Enum
from numbers import Integral
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from loguru import logger
from scipy.optimize import bisect

from src.codes import CodeFlavor, CodeParams, code_point
from src.exceptions import InvalidParameterError
from src.experiments.settings import load_settings
from src.tools.cost_model import (
    CostOptions,
    Mbr,
    Msr,
    Replication,
    Scheme,
    SimpleCaching,
    SystemParams,
    cost_regenerating,
    cost_replication,
    scheme_cost,
)

SWEEP_COLUMNS = ["p", "cost_sc", "cost_mbr_best", "k_mbr", "cost_msr_best", "k_msr", "cost_rep", "best_scheme"]
SURFACE_COLUMNS = [
    "R", "N", "p1", "p2", "p3",
    "p1_crossings", "p2_crossings", "p3_crossings",
    "p1_below_domain", "p2_below_domain", "p3_below_domain",
]

# largest expected node count the truncated sums are validated for
MAX_SUPPORTED_N = 1e5


class SchemeKind(str, Enum):
    SIMPLE_CACHING = "simple-caching"
    MBR = "mbr"
    MSR = "msr"
    REPLICATION = "replication"


@dataclass(frozen=True)
class DesignSpace:
    """
    Code parameters explored by the planner

    Attributes:
        n: Number of storage nodes
        d: Repair degree
        k_range: Candidate reconstruction degrees, a subset of [2, d]
    """

    n: int = 30
    d: int = 10
    k_range: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if not 2 <= self.d <= self.n - 1:
            raise InvalidParameterError(f"2 <= d <= n-1 required, got n={self.n}, d={self.d}")
        if self.k_range is None:
            object.__setattr__(self, "k_range", tuple(range(2, self.d + 1)))
        else:
            if not all(isinstance(k, Integral) and not isinstance(k, bool) for k in self.k_range):
                raise InvalidParameterError(f"k_range must hold integers, got {self.k_range}")
            object.__setattr__(self, "k_range", tuple(sorted({int(k) for k in self.k_range})))
        if not self.k_range or not all(2 <= k <= self.d for k in self.k_range):
            raise InvalidParameterError(f"k_range must be a nonempty subset of [2, {self.d}], got {self.k_range}")

    def code(self, k: int) -> CodeParams:
        return CodeParams(n=self.n, k=k, d=self.d)


@dataclass(frozen=True)
class SearchSettings:
    """Threshold search domain and accuracy"""

    p_min: float = 1e-6
    p_max: float = 1e2
    scan_points: int = 64
    log_xtol: float = 1e-10
    options: CostOptions = CostOptions()

    def __post_init__(self):
        if not 0 < self.p_min < self.p_max:
            raise InvalidParameterError(f"0 < p_min < p_max required, got [{self.p_min}, {self.p_max}]")
        if self.scan_points < 2:
            raise InvalidParameterError("scan_points >= 2 required")


@dataclass(frozen=True)
class Crossing:
    """
    Switching threshold between two schemes

    Attributes:
        p: Smallest popularity where the second scheme takes over, None when it
            never does inside the search domain
        crossing_count: Sign changes of the cost difference seen by the scan
        multiple: More than one sign change was seen
        below_domain: The second scheme is already cheaper at p_min
    """

    p: Optional[float]
    crossing_count: int
    multiple: bool
    below_domain: bool = False

    @property
    def found(self) -> bool:
        return self.p is not None


@dataclass(frozen=True)
class ThresholdResult:
    p1: Crossing  # simple caching -> MBR
    p2: Crossing  # MBR -> MSR
    p3: Crossing  # MSR -> replication



# ----- scheme selection ------------------------------------------------------

def best_k(params: SystemParams,
           space: DesignSpace,
           flavor: CodeFlavor,
           *,
           options: CostOptions = CostOptions()) -> Tuple[int, float]:
    """
    Exhaustive search for the cheapest reconstruction degree at fixed n and d

    Ties go to the smaller k (fewer simultaneous D2D links).

    Returns:
        (k, total cost)
    """
    best: Optional[Tuple[int, float]] = None
    for k in space.k_range:
        code = space.code(k)
        cost = cost_regenerating(params, code, code_point(flavor, params.B, code), **options.as_kwargs()).total
        if best is None or cost < best[1]:
            best = (k, cost)
    return best


def _candidates(params: SystemParams, space: DesignSpace, options: CostOptions) -> List[Tuple[Scheme, float]]:
    k_mbr, cost_mbr = best_k(params, space, CodeFlavor.MBR, options=options)
    k_msr, cost_msr = best_k(params, space, CodeFlavor.MSR, options=options)
    return [
        (SimpleCaching(), scheme_cost(params, SimpleCaching())),
        (Mbr(space.code(k_mbr)), cost_mbr),
        (Msr(space.code(k_msr)), cost_msr),
        (Replication(space.n), cost_replication(params, space.n, **options.as_kwargs()).total),
    ]


def _cheapest(candidates: Sequence[Tuple[Scheme, float]]) -> Tuple[Scheme, float]:
    best = candidates[0]
    for candidate in candidates[1:]:
        if candidate[1] < best[1]:
            best = candidate
    return best


def best_method(params: SystemParams,
                space: DesignSpace,
                *,
                options: CostOptions = CostOptions()) -> Tuple[Scheme, float]:
    """
    Cheapest of simple caching, best MBR, best MSR and replication

    Ties go to the earlier (simpler) scheme in that order.
    """
    return _cheapest(_candidates(params, space, options))


# ----- tables ----------------------------------------------------------------

def _check_grid(values: Sequence[float], name: str, increasing: bool = False):
    if len(values) == 0:
        raise InvalidParameterError(f"{name} must not be empty")
    if any(not v > 0 for v in values):
        raise InvalidParameterError(f"{name} must be positive")
    if increasing and any(b <= a for a, b in zip(values, values[1:])):
        raise InvalidParameterError(f"{name} must be strictly increasing")


def _sweep_row(R: float, N: float, space: DesignSpace, p: float, options: CostOptions) -> dict:
    params = SystemParams.from_popularity(N=N, p=p, R=R)
    candidates = _candidates(params, space, options)
    (_, sc), (mbr, cost_mbr), (msr, cost_msr), (_, rep) = candidates
    best_scheme, _ = _cheapest(candidates)
    return {
        "p": p,
        "cost_sc": sc,
        "cost_mbr_best": cost_mbr,
        "k_mbr": mbr.code.k,
        "cost_msr_best": cost_msr,
        "k_msr": msr.code.k,
        "cost_rep": rep,
        "best_scheme": best_scheme.label,
        "rel_mbr": cost_mbr / sc,
        "rel_msr": cost_msr / sc,
        "rel_rep": rep / sc,
    }


def sweep_p(R: float,
            N: float,
            space: DesignSpace,
            p_grid: Sequence[float],
            *,
            options: CostOptions = CostOptions(),
            n_jobs: int = 1) -> pd.DataFrame:
    """
    Best cost of every scheme along a popularity grid (lambda = 1, omega = p)

    Args:
        R: Cost ratio
        N: Expected number of nodes
        space: Design space
        p_grid: Strictly increasing positive popularities (a single point is allowed)
        options: Repair offset, truncation tolerance and normalizer
        n_jobs: joblib workers

    Returns:
        DataFrame with SWEEP_COLUMNS followed by costs relative to simple caching
    """
    p_grid = [float(p) for p in p_grid]
    _check_grid(p_grid, "p_grid", increasing=True)

    rows = Parallel(n_jobs=n_jobs)(
        delayed(_sweep_row)(R, N, space, p, options) for p in p_grid
    )
    logger.info(f"📈 swept {len(rows)} popularities for R={R:g}, N={N:g}")
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS + ["rel_mbr", "rel_msr", "rel_rep"])


def cost_by_k(params: SystemParams,
              space: DesignSpace,
              *,
              options: CostOptions = CostOptions()) -> pd.DataFrame:
    """
    Per-k costs of MBR and MSR next to the k-independent simple caching and replication

    Returns:
        DataFrame with raw costs and costs relative to simple caching
    """
    kwargs = options.as_kwargs()
    sc = scheme_cost(params, SimpleCaching())
    rep = cost_replication(params, space.n, **kwargs).total
    rows = []
    for k in space.k_range:
        code = space.code(k)
        mbr = cost_regenerating(params, code, code_point(CodeFlavor.MBR, params.B, code), **kwargs).total
        msr = cost_regenerating(params, code, code_point(CodeFlavor.MSR, params.B, code), **kwargs).total
        rows.append({
            "k": k,
            "cost_sc": sc,
            "cost_mbr": mbr,
            "cost_msr": msr,
            "cost_rep": rep,
            "rel_mbr": mbr / sc,
            "rel_msr": msr / sc,
            "rel_rep": rep / sc,
        })
    return pd.DataFrame(rows)


# ----- switching thresholds --------------------------------------------------

def kind_cost(kind: SchemeKind,
              params: SystemParams,
              space: DesignSpace,
              options: CostOptions = CostOptions()) -> float:
    """Cost of a scheme family, re-optimizing k for the coded families"""
    kind = SchemeKind(kind)
    if kind is SchemeKind.SIMPLE_CACHING:
        return scheme_cost(params, SimpleCaching())
    if kind is SchemeKind.REPLICATION:
        return cost_replication(params, space.n, **options.as_kwargs()).total
    flavor = CodeFlavor.MBR if kind is SchemeKind.MBR else CodeFlavor.MSR
    return best_k(params, space, flavor, options=options)[1]


def _sign_changes(values: Sequence[float]) -> int:
    signs = [v > 0 for v in values if v != 0.0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def threshold(scheme_a: SchemeKind,
              scheme_b: SchemeKind,
              R: float,
              N: float,
              space: DesignSpace,
              settings: SearchSettings = SearchSettings(),
              *,
              lam: float = 1.0) -> Crossing:
    """
    Popularity above which scheme_b becomes cheaper than scheme_a

    Scans cost_a(p) - cost_b(p) on a log grid and bisects on log p the first
    interval where the difference turns from negative to positive. Crossings
    the other way (b handing back to a) are counted but never reported.

    Returns:
        Crossing; when b is already cheaper at p_min the threshold lies below the
        search domain, p is None and below_domain is set
    """
    if SchemeKind(scheme_a) is SchemeKind(scheme_b):
        raise InvalidParameterError("threshold needs two distinct schemes")
    options = settings.options

    def difference(log_p: float) -> float:
        params = SystemParams.from_popularity(N=N, p=math.exp(log_p), R=R, lam=lam)
        return kind_cost(scheme_a, params, space, options) - kind_cost(scheme_b, params, space, options)

    log_grid = np.linspace(math.log(settings.p_min), math.log(settings.p_max), settings.scan_points)
    values = [difference(x) for x in log_grid]
    count = _sign_changes(values)
    pair = f"{SchemeKind(scheme_a).value}/{SchemeKind(scheme_b).value} at R={R:g}, N={N:g}"

    if values[0] > 0:
        logger.debug(f"{pair}: {SchemeKind(scheme_b).value} already cheaper at p={settings.p_min:g}")
        return Crossing(p=None, crossing_count=count, multiple=count > 1, below_domain=True)

    first: Optional[float] = None
    if values[0] == 0.0 and len(values) > 1 and values[1] > 0:
        first = log_grid[0]
    for j in range(len(values) - 1):
        if first is not None:
            break
        if values[j] < 0 and values[j + 1] == 0.0:
            first = log_grid[j + 1]
        elif values[j] < 0 < values[j + 1]:
            first = bisect(difference, log_grid[j], log_grid[j + 1], xtol=settings.log_xtol)

    if first is None:
        logger.debug(f"{pair}: no crossing")
        return Crossing(p=None, crossing_count=count, multiple=count > 1)

    return Crossing(p=math.exp(first), crossing_count=count, multiple=count > 1)


def threshold_result(R: float,
                     N: float,
                     space: DesignSpace,
                     settings: SearchSettings = SearchSettings(),
                     *,
                     lam: float = 1.0) -> ThresholdResult:
    """p1 (caching -> MBR), p2 (MBR -> MSR) and p3 (MSR -> replication) at one (R, N)"""
    return ThresholdResult(
        p1=threshold(SchemeKind.SIMPLE_CACHING, SchemeKind.MBR, R, N, space, settings, lam=lam),
        p2=threshold(SchemeKind.MBR, SchemeKind.MSR, R, N, space, settings, lam=lam),
        p3=threshold(SchemeKind.MSR, SchemeKind.REPLICATION, R, N, space, settings, lam=lam),
    )


def _surface_row(R: float, N: float, space: DesignSpace, settings: SearchSettings) -> dict:
    result = threshold_result(R, N, space, settings)
    row = {"R": R, "N": N}
    for name in ("p1", "p2", "p3"):
        crossing = getattr(result, name)
        row[name] = crossing.p if crossing.found else np.nan
        row[f"{name}_crossings"] = crossing.crossing_count
        row[f"{name}_below_domain"] = crossing.below_domain
    return row


def threshold_surface(R_grid: Iterable[float],
                      N_grid: Iterable[float],
                      space: DesignSpace,
                      settings: SearchSettings = SearchSettings(),
                      *,
                      n_jobs: int = 1) -> pd.DataFrame:
    """
    Switching thresholds over an (R, N) grid

    Cells without a crossing in the search domain are left empty (NaN); rows are
    ordered by (R, N) whatever the number of workers.
    """
    R_grid = [float(r) for r in R_grid]
    N_grid = [float(n) for n in N_grid]
    _check_grid(R_grid, "R_grid")
    _check_grid(N_grid, "N_grid")
    if any(r <= 1 for r in R_grid):
        raise InvalidParameterError("R > 1 required for every R_grid value")
    if any(n > MAX_SUPPORTED_N for n in N_grid):
        raise InvalidParameterError(f"N <= {MAX_SUPPORTED_N:g} required for every N_grid value")

    cells = [(R, N) for R in R_grid for N in N_grid]
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_surface_row)(R, N, space, settings) for R, N in cells
    )
    surface = pd.DataFrame(rows, columns=SURFACE_COLUMNS).sort_values(["R", "N"], kind="mergesort")
    logger.info(f"🗺️ computed thresholds for {len(cells)} (R, N) cells")
    return surface.reset_index(drop=True)


def fit_log_threshold(surface: pd.DataFrame, column: str = "p2") -> dict:
    """
    Least-squares fit log10(p) = slope * log10(N) + intercept over a surface column

    Returns:
        slope, intercept and the largest absolute residual (log10 units)
    """
    data = surface[["N", column]].dropna()
    if len(data) < 2 or data["N"].nunique() < 2:
        raise InvalidParameterError(f"need thresholds at two or more N values to fit {column}")

    x = np.log10(data["N"].to_numpy(dtype=float))
    y = np.log10(data[column].to_numpy(dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.max(np.abs(y - (slope * x + intercept))))
    return {"slope": float(slope), "intercept": float(intercept), "max_residual": residual}


class MethodPlanner:
    """
    Planner bound to the settings in config.yaml
    """

    def __init__(self, config_path: str = "config.yaml", settings: Optional[dict] = None):
        """
        Initialize the planner

        Args:
            config_path: Path to configuration file
            settings: Already loaded settings (overrides config_path)
        """
        self.config = settings if settings is not None else load_settings(config_path)
        planner_config = self.config["planner"]

        self.space = DesignSpace(n=planner_config["n"], d=planner_config["d"],
                                 k_range=tuple(range(planner_config["k_min"], planner_config["d"] + 1)))
        self.options = CostOptions.from_settings(self.config)
        self.search = SearchSettings(
            p_min=planner_config["p_min"],
            p_max=planner_config["p_max"],
            scan_points=planner_config["scan_points"],
            log_xtol=planner_config["log_xtol"],
            options=self.options,
        )
        self.n_jobs = planner_config["n_jobs"]

    def with_space(self, n: int, d: int) -> "MethodPlanner":
        """Same settings over a different (n, d)"""
        planner = MethodPlanner.__new__(MethodPlanner)
        planner.__dict__.update(self.__dict__)
        k_min = min(self.space.k_range)
        planner.space = DesignSpace(n=n, d=d, k_range=tuple(range(k_min, d + 1)))
        return planner

    def best_method(self, params: SystemParams) -> Tuple[Scheme, float]:
        return best_method(params, self.space, options=self.options)

    def sweep(self, R: float, N: float, p_grid: Sequence[float]) -> pd.DataFrame:
        return sweep_p(R, N, self.space, p_grid, options=self.options, n_jobs=self.n_jobs)

    def by_k(self, params: SystemParams) -> pd.DataFrame:
        return cost_by_k(params, self.space, options=self.options)

    def surface(self, R_grid: Iterable[float], N_grid: Iterable[float]) -> pd.DataFrame:
        return threshold_surface(R_grid, N_grid, self.space, self.search, n_jobs=self.n_jobs)
