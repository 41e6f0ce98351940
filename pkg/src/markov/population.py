"""
Node Population Model
Stationary law of the M/M/inf birth-death chain and truncated sums over it
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal

import numpy as np
from loguru import logger
from scipy.special import gammaln, xlogy
from scipy.stats import poisson

from src.exceptions import InvalidParameterError, TruncationError

DEFAULT_TAIL_EPS = 1e-12

Weight = Callable[[np.ndarray], "np.ndarray | float"]


@dataclass(frozen=True)
class PopulationModel:
    """
    M/M/inf node population: arrivals at rate N*lambda, each node leaves at rate lambda

    Attributes:
        expected_nodes: Expected number of nodes N (may be non-integer)
        departure_rate: Per-node departure rate lambda = 1/T
    """

    expected_nodes: float
    departure_rate: float = 1.0

    def __post_init__(self):
        if not self.expected_nodes > 0:
            raise InvalidParameterError(f"N > 0 required, got N={self.expected_nodes}")
        if not self.departure_rate > 0:
            raise InvalidParameterError(f"lambda > 0 required, got lambda={self.departure_rate}")

    @property
    def mode(self) -> int:
        return int(math.floor(self.expected_nodes))


@dataclass(frozen=True)
class TruncationWindow:
    """Index window [i_min, i_max] carrying all but tail_mass_bound of the pmf"""

    i_min: int
    i_max: int
    tail_mass_bound: float

    def __post_init__(self):
        if not 0 <= self.i_min <= self.i_max:
            raise InvalidParameterError(f"0 <= i_min <= i_max required, got [{self.i_min}, {self.i_max}]")

    def indices(self) -> np.ndarray:
        return np.arange(self.i_min, self.i_max + 1)

    def __len__(self) -> int:
        return self.i_max - self.i_min + 1


def log_stationary_pmf(model: PopulationModel, i) -> "np.ndarray | float":
    """log pi(i) = i*log(N) - N - log(i!)"""
    n = model.expected_nodes
    return xlogy(i, n) - n - gammaln(np.asarray(i, dtype=float) + 1.0)


def stationary_pmf(model: PopulationModel, i: int) -> float:
    """
    Probability that the population chain is in state i

    Args:
        model: Population model
        i: Number of nodes (nonnegative integer)

    Returns:
        pi(i) = N^i e^{-N} / i!
    """
    if i < 0:
        raise InvalidParameterError(f"state index i >= 0 required, got i={i}")
    return float(np.exp(log_stationary_pmf(model, int(i))))


def stationary_pmf_array(model: PopulationModel, indices: np.ndarray) -> np.ndarray:
    """Vectorized pi(i) over an integer index array"""
    return np.exp(log_stationary_pmf(model, np.asarray(indices)))


def _excluded_mass(n: float, mode: int, half_width: int) -> float:
    below = mode - half_width - 1
    lower = float(poisson.cdf(below, n)) if below >= 0 else 0.0
    return lower + float(poisson.sf(mode + half_width, n))


@lru_cache(maxsize=4096)
def _window_bounds(n: float, tail_eps: float) -> tuple:
    mode = int(math.floor(n))

    def fits(h: int) -> bool:
        excluded = _excluded_mass(n, mode, h)
        return excluded <= tail_eps or math.isclose(excluded, tail_eps, rel_tol=1e-12)

    if fits(0):
        return mode, mode

    lo, hi = 0, max(1, int(math.ceil(10.0 * math.sqrt(n))) + 10)
    while not fits(hi):
        lo, hi = hi, 2 * hi
    # smallest h with fits(h): fits(lo) is False, fits(hi) is True
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fits(mid):
            hi = mid
        else:
            lo = mid

    return max(0, mode - hi), mode + hi


def truncation_window(model: PopulationModel, tail_eps: float = DEFAULT_TAIL_EPS) -> TruncationWindow:
    """
    Smallest window centred on the mode floor(N) whose excluded mass is at most tail_eps

    Args:
        model: Population model
        tail_eps: Allowed pmf mass outside the window, 0 < tail_eps < 1

    Returns:
        TruncationWindow
    """
    if not 0.0 < tail_eps < 1.0:
        raise InvalidParameterError(f"0 < tail_eps < 1 required, got tail_eps={tail_eps}")

    i_min, i_max = _window_bounds(float(model.expected_nodes), float(tail_eps))
    return TruncationWindow(i_min=i_min, i_max=i_max, tail_mass_bound=tail_eps)


@lru_cache(maxsize=256)
def _window_pmf(n: float, i_min: int, i_max: int) -> np.ndarray:
    pmf = stationary_pmf_array(PopulationModel(n), np.arange(i_min, i_max + 1))
    pmf.setflags(write=False)
    return pmf


def _evaluate_weight(weight: Weight, indices: np.ndarray) -> np.ndarray:
    values = np.broadcast_to(np.asarray(weight(indices), dtype=float), indices.shape)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise InvalidParameterError("weight must be finite and nonnegative")
    return values


def weighted_tail_sum(model: PopulationModel,
                      i_from: int,
                      weight: Weight,
                      *,
                      super_polynomial: bool = False,
                      tail_eps: float = DEFAULT_TAIL_EPS) -> float:
    """
    Sum of pi(i) * weight(i) for i >= i_from, truncated to the tail_eps window

    Args:
        model: Population model
        i_from: First state of the sum
        weight: Vectorized nonnegative weight, at most polynomial growth in i
        super_polynomial: Set when the weight grows faster than any polynomial
        tail_eps: Truncation tolerance

    Returns:
        Truncated sum
    """
    if super_polynomial:
        raise TruncationError("weight grows super-polynomially; truncation error cannot be bounded")

    window = truncation_window(model, tail_eps)
    lo = max(int(i_from), window.i_min)
    if lo > window.i_max:
        return 0.0

    pmf = _window_pmf(float(model.expected_nodes), window.i_min, window.i_max)[lo - window.i_min:]
    indices = np.arange(lo, window.i_max + 1)
    return float(np.sum(pmf * _evaluate_weight(weight, indices)))


def weighted_range_sum(model: PopulationModel, lo: int, hi: int, weight: Weight) -> float:
    """
    Sum of pi(i) * weight(i) over the finite range lo..hi (inclusive)

    An empty range (hi < lo) contributes exactly 0.
    """
    lo = max(int(lo), 0)
    if hi < lo:
        return 0.0
    indices = np.arange(lo, int(hi) + 1)
    return float(np.sum(stationary_pmf_array(model, indices) * _evaluate_weight(weight, indices)))


def event_rate_normalizer(model: PopulationModel,
                          mode: Literal["asymptotic", "exact"] = "asymptotic",
                          tail_eps: float = DEFAULT_TAIL_EPS) -> float:
    """
    Rate used to turn per-event costs into per-time costs

    "asymptotic" is the large-N constant 2*N*lambda. "exact" is the inverse of the
    mean inter-event time sum_i pi(i) / ((i + N) * lambda).
    """
    n, lam = model.expected_nodes, model.departure_rate
    if mode == "asymptotic":
        return 2.0 * n * lam
    if mode == "exact":
        mean_interval = weighted_tail_sum(model, 0, lambda i: 1.0 / ((i + n) * lam), tail_eps=tail_eps)
        rate = 1.0 / mean_interval
        logger.debug(f"exact normalizer N={n}: {rate:.6g} (asymptotic {2.0 * n * lam:.6g})")
        return rate
    raise InvalidParameterError(f"normalizer mode must be 'asymptotic' or 'exact', got {mode!r}")
