"""
Tests for the closed-form cost model
"""

import numpy as np
import pytest

from src.codes import CodeParams, mbr_point, msr_point
from src.exceptions import InvalidParameterError, NoRequestsError
from src.tools.cost_model import (
    BaseStationOnly,
    CostBreakdown,
    Mbr,
    Msr,
    Replication,
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

# per-lambda MBR cost for k = 2..10 at R=20, N=1000, p=0.005, n=30, d=10
MBR_COST_BY_K = {2: 20.97, 3: 16.61, 4: 14.66, 5: 13.71, 6: 13.30, 7: 13.234, 8: 13.43, 9: 13.86, 10: 14.52}


@pytest.fixture
def reference_params():
    return SystemParams.from_popularity(N=1000, p=0.005, R=20)


def test_simple_caching_small_example():
    assert cost_simple_caching(SystemParams(N=2, lam=1, omega=1, R=2)) == pytest.approx(2.0)


def test_simple_caching_reference(reference_params):
    assert cost_simple_caching(reference_params) == pytest.approx(20.83, rel=1e-3)


def test_simple_caching_without_requests():
    params = SystemParams(N=100, lam=1, omega=0, R=20)
    with pytest.raises(NoRequestsError):
        cost_simple_caching(params)
    assert scheme_cost(params, SimpleCaching()) == 0.0


def test_base_station_only():
    params = SystemParams(N=50, lam=2, omega=0.3, R=20)
    assert cost_base_station_only(params) == pytest.approx(20 * 50 * 0.3)
    assert scheme_cost(params, BaseStationOnly()) == pytest.approx(300.0)


@pytest.mark.parametrize("kwargs, message", [
    ({"N": 0, "lam": 1, "omega": 1, "R": 2}, "N > 0"),
    ({"N": 10, "lam": 0, "omega": 1, "R": 2}, "lambda > 0"),
    ({"N": 10, "lam": 1, "omega": -1, "R": 2}, "omega >= 0"),
    ({"N": 10, "lam": 1, "omega": 1, "R": 1}, "R > 1"),
])
def test_invalid_system_params(kwargs, message):
    with pytest.raises(InvalidParameterError, match=message):
        SystemParams(**kwargs)


def test_popularity_helper():
    params = SystemParams.from_popularity(N=100, p=0.2, R=5, lam=3)
    assert params.omega == pytest.approx(0.6)
    assert params.p == pytest.approx(0.2)


@pytest.mark.parametrize("k, expected", sorted(MBR_COST_BY_K.items()))
def test_mbr_cost_by_k(reference_params, k, expected):
    code = CodeParams(30, k, 10)
    total = cost_regenerating(reference_params, code, mbr_point(1, code)).total
    assert total == pytest.approx(expected, rel=2e-3)


def test_msr_best_k_is_five(reference_params):
    totals = {
        k: cost_regenerating(reference_params, CodeParams(30, k, 10), msr_point(1, CodeParams(30, k, 10))).total
        for k in range(2, 11)
    }
    assert min(totals, key=totals.get) == 5
    assert totals[5] == pytest.approx(14.970, rel=1e-3)


def test_large_population_terms(reference_params):
    # with N >> n the allocation, redundancy and remote retrieval terms vanish
    code = CodeParams(30, 7, 10)
    breakdown = cost_regenerating(reference_params, code, mbr_point(1, code))
    assert breakdown.c1 < 1e-12
    assert breakdown.c2 < 1e-12
    assert breakdown.c4 < 1e-12
    assert breakdown.total == pytest.approx(breakdown.c3 + breakdown.c5 + breakdown.c6)
    assert breakdown.total == pytest.approx(
        asymptotic_regenerating_cost(reference_params, code, mbr_point(1, code)), rel=1e-2
    )


def test_small_population_all_terms_present():
    params = SystemParams.from_popularity(N=8, p=0.5, R=20)
    code = CodeParams(10, 3, 5)
    breakdown = cost_regenerating(params, code, msr_point(1, code))
    for name, value in breakdown.as_dict().items():
        assert value > 0, name
    assert breakdown.as_dict()["total"] == pytest.approx(
        sum(getattr(breakdown, term) for term in ("c1", "c2", "c3", "c4", "c5", "c6"))
    )


def test_replication_is_k1_regenerating_code(reference_params):
    code = CodeParams(30, 1, 10)
    regenerating = cost_regenerating(reference_params, code, mbr_point(1, code))
    replication = cost_replication(reference_params, 30)
    assert replication.total == pytest.approx(regenerating.total, rel=1e-12)
    assert scheme_cost(reference_params, Replication(30)) == pytest.approx(replication.total)


def test_single_copy_replication():
    params = SystemParams.from_popularity(N=20, p=0.1, R=20)
    breakdown = cost_replication(params, 1)
    assert breakdown.c2 == 0.0
    assert breakdown.total > 0


def test_repair_offset_variant():
    params = SystemParams.from_popularity(N=30, p=0.05, R=20)
    code = CodeParams(30, 7, 10)
    point = mbr_point(1, code)
    printed = cost_regenerating(params, code, point, repair_offset=2)
    variant = cost_regenerating(params, code, point, repair_offset=1)
    assert variant.c3 > printed.c3
    assert variant.c6 == printed.c6
    with pytest.raises(InvalidParameterError):
        cost_regenerating(params, code, point, repair_offset=3)


def test_exact_normalizer_is_close(reference_params):
    code = CodeParams(30, 7, 10)
    asymptotic = cost_regenerating(reference_params, code, mbr_point(1, code)).total
    exact = cost_regenerating(reference_params, code, mbr_point(1, code), normalizer="exact").total
    assert exact == pytest.approx(asymptotic, rel=1e-3)


def test_costs_scale_with_departure_rate():
    slow = SystemParams.from_popularity(N=200, p=0.05, R=20, lam=1)
    fast = SystemParams.from_popularity(N=200, p=0.05, R=20, lam=7)
    scheme = Msr(CodeParams(30, 5, 10))
    assert scheme_cost(fast, scheme) == pytest.approx(7 * scheme_cost(slow, scheme), rel=1e-12)
    assert scheme_cost(fast, SimpleCaching()) == pytest.approx(7 * scheme_cost(slow, SimpleCaching()), rel=1e-12)


def test_scheme_breakdown_dispatch(reference_params):
    code = CodeParams(30, 7, 10)
    assert scheme_breakdown(reference_params, Mbr(code)) == cost_regenerating(reference_params, code, mbr_point(1, code))
    with pytest.raises(InvalidParameterError):
        scheme_breakdown(reference_params, SimpleCaching())


def test_scheme_constraints():
    with pytest.raises(InvalidParameterError):
        Mbr(CodeParams(30, 1, 10))
    with pytest.raises(InvalidParameterError):
        Replication(0)
    assert Msr(CodeParams(30, 2, 10)).label == "msr"


def test_breakdown_rejects_negative_terms():
    with pytest.raises(InvalidParameterError):
        CostBreakdown(c1=0, c2=0, c3=-1, c4=0, c5=0, c6=0)


def test_relative_cost(reference_params):
    sc = cost_simple_caching(reference_params)
    assert relative_cost(sc, reference_params) == pytest.approx(1.0)
    assert relative_cost(13.234, reference_params) == pytest.approx(13.234 / sc)


def test_simple_caching_is_below_base_station_only():
    rng = np.random.default_rng(20240611)
    draws = 10_000
    R = 1.0 + rng.uniform(1e-6, 199.0, draws)
    N = np.exp(rng.uniform(np.log(2.0), np.log(1e5), draws))
    p = 10 ** rng.uniform(-5.0, 2.0, draws)
    violations = 0
    for r, n, pop in zip(R, N, p):
        params = SystemParams.from_popularity(N=float(n), p=float(pop), R=float(r))
        if not cost_simple_caching(params) < cost_base_station_only(params):
            violations += 1
    assert violations == 0


SCHEMES = [
    SimpleCaching(),
    BaseStationOnly(),
    Mbr(CodeParams(30, 7, 10)),
    Msr(CodeParams(30, 5, 10)),
    Replication(30),
]


@pytest.mark.parametrize("scheme", SCHEMES, ids=lambda s: s.label)
def test_cost_per_departure_rate_is_scale_invariant(scheme):
    rates = [
        scheme_cost(SystemParams.from_popularity(N=1000, p=0.005, R=20, lam=lam), scheme) / lam
        for lam in (0.01, 1.0, 100.0)
    ]
    assert rates[0] == pytest.approx(rates[1], rel=1e-9)
    assert rates[2] == pytest.approx(rates[1], rel=1e-9)


@pytest.mark.parametrize("scheme", SCHEMES, ids=lambda s: s.label)
@pytest.mark.parametrize("p", [1e-4, 0.005, 1.0])
def test_cost_does_not_decrease_with_r(scheme, p):
    costs = [scheme_cost(SystemParams.from_popularity(N=1000, p=p, R=R), scheme) for R in (2, 20, 100, 180)]
    assert all(b >= a for a, b in zip(costs, costs[1:]))


@pytest.mark.parametrize("k", range(2, 11))
def test_mbr_repairs_cheaper_and_reads_dearer_than_msr(reference_params, k):
    code = CodeParams(30, k, 10)
    mbr = cost_regenerating(reference_params, code, mbr_point(1, code))
    msr = cost_regenerating(reference_params, code, msr_point(1, code))
    assert mbr.c3 <= msr.c3
    assert mbr.c5 + mbr.c6 >= msr.c5 + msr.c6


@pytest.mark.parametrize("scheme", SCHEMES[2:], ids=lambda s: s.label)
def test_no_requests_means_no_retrieval_terms(scheme):
    params = SystemParams(N=100, lam=1, omega=0, R=20)
    breakdown = scheme_breakdown(params, scheme)
    assert (breakdown.c4, breakdown.c5, breakdown.c6) == (0.0, 0.0, 0.0)
    assert breakdown.c3 > 0
