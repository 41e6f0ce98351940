"""
Tests for the scheme planner
"""

import math

import numpy as np
import pytest
import yaml

from src.codes import CodeFlavor
from src.exceptions import InvalidParameterError
from src.tools.cost_model import CostOptions, Mbr, Msr, Replication, SimpleCaching, SystemParams
from src.tools.planner import (
    SWEEP_COLUMNS,
    DesignSpace,
    MethodPlanner,
    SchemeKind,
    SearchSettings,
    best_k,
    best_method,
    cost_by_k,
    fit_log_threshold,
    kind_cost,
    sweep_p,
    threshold,
    threshold_result,
    threshold_surface,
)

SPACE = DesignSpace()


def reference(p: float, N: float = 1000, R: float = 20) -> SystemParams:
    return SystemParams.from_popularity(N=N, p=p, R=R)


def test_default_design_space():
    assert SPACE.k_range == tuple(range(2, 11))
    assert DesignSpace(k_range=(9, 3, 3)).k_range == (3, 9)


def test_design_space_from_numpy_range():
    space = DesignSpace(k_range=np.arange(3, 6))
    assert space.k_range == (3, 4, 5)
    assert best_k(reference(0.005), space, CodeFlavor.MBR)[0] == 5


@pytest.mark.parametrize("kwargs", [{"n": 10, "d": 10}, {"k_range": (1, 2)}, {"k_range": ()}, {"k_range": (11,)},
                                    {"k_range": (2.5, 3)}])
def test_invalid_design_space(kwargs):
    with pytest.raises(InvalidParameterError):
        DesignSpace(**kwargs)


def test_best_k_reference_point():
    assert best_k(reference(0.005), SPACE, CodeFlavor.MBR)[0] == 7
    assert best_k(reference(0.005), SPACE, CodeFlavor.MSR)[0] == 5
    assert best_k(reference(0.005), DesignSpace(k_range=(3,)), CodeFlavor.MBR)[0] == 3


def test_best_method_regimes():
    low, _ = best_method(reference(1e-5), SPACE)
    middle, cost = best_method(reference(0.005), SPACE)
    high, _ = best_method(reference(2.0), SPACE)
    assert isinstance(low, SimpleCaching)
    assert isinstance(middle, Mbr) and middle.code.k == 7
    assert cost == pytest.approx(13.234, rel=1e-3)
    assert isinstance(high, Replication) and high.n == 30


def test_sweep_columns_and_winners():
    table = sweep_p(20, 1000, SPACE, [1e-5, 0.005, 2.0])
    assert list(table.columns[:len(SWEEP_COLUMNS)]) == SWEEP_COLUMNS
    assert list(table["best_scheme"]) == ["simple-caching", "mbr", "replication"]
    assert table.loc[1, "k_mbr"] == 7
    assert table.loc[1, "rel_mbr"] == pytest.approx(table.loc[1, "cost_mbr_best"] / table.loc[1, "cost_sc"])


def test_sweep_is_parallel_safe():
    grid = np.geomspace(1e-4, 1.0, 12)
    sequential = sweep_p(20, 500, SPACE, grid, n_jobs=1)
    parallel = sweep_p(20, 500, SPACE, grid, n_jobs=2)
    assert sequential.equals(parallel)


@pytest.mark.parametrize("grid", [[], [0.1, 0.1], [0.2, 0.1], [-1.0, 1.0]])
def test_sweep_rejects_bad_grids(grid):
    with pytest.raises(InvalidParameterError):
        sweep_p(20, 1000, SPACE, grid)


def test_cost_by_k_table():
    table = cost_by_k(reference(0.005), SPACE)
    assert list(table["k"]) == list(range(2, 11))
    assert int(table.loc[table["cost_mbr"].idxmin(), "k"]) == 7
    assert table["cost_sc"].nunique() == 1
    assert table.loc[0, "cost_mbr"] == pytest.approx(20.97, rel=2e-3)


def test_kind_cost_dispatch():
    params = reference(0.005)
    assert kind_cost(SchemeKind.SIMPLE_CACHING, params, SPACE) == pytest.approx(20.83, rel=1e-3)
    assert kind_cost("mbr", params, SPACE) == pytest.approx(13.234, rel=1e-3)


def test_simple_caching_to_mbr_threshold():
    crossing = threshold(SchemeKind.SIMPLE_CACHING, SchemeKind.MBR, 20, 1000, SPACE)
    assert 2e-4 < crossing.p < 7e-4
    # simple caching wins again near p = 0.08
    assert crossing.multiple
    assert crossing.crossing_count >= 2

    params = reference(crossing.p)
    sc = kind_cost(SchemeKind.SIMPLE_CACHING, params, SPACE)
    mbr = kind_cost(SchemeKind.MBR, params, SPACE)
    assert abs(sc - mbr) <= 1e-6 * sc


def test_mbr_to_msr_threshold():
    crossing = threshold(SchemeKind.MBR, SchemeKind.MSR, 20, 1000, SPACE)
    assert 0.008 < crossing.p < 0.0125
    small = threshold(SchemeKind.MBR, SchemeKind.MSR, 20, 100, SPACE)
    assert 0.1 < small.p < 0.12


@pytest.mark.parametrize("N", [100, 1000])
def test_msr_to_replication_threshold(N):
    crossing = threshold(SchemeKind.MSR, SchemeKind.REPLICATION, 20, N, SPACE)
    # 2 * (1 - gamma_MSR) with k = 2, d = 10
    assert crossing.p == pytest.approx(2 * (1 - 5 / 9), rel=1e-2)


def test_threshold_is_scale_invariant():
    base = threshold(SchemeKind.MBR, SchemeKind.MSR, 20, 1000, SPACE)
    scaled = threshold(SchemeKind.MBR, SchemeKind.MSR, 20, 1000, SPACE, lam=7.0)
    assert scaled.p == pytest.approx(base.p, rel=1e-8)


def test_no_crossing_in_domain():
    crossing = threshold(SchemeKind.MSR, SchemeKind.REPLICATION, 20, 1000, SPACE, SearchSettings(p_max=0.5))
    assert crossing.p is None
    assert not crossing.found
    assert crossing.crossing_count == 0
    assert not crossing.below_domain


def test_takeover_below_search_domain():
    crossing = threshold(SchemeKind.SIMPLE_CACHING, SchemeKind.MBR, 180, 1e5, SPACE)
    # MBR is already cheaper at p_min; the only sign change is MBR handing back to caching
    assert crossing.below_domain
    assert crossing.p is None
    assert crossing.crossing_count == 1

    params = reference(1e-6, N=1e5, R=180)
    assert kind_cost(SchemeKind.MBR, params, SPACE) < kind_cost(SchemeKind.SIMPLE_CACHING, params, SPACE)


def test_threshold_result_stays_ordered_at_large_population():
    result = threshold_result(180, 1e5, SPACE)
    assert result.p1.below_domain
    assert result.p2.found and result.p3.found
    assert result.p2.p < result.p3.p
    assert 0.5 * 10 / 1e5 <= result.p2.p <= 2 * 10 / 1e5


def test_reverse_crossings_are_not_reported():
    forward = threshold(SchemeKind.SIMPLE_CACHING, SchemeKind.MBR, 20, 1000, SPACE)
    reverse = threshold(SchemeKind.MBR, SchemeKind.SIMPLE_CACHING, 20, 1000, SPACE)
    # caching is cheaper at p_min, so the hand-back near p = 0.085 is not a takeover
    assert reverse.below_domain
    assert reverse.p is None
    assert reverse.crossing_count == forward.crossing_count
    assert not forward.below_domain


def test_threshold_needs_two_schemes():
    with pytest.raises(InvalidParameterError):
        threshold(SchemeKind.MBR, "mbr", 20, 1000, SPACE)


def test_threshold_surface_ordering():
    surface = threshold_surface([180, 20], [1000, 100], SPACE)
    assert list(zip(surface["R"], surface["N"])) == [(20, 100), (20, 1000), (180, 100), (180, 1000)]
    assert surface["p3"].to_numpy() == pytest.approx(np.full(4, 2 * (1 - 5 / 9)), rel=1e-2)
    at_1000 = surface[surface["N"] == 1000].set_index("R")
    assert at_1000.loc[180, "p1"] < at_1000.loc[20, "p1"]


def test_surface_rejects_unsupported_populations():
    with pytest.raises(InvalidParameterError):
        threshold_surface([20], [1e6], SPACE)


@pytest.mark.slow
def test_mbr_to_msr_threshold_scales_inversely_with_n():
    surface = threshold_surface([20], [100, 1000, 10000], SPACE, n_jobs=2)
    fit = fit_log_threshold(surface, "p2")
    assert fit["slope"] == pytest.approx(-1.0, abs=0.1)
    assert 10 ** fit["intercept"] == pytest.approx(10.0, rel=0.25)
    assert fit["max_residual"] < 0.05


def test_fit_needs_two_populations():
    surface = threshold_surface([20], [1000], SPACE)
    with pytest.raises(InvalidParameterError):
        fit_log_threshold(surface, "p2")


def test_method_planner_reads_settings(tmp_path):
    config_path = tmp_path / "config.yaml"
    config_path.write_text(yaml.safe_dump({"planner": {"n": 20, "d": 8, "k_min": 3, "n_jobs": 1}}))
    planner = MethodPlanner(str(config_path))
    assert planner.space.n == 20
    assert planner.space.k_range == tuple(range(3, 9))
    assert planner.search.scan_points == 64

    scheme, _ = planner.best_method(reference(2.0))
    assert isinstance(scheme, Replication) and scheme.n == 20
    assert planner.with_space(30, 10).space.k_range == tuple(range(3, 11))
    assert math.isclose(planner.by_k(reference(0.005))["k"].iloc[0], 3)


def _regimes(labels):
    order = []
    for label in labels:
        if not order or order[-1] != label:
            order.append(label)
    return order


def test_best_scheme_regimes_in_order():
    table = sweep_p(20, 1000, SPACE, np.geomspace(1e-4, 10, 200))
    assert _regimes(table["best_scheme"]) == ["simple-caching", "mbr", "msr", "replication"]


@pytest.mark.parametrize("a, b, below, above", [
    (SchemeKind.SIMPLE_CACHING, SchemeKind.MBR, SimpleCaching, Mbr),
    (SchemeKind.MBR, SchemeKind.MSR, Mbr, Msr),
    (SchemeKind.MSR, SchemeKind.REPLICATION, Msr, Replication),
])
def test_best_method_switches_at_threshold(a, b, below, above):
    crossing = threshold(a, b, 20, 1000, SPACE)
    assert isinstance(best_method(reference(0.9 * crossing.p), SPACE)[0], below)
    assert isinstance(best_method(reference(1.1 * crossing.p), SPACE)[0], above)


def test_cost_options_reach_the_threshold_search():
    base = threshold(SchemeKind.MBR, SchemeKind.MSR, 20, 1000, SPACE)
    exact = threshold(SchemeKind.MBR, SchemeKind.MSR, 20, 1000, SPACE,
                      SearchSettings(options=CostOptions(normalizer="exact")))
    assert exact.p != base.p
    assert exact.p == pytest.approx(base.p, rel=0.05)


def _p1_or_floor(row, p_min=SearchSettings().p_min):
    return p_min if row["p1_below_domain"] else row["p1"]


@pytest.mark.slow
def test_threshold_grid_properties():
    R_grid = [20, 60, 100, 140, 180]
    N_grid = [100, 1000, 10000, 100000]
    surface = threshold_surface(R_grid, N_grid, SPACE, n_jobs=2)

    assert surface["p3"].between(0.85, 0.95).all()
    assert surface["p3"].max() - surface["p3"].min() <= 0.1
    ratio = surface["p2"] * surface["N"] / 10
    assert ratio.between(0.5, 2.0).all()

    surface["p1_effective"] = surface.apply(_p1_or_floor, axis=1)
    assert (surface["p1"].notna() | surface["p1_below_domain"]).all()
    found = surface[surface["p1"].notna()]
    assert (found["p1"] < found["p2"]).all()
    assert (surface["p2"] < surface["p3"]).all()

    grid = surface.pivot(index="R", columns="N", values="p1_effective")
    assert (grid.diff(axis=1).iloc[:, 1:] <= 0).all().all()
    assert (grid.diff(axis=0).iloc[1:, :] <= 0).all().all()
    assert grid.loc[20, 1000] < 0.005
