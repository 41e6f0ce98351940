"""
Tests for the node population model
"""

import math

import numpy as np
import pytest

from src.exceptions import InvalidParameterError, TruncationError
from src.markov import (
    PopulationModel,
    event_rate_normalizer,
    stationary_pmf,
    stationary_pmf_array,
    truncation_window,
    weighted_range_sum,
    weighted_tail_sum,
)


def test_pmf_matches_closed_form():
    model = PopulationModel(expected_nodes=1.0)
    assert stationary_pmf(model, 0) == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert stationary_pmf(PopulationModel(4.0), 2) == pytest.approx(16 * math.exp(-4.0) / 2, rel=1e-13)


def test_negative_state_is_rejected():
    with pytest.raises(InvalidParameterError):
        stationary_pmf(PopulationModel(3.0), -1)


@pytest.mark.parametrize("bad", [0.0, -2.0])
def test_population_requires_positive_n(bad):
    with pytest.raises(InvalidParameterError, match="N > 0"):
        PopulationModel(expected_nodes=bad)


@pytest.mark.parametrize("n", [0.5, 1.0, 20.0, 1000.0, 1e5])
def test_window_mass(n):
    model = PopulationModel(n)
    window = truncation_window(model)
    total = float(stationary_pmf_array(model, window.indices()).sum())
    assert total == pytest.approx(1.0, abs=1.5e-12)


@pytest.mark.parametrize("n", [20.0, 1000.0, 1e5])
def test_mean_and_variance(n):
    model = PopulationModel(n)
    mean = weighted_tail_sum(model, 0, lambda i: i.astype(float))
    variance = weighted_tail_sum(model, 0, lambda i: (i - n) ** 2)
    assert mean == pytest.approx(n, rel=1e-9)
    assert variance == pytest.approx(n, rel=1e-9)


def test_large_population_pmf_is_finite():
    model = PopulationModel(1e5)
    pmf = stationary_pmf_array(model, truncation_window(model).indices())
    assert np.all(np.isfinite(pmf))
    assert np.all(pmf >= 0)


def test_window_is_centred_on_the_mode():
    window = truncation_window(PopulationModel(1000.0))
    assert window.i_min < 1000 < window.i_max
    assert (1000 - window.i_min) == (window.i_max - 1000)


def test_window_tolerance_bounds():
    with pytest.raises(InvalidParameterError):
        truncation_window(PopulationModel(5.0), tail_eps=0.0)
    wide = truncation_window(PopulationModel(50.0), tail_eps=1e-15)
    narrow = truncation_window(PopulationModel(50.0), tail_eps=1e-3)
    assert len(narrow) < len(wide)


def test_window_for_a_single_expected_node():
    window = truncation_window(PopulationModel(1.0), tail_eps=0.5)
    assert window.i_min == 0
    assert window.i_min <= 1 <= window.i_max
    kept = stationary_pmf_array(PopulationModel(1.0), window.indices()).sum()
    assert kept >= 0.5


@pytest.mark.parametrize("n", [5.0, 7.5, 40.0])
def test_mode_alone_can_fill_the_window(n):
    model = PopulationModel(n)
    mode = math.floor(n)
    window = truncation_window(model, tail_eps=1.0 - stationary_pmf(model, mode))
    assert (window.i_min, window.i_max) == (mode, mode)
    assert len(window) == 1


def test_tail_sums():
    model = PopulationModel(1000.0)
    assert weighted_tail_sum(model, 0, lambda i: 1.0) == pytest.approx(1.0, abs=1e-12)
    assert weighted_tail_sum(model, 0, lambda i: 1.0 / (i + 1000.0)) == pytest.approx(1 / 2000, rel=3e-4)
    # beyond the window
    assert weighted_tail_sum(model, 10_000, lambda i: i) == 0.0


def test_super_polynomial_weight_is_refused():
    with pytest.raises(TruncationError):
        weighted_tail_sum(PopulationModel(10.0), 0, np.exp, super_polynomial=True)


def test_negative_weight_is_refused():
    with pytest.raises(InvalidParameterError):
        weighted_tail_sum(PopulationModel(10.0), 0, lambda i: -1.0)


def test_empty_range_is_zero():
    model = PopulationModel(10.0)
    assert weighted_range_sum(model, 5, 4, lambda i: i) == 0.0
    assert weighted_range_sum(model, 3, 3, lambda i: 1.0) == pytest.approx(stationary_pmf(model, 3))


def test_exact_normalizer_small_population():
    rate = event_rate_normalizer(PopulationModel(1.0, 1.0), "exact")
    assert rate == pytest.approx(1.0 / (1.0 - math.exp(-1.0)), rel=1e-10)


@pytest.mark.parametrize("n, tolerance", [(1000.0, 1e-3), (100.0, 1e-2)])
def test_normalizers_agree_for_large_populations(n, tolerance):
    model = PopulationModel(n, 2.5)
    asymptotic = event_rate_normalizer(model, "asymptotic")
    exact = event_rate_normalizer(model, "exact")
    assert asymptotic == pytest.approx(2 * n * 2.5)
    assert abs(asymptotic / exact - 1.0) <= tolerance


def test_unknown_normalizer():
    with pytest.raises(InvalidParameterError):
        event_rate_normalizer(PopulationModel(10.0), "midpoint")
