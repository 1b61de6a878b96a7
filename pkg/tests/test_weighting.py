import numpy as np
import pytest
from hypothesis import given, strategies as st

from snrdistill.weighting import (
    STRATEGY_NAMES,
    WeightKind,
    WeightStrategy,
    strategy_from_name,
    weight,
)

BSA = WeightStrategy(WeightKind.BALANCED_SNR_AWARE, gamma=5.0)
MIN_SNR = WeightStrategy(WeightKind.MIN_SNR_GAMMA, gamma=5.0)
TRUNC = WeightStrategy(WeightKind.TRUNCATED_SNR)
PLUS_ONE = WeightStrategy(WeightKind.SNR_PLUS_ONE)
EPS = WeightStrategy(WeightKind.EPSILON_SNR)


def test_closed_form_spot_values():
    assert weight(BSA, 100.0) == 5.0
    assert weight(BSA, 0.0) == 1.0
    assert weight(BSA, 3.0) == 4.0
    assert weight(MIN_SNR, 0.0) == 0.0
    assert weight(TRUNC, 0.3) == 1.0
    assert weight(PLUS_ONE, 0.3) == 1.3
    assert weight(EPS, 0.3) == 0.3


def test_boundary_behavior_min_snr_vs_bsa():
    # the zero-weight failure of min-snr at snr = 0 vs the bsa floor of 1
    assert weight(MIN_SNR, 0.0) == 0.0
    assert weight(BSA, 0.0) == 1.0


@given(st.floats(min_value=0.0, max_value=1e12, allow_nan=False))
def test_bsa_equals_min_snr_plus_one_capped(snr):
    assert weight(BSA, snr) == min(weight(MIN_SNR, snr) + 1.0, 5.0)


@given(st.floats(min_value=0.0, max_value=1e6), st.floats(min_value=0.0, max_value=1e6))
def test_bsa_monotone_non_decreasing(a, b):
    lo, hi = sorted((a, b))
    assert weight(BSA, lo) <= weight(BSA, hi)


def test_bsa_constant_at_gamma_beyond_gamma_minus_one():
    for snr in (4.0, 4.5, 5.0, 50.0, 1e9):
        assert weight(BSA, snr) == 5.0


@given(st.floats(min_value=0.0, max_value=1e12, allow_nan=False))
def test_all_strategies_finite_non_negative(snr):
    for name in STRATEGY_NAMES:
        w = weight(strategy_from_name(name), snr)
        assert np.isfinite(w) and w >= 0.0


@given(st.floats(min_value=0.0, max_value=1e12, allow_nan=False))
def test_bsa_bounded_between_one_and_gamma(snr):
    w = weight(BSA, snr)
    assert 1.0 <= w <= BSA.gamma


def test_vectorized_evaluation_matches_scalars():
    snr = np.array([0.0, 0.3, 1.0, 3.0, 4.0, 5.0, 100.0])
    for name in STRATEGY_NAMES:
        strat = strategy_from_name(name)
        vec = weight(strat, snr)
        np.testing.assert_array_equal(vec, [weight(strat, s) for s in snr])


def test_invalid_snr_rejected():
    for bad in (-0.1, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            weight(BSA, bad)
    with pytest.raises(ValueError):
        weight(BSA, np.array([0.5, -1.0]))


def test_invalid_gamma_rejected():
    with pytest.raises(ValueError):
        WeightStrategy(WeightKind.BALANCED_SNR_AWARE, gamma=0.0)
    with pytest.raises(ValueError):
        WeightStrategy(WeightKind.MIN_SNR_GAMMA, gamma=float("nan"))


def test_strategy_names_round_trip():
    assert STRATEGY_NAMES == ("eps-snr", "trunc-snr", "snr-plus-one", "min-snr", "bsa")
    for name in STRATEGY_NAMES:
        assert strategy_from_name(name, gamma=7.0).kind.value == name
    with pytest.raises(ValueError):
        strategy_from_name("nope")
