import numpy as np
import pytest

from prony_bath import ConfigError, ExponentialSeries, conjugate_pairing_defect


def test_evaluate_single_term():
    s = ExponentialSeries(np.array([2.0 + 0j]), np.array([3.0 + 0j]))
    t = np.array([0.0, 0.5, 1.0])
    np.testing.assert_allclose(s.evaluate(t), 2.0 * np.exp(-3.0 * t), rtol=1e-14)


def test_evaluate_sums_terms():
    s = ExponentialSeries(np.array([1.0, 1j]), np.array([1.0, 2.0 + 1j]))
    t = 0.7
    expected = np.exp(-0.7) + 1j * np.exp(-(2.0 + 1j) * 0.7)
    assert s.evaluate(t) == pytest.approx(expected, rel=1e-14)


def test_empty_series_evaluates_to_zero():
    s = ExponentialSeries(np.array([], dtype=complex), np.array([], dtype=complex))
    assert len(s) == 0
    assert s.evaluate(np.array([0.0, 1.0])).tolist() == [0.0, 0.0]


def test_growth_rejected():
    with pytest.raises(ConfigError):
        ExponentialSeries(np.array([1.0]), np.array([-0.1 + 2j]))


def test_nonfinite_rejected():
    with pytest.raises(ConfigError):
        ExponentialSeries(np.array([np.nan]), np.array([1.0]))


def test_concat_and_scale():
    a = ExponentialSeries(np.array([1.0]), np.array([1.0]))
    b = ExponentialSeries(np.array([2.0]), np.array([3.0]))
    c = a.concat(b).scaled(1j)
    assert len(c) == 2
    assert c.evaluate(0.0) == pytest.approx(3j)


def test_records_round_trip():
    s = ExponentialSeries(np.array([1.5 - 0.25j, 0.5]), np.array([2.0 + 1j, 7.0]))
    again = ExponentialSeries.from_records(s.to_records())
    np.testing.assert_array_equal(again.eta, s.eta)
    np.testing.assert_array_equal(again.gamma, s.gamma)


def test_malformed_records_rejected():
    with pytest.raises(ConfigError):
        ExponentialSeries.from_records([{"eta_re": 1.0}])


def test_pairing_defect_zero_for_conjugate_pairs():
    s = ExponentialSeries(
        np.array([1.0 + 2j, 1.0 - 2j, 0.5]),
        np.array([3.0 + 1j, 3.0 - 1j, 4.0]),
    )
    assert conjugate_pairing_defect(s) == 0.0


def test_pairing_defect_detects_unpaired_term():
    s = ExponentialSeries(np.array([1.0 + 2j]), np.array([3.0 + 1j]))
    assert conjugate_pairing_defect(s) > 0.1
