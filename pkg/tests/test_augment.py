import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from specdyn.augment import ReflectanceSeries, augment, extract_reflectance
from specdyn.errors import InsufficientHistoryError


def test_left_differences():
    np.testing.assert_array_equal(augment(ReflectanceSeries([1.0, 2.0, 4.0])), [[2, 1], [4, 2]])


def test_constant_series():
    np.testing.assert_array_equal(augment(ReflectanceSeries([0.3, 0.3, 0.3])), [[0.3, 0], [0.3, 0]])


def test_two_bands_single_difference():
    np.testing.assert_array_equal(augment(ReflectanceSeries([[0, 0], [1, 3]])), [[1, 3, 1, 3]])


def test_too_short():
    with pytest.raises(InsufficientHistoryError):
        augment(ReflectanceSeries([[0.1, 0.2]]))


def test_extract_reflectance():
    np.testing.assert_array_equal(extract_reflectance([0.3, 0.4, 9, 9]), [0.3, 0.4])
    np.testing.assert_array_equal(extract_reflectance(np.zeros(6)), np.zeros(3))


@given(arrays(float, st.tuples(st.integers(2, 30), st.integers(1, 6)), elements=st.floats(0, 1)))
def test_round_trip_and_consistency(samples):
    X = augment(ReflectanceSeries(samples))
    L = samples.shape[1]
    assert X.shape == (samples.shape[0] - 1, 2 * L)
    np.testing.assert_array_equal(extract_reflectance(X), samples[1:])
    np.testing.assert_array_equal(X[:, L:], samples[1:] - samples[:-1])


def test_higher_order_hook():
    s = np.array([0.0, 1.0, 4.0, 9.0])
    X = augment(s, order=2)
    np.testing.assert_array_equal(X, [[4, 3, 2], [9, 5, 2]])
