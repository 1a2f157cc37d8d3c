import numpy as np

from dynrcm import rng


def test_pure_function_of_keys():
    idx = np.arange(1000)
    a = rng.uniform(7, rng.STREAM_WALK, idx, 3)
    b = rng.uniform(7, rng.STREAM_WALK, idx[::-1], 3)[::-1]
    assert np.array_equal(a, b)
    assert rng.uniform(7, rng.STREAM_WALK, 5, 3) == a[5]


def test_uniform_range_and_moments():
    u = rng.uniform(1, rng.STREAM_SAMPLE, np.arange(200000))
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.005
    assert abs(u.var() - 1 / 12) < 0.002


def test_normal_and_exponential_moments():
    z = rng.normal(2, rng.STREAM_NOISE, np.arange(200000))
    assert abs(z.mean()) < 0.01 and abs(z.var() - 1) < 0.02
    e = rng.exponential(3, rng.STREAM_TIME, np.arange(200000))
    assert e.min() >= 0 and abs(e.mean() - 1) < 0.01


def test_streams_and_seeds_differ():
    idx = np.arange(100)
    assert not np.array_equal(rng.uniform(1, 1, idx), rng.uniform(1, 2, idx))
    assert not np.array_equal(rng.uniform(1, 1, idx), rng.uniform(2, 1, idx))
    assert rng.child_seed(5, 1) != rng.child_seed(5, 2)


def test_non_integer_keys_rejected():
    import pytest
    with pytest.raises(TypeError):
        rng.hash_keys(1, np.array([0.5]))
