import numpy as np

from srbp2d.rng import substream


def test_same_indices_same_stream():
    a = substream(42, 3, 7).standard_normal(8)
    b = substream(42, 3, 7).standard_normal(8)
    assert np.array_equal(a, b)


def test_different_indices_differ():
    a = substream(42, 0).standard_normal(8)
    b = substream(42, 1).standard_normal(8)
    c = substream(43, 0).standard_normal(8)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_index_order_matters():
    a = substream(7, 1, 2).standard_normal(4)
    b = substream(7, 2, 1).standard_normal(4)
    assert not np.array_equal(a, b)


def test_streams_look_standard_normal():
    x = substream(0, 99).standard_normal(200_000)
    assert abs(x.mean()) < 0.01
    assert abs(x.std() - 1.0) < 0.01
