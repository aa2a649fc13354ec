from pytest import approx

from plox.lagrange.utilities import is_uniform, max_pairwise_gap, partition, window_iterator


def test_partition():
    assert partition([1, 2, 3, 4], lambda x: x % 2 == 0) == ([2, 4], [1, 3])
    assert partition([], lambda x: True) == ([], [])
    assert partition(["rk4", "implicit_midpoint"], lambda m: m == "rk4") == (
        ["rk4"],
        ["implicit_midpoint"],
    )


def test_window_iterator():
    assert list(window_iterator(["a", "b", "c", "d"])) == [("a", "b"), ("b", "c"), ("c", "d")]
    assert list(window_iterator(["a", "b", "c"])) == [("a", "b"), ("b", "c")]
    assert list(window_iterator(["a", "b", "c", "d"], 57)) == [("a", "b", "c", "d")]
    assert list(window_iterator(["a", "b", "c", "d"], 3)) == [("a", "b", "c"), ("b", "c", "d")]
    assert list(window_iterator([])) == []


def test_max_pairwise_gap():
    assert max_pairwise_gap([]) == 0.0
    assert max_pairwise_gap([3.0]) == 0.0
    assert max_pairwise_gap([1.0, -2.0, 0.5]) == approx(3.0)


def test_is_uniform():
    assert is_uniform([])
    assert is_uniform([0.0])
    assert is_uniform([0.0, 0.1, 0.2, 0.30000000000000004])
    assert is_uniform([100.0 + 0.01 * k for k in range(50)])
    assert not is_uniform([0.0, 0.1, 0.3])
    assert not is_uniform([0.0, 0.0, 0.0])
    assert not is_uniform([0.2, 0.1, 0.0])
