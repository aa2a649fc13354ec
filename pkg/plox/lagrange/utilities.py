"""Small sequence helpers shared by the solvers, the verification pipeline and the CLI.

.. code-block:: python

    from plox.lagrange import utilities

Nothing in here knows about mechanics; these are the generic bits that several modules
need often enough to warrant a tested home.
"""

from __future__ import annotations

from collections.abc import Generator, Iterable, Sequence
from itertools import combinations, islice
from logging import getLogger
from typing import Callable, TypeVar

logger = getLogger(__name__)

_T = TypeVar("_T")


def window_iterator(seq: Iterable[_T], n: int = 2) -> Generator[tuple[_T, ...], None, None]:
    """Return a sliding window (of width n) over data from the iterable.

    s -> (s0,s1,...s[n-1]), (s1,s2,...,sn), ...

    Used to walk the panels ``[t_k, t_k+1]`` of a time grid or a discrete path.

    Example:

        >>> list(window_iterator([0.0, 0.5, 1.0]))
        [(0.0, 0.5), (0.5, 1.0)]
        >>> list(window_iterator(range(4), 3))
        [(0, 1, 2), (1, 2, 3)]

    Args:
        seq: The iterable to generate windows from.
        n: The width of window to generate; default is 2.

    Returns:
        typing.Generator[tuple[_T, ...], None, None]: Windows of width ``n``; a single
        shorter window when the input has fewer than ``n`` items.
    """
    it = iter(seq)
    result = tuple(islice(it, n))
    if len(result) < n:
        if result:
            yield result
        return
    yield result
    for elem in it:
        result = result[1:] + (elem,)
        yield result


def partition(items: Iterable[_T], key_fn: Callable[[_T], bool]) -> tuple[list[_T], list[_T]]:
    """Split items in two lists by a predicate, keeping their order.

    Example:

        >>> partition([1, 2, 3, 4], lambda x: x % 2 == 0)
        ([2, 4], [1, 3])

    Args:
        items: Items to split.
        key_fn: Predicate; items for which it holds go to the first list.

    Returns:
        tuple[list[_T], list[_T]]: Matching and non matching items.
    """
    in_g: list[_T] = []
    out_g: list[_T] = []
    for item in items:
        (in_g if key_fn(item) else out_g).append(item)
    return in_g, out_g


def max_pairwise_gap(values: Sequence[float]) -> float:
    """Largest ``|a - b|`` over all pairs; ``0.0`` for fewer than two values."""
    return max((abs(a - b) for a, b in combinations(values, 2)), default=0.0)


def is_uniform(times: Sequence[float], tol: float = 1e-12) -> bool:
    """Check that a time grid is strictly increasing with a uniform step.

    The step is compared against the mean step with tolerance ``tol`` scaled by the
    largest magnitude on the grid.
    """
    if len(times) < 2:
        return True
    steps = [b - a for a, b in window_iterator(times)]
    if min(steps) <= 0.0:
        return False
    mean = (times[-1] - times[0]) / (len(times) - 1)
    scale = max(1.0, abs(times[0]), abs(times[-1]))
    return all(abs(s - mean) <= tol * scale for s in steps)
