"""
Dominance and compromise selection for two minimized objectives
"""

from typing import List, Sequence, Tuple

import numpy as np

Point = Tuple[float, float]


def dominates(a: Sequence[float], b: Sequence[float], tol: float = 0.0) -> bool:
    """
    a is no worse than b everywhere and strictly better somewhere

    >>> dominates((1, 2), (1, 3)), dominates((1, 2), (1, 2)), dominates((0, 5), (1, 2))
    (True, False, False)
    """
    no_worse = all(x <= y + tol for x, y in zip(a, b))
    better = any(x < y - tol for x, y in zip(a, b))
    return no_worse and better


def non_dominated(points: Sequence[Sequence[float]], tol: float = 0.0) -> List[int]:
    """
    Indices of the points no other point dominates; of exact duplicates only
    the first is kept. Result is sorted by the second objective, then the first.

    >>> non_dominated([(3, 1), (1, 3), (2, 2), (3, 3), (1, 3)])
    [0, 2, 1]
    """
    keep: List[int] = []
    for i, p in enumerate(points):
        if any(dominates(q, p, tol) for j, q in enumerate(points) if j != i):
            continue
        if any(np.allclose(points[k], p, rtol=0.0, atol=tol) for k in keep):
            continue
        keep.append(i)
    return sorted(keep, key=lambda i: (points[i][1], points[i][0]))


def pick_compromise(points: Sequence[Sequence[float]]) -> int:
    """
    Index of the point closest to the ideal point in normalized Chebyshev
    distance, ties going to the lower first objective

    >>> pick_compromise([(0, 1), (0.5, 0.5), (1, 0)])
    1
    """
    if len(points) == 0:
        raise ValueError("cannot pick a compromise from an empty front")
    arr = np.asarray(points, dtype=float)
    lo = arr.min(axis=0)
    span = arr.max(axis=0) - lo
    span[span == 0] = 1.0
    dist = np.max((arr - lo) / span, axis=1)
    best = float(dist.min())
    ties = [i for i in range(len(arr)) if dist[i] <= best + 1e-12]
    return min(ties, key=lambda i: (arr[i, 0], i))
