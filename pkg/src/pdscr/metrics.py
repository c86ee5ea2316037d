"""
Front quality: exact two-objective hypervolume and the normalization used
to compare fronts from different cases on one reference point
"""

from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple, Any

import numpy as np

from .log import logger

Point = Tuple[float, float]

# reference after normalization: 10% past the worst first objective, J6 = 1
REFERENCE: Point = (1.1, 1.0)


def hypervolume(points: Sequence[Sequence[float]], reference: Sequence[float]) -> float:
    """
    Area dominated by the points (both objectives minimized) and bounded by
    the reference point. Points beyond the reference are left out.

    >>> hypervolume([(1, 1)], (2, 2))
    1.0
    >>> hypervolume([(0, 2), (2, 0), (2, 0)], (3, 3))
    5.0
    """
    rx, ry = float(reference[0]), float(reference[1])
    inside: List[Point] = []
    for p in points:
        x, y = float(p[0]), float(p[1])
        if x > rx or y > ry:
            logger.warning(f"point ({x:.6g}, {y:.6g}) lies beyond the reference ({rx:.6g}, {ry:.6g}), excluded")
            continue
        inside.append((x, y))
    if not inside:
        return 0.0
    arr = np.array(sorted(inside))
    area = 0.0
    best_y = ry
    # sweep along the first objective; each point adds the strip up to the next x
    for i, (x, y) in enumerate(arr):
        next_x = arr[i + 1, 0] if i + 1 < len(arr) else rx
        best_y = min(best_y, y)
        area += (next_x - x) * (ry - best_y)
    return float(area)


def hypervolume_mc(
    points: Sequence[Sequence[float]],
    reference: Sequence[float],
    samples: int = 1_000_000,
    seed: int = 0,
) -> float:
    """Monte Carlo estimate of the same area, over the box [min point, reference]"""
    arr = np.asarray(points, dtype=float)
    ref = np.asarray(reference, dtype=float)
    arr = arr[np.all(arr <= ref, axis=1)]
    if arr.size == 0:
        return 0.0
    lo = arr.min(axis=0)
    rng = np.random.default_rng(seed)
    draws = lo + (ref - lo) * rng.random((samples, 2))
    dominated = np.zeros(samples, dtype=bool)
    for p in arr:
        dominated |= np.all(draws >= p, axis=1)
    return float(dominated.mean() * np.prod(ref - lo))


def normalize_fronts(
    fronts: Mapping[str, Sequence[Sequence[float]]]
) -> Tuple[Dict[str, List[Point]], Point, float]:
    """
    Divides the first objective by its largest value across all fronts
    (1 when that is zero), so every front shares the reference (1.1, 1.0)

    >>> normalize_fronts({"a": [(10.0, 0.5)], "b": [(5.0, 0.2)]})
    ({'a': [(1.0, 0.5)], 'b': [(0.5, 0.2)]}, (1.1, 1.0), 10.0)
    """
    firsts = [float(p[0]) for pts in fronts.values() for p in pts]
    scale = max(firsts) if firsts else 0.0
    if scale <= 0:
        scale = 1.0
    scaled = {name: [(float(p[0]) / scale, float(p[1])) for p in pts] for name, pts in fronts.items()}
    return scaled, REFERENCE, scale


@dataclass
class FrontQuality:
    case: str
    hypervolume: float
    reference: Point
    scale: float
    points: List[Point]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "hypervolume": self.hypervolume,
            "reference": list(self.reference),
            "scale": self.scale,
            "points": [list(p) for p in self.points],
        }


def front_quality(fronts: Mapping[str, Sequence[Sequence[float]]]) -> Dict[str, FrontQuality]:
    """Hypervolume of each front after common normalization"""
    scaled, reference, scale = normalize_fronts(fronts)
    return {
        name: FrontQuality(name, hypervolume(pts, reference), reference, scale, pts) for name, pts in scaled.items()
    }
