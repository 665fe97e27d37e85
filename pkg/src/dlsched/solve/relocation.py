"""Overnight platform moves between the day-1 and day-2 site sets."""
from __future__ import annotations

from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..core import Instance
from ..schedule import Schedule

RoadCost = Union[np.ndarray, Sequence[Sequence[float]], Callable[[int, int], float]]


class CardinalityError(ValueError):
    pass


def _cost_fn(road_cost: RoadCost) -> Callable[[int, int], float]:
    if callable(road_cost):
        return road_cost
    arr = np.asarray(road_cost, dtype=float)
    return lambda a, b: float(arr[a, b])


def relocation_matching(
    day1_sites: Iterable[int], day2_sites: Iterable[int], road_cost: RoadCost
) -> Tuple[List[Tuple[int, int]], float]:
    """Minimum-cost pairing of day-1-only sites with day-2-only sites.

    Sites used on both days stay put and are not listed. Returns the moves as
    ``(from_site, to_site)`` pairs sorted by origin, and their total cost.
    """
    d1, d2 = set(day1_sites), set(day2_sites)
    if len(d1) != len(d2):
        raise CardinalityError(f"day 1 has {len(d1)} sites but day 2 has {len(d2)}")
    src = sorted(d1 - d2)
    dst = sorted(d2 - d1)
    if not src:
        return [], 0.0
    cost = _cost_fn(road_cost)
    C = np.array([[cost(a, b) for b in dst] for a in src], dtype=float)
    rows, cols = linear_sum_assignment(C)
    moves = sorted((src[r], dst[c]) for r, c in zip(rows, cols))
    return moves, float(C[rows, cols].sum())


def euclidean_road_cost(instance: Instance) -> np.ndarray:
    xy = np.array([[s.x, s.y] for s in instance.sites], dtype=float)
    return np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])


def attach_relocations(instance: Instance, schedule: Schedule, road_cost: Optional[RoadCost] = None) -> Tuple[Schedule, float]:
    """Return a copy of a two-period schedule with its relocation moves filled in."""
    if len(schedule.selected) != 2:
        return schedule, 0.0
    if road_cost is None:
        road_cost = euclidean_road_cost(instance)
    d1 = {i for i, _ in schedule.selected[0]}
    d2 = {i for i, _ in schedule.selected[1]}
    moves, total = relocation_matching(d1, d2, road_cost)
    return Schedule(schedule.selected, schedule.trips, tuple(moves)), total
