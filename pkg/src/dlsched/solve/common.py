"""Lane view of an instance shared by the solvers.

A lane is one (site, drone type, period) combination that can host a drone.
Within a lane trips are flown back to back: the j-th trip of a sequence
returns at ``start + sum_{l<=j} (s + p_l)``. Because every disutility curve is
non-decreasing, this earliest-slot timing is optimal for a fixed sequence, so
the solvers only need to choose lanes and sequences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core import Instance, ParametricCurve, TwoPeriodConfig, overnight_penalty
from ..schedule import Schedule, Trip

INF = math.inf


@dataclass(frozen=True)
class Lane:
    index: int
    site: int
    drone_type: int
    period: int
    start: int  # slots elapsed before the period starts
    end: int  # last usable return slot
    prow: Tuple[int, ...]  # roundtrip per demand, 0 if out of range


class Costs:
    """Fast disutility evaluation (scalar and vectorised) including overnight penalties."""

    def __init__(self, instance: Instance, config: Optional[TwoPeriodConfig]):
        self.instance = instance
        self.split = instance.grid.slots_per_period if config is not None else math.inf
        self.curves = [d.curve for d in instance.demands]
        self.penalty = [
            overnight_penalty(c, instance.grid, config) if config is not None else 0.0 for c in self.curves
        ]
        self.parametric = all(isinstance(c, ParametricCurve) for c in self.curves)
        if self.parametric:
            self.A = np.array([c.A for c in self.curves]) / 1e4
            self.B = np.array([c.B for c in self.curves])
            self.D = np.array([float(c.due_slot) for c in self.curves])
            self.Bn = self.B / (100.0 - self.D) ** 2
        self.pen = np.array(self.penalty)

    def __call__(self, k: int, t: float) -> float:
        v = self.curves[k](t)
        if t > self.split:
            v += self.penalty[k]
        return v

    def rows(self, ks: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Disutility of demand ``ks[r]`` at each time in row ``t[r]``."""
        if self.parametric:
            A = self.A[ks][:, None]
            D = self.D[ks][:, None]
            late = np.maximum(t - D, 0.0)
            out = A * t * t + self.Bn[ks][:, None] * late * late
        else:
            out = np.empty_like(t, dtype=float)
            for r, k in enumerate(ks):
                c = self.curves[k]
                # probe times past the table only occur in masked-out bound entries
                row = np.clip(t[r], 0.0, c.horizon) if hasattr(c, "horizon") else t[r]
                out[r] = c.many(row)
        if self.split != math.inf:
            out = out + np.where(t > self.split, self.pen[ks][:, None], 0.0)
        return out


class View:
    def __init__(self, instance: Instance, config: Optional[TwoPeriodConfig] = None):
        grid = instance.grid
        if grid.periods == 2 and config is None:
            raise ValueError("two-period instance needs a TwoPeriodConfig")
        self.instance = instance
        self.config = config if grid.periods == 2 else None
        self.s = instance.setup_slots
        self.periods = grid.periods
        self.types = instance.fleet.active_types
        self.counts = instance.fleet.counts
        self.costs = Costs(instance, self.config)
        lanes = []
        for d in range(1, self.periods + 1):
            for i in range(instance.m):
                for tau in self.types:
                    lanes.append(
                        Lane(len(lanes), i, tau, d, grid.period_start(d), grid.period_end(d), instance.roundtrip[tau][i])
                    )
        self.lanes: List[Lane] = lanes
        self.n = instance.n
        self.m = instance.m

    def sequence_cost(self, lane: Lane, seq: Sequence[int]) -> float:
        """Cost of flying ``seq`` from ``lane`` at earliest slots; ``inf`` if it overruns."""
        t = lane.start
        total = 0.0
        for k in seq:
            p = lane.prow[k]
            if not p:
                return INF
            t += self.s + p
            if t > lane.end:
                return INF
            total += self.costs(k, t - p / 2)
        return total

    def sequence_eval(self, lane: Lane, seq: Sequence[int]) -> Tuple[int, float]:
        """(overrun slots, cost) for a sequence, letting trips spill past the horizon."""
        t = lane.start
        total = 0.0
        over = 0
        for k in seq:
            p = lane.prow[k]
            if not p:
                return (10**9, INF)
            t += self.s + p
            if t > lane.end:
                over += t - lane.end
            else:
                total += self.costs(k, t - p / 2)
        return over, total

    def trips(self, lane: Lane, seq: Sequence[int]) -> List[Trip]:
        out = []
        t = lane.start
        for k in seq:
            p = lane.prow[k]
            t += self.s + p
            out.append(Trip.make(lane.site, k, t, p, lane.drone_type, lane.period))
        return out

    def schedule(self, sequences: Dict[int, Sequence[int]]) -> Schedule:
        """Turn lane sequences into a schedule, padding site selections to the fleet size."""
        used = [[] for _ in range(self.periods)]
        trips = []
        for li, seq in sorted(sequences.items()):
            if not seq:
                continue
            lane = self.lanes[li]
            used[lane.period - 1].append((lane.site, lane.drone_type))
            trips.extend(self.trips(lane, seq))
        selected = pad_selection(self.instance, used, self.config)
        return Schedule(tuple(tuple(s) for s in selected), tuple(trips))


def relocations_needed(u1: set, u2: set, p: int, m: int) -> int:
    """Fewest overnight moves for any completion of used site sets ``u1``/``u2`` to size ``p``."""
    inter = len(u1 & u2)
    a = len(u1 - u2)
    b = len(u2 - u1)
    f1 = p - len(u1)
    f2 = p - len(u2)
    if f1 < 0 or f2 < 0:
        return 10**9
    x = min(b, f1)
    y = min(a, f2)
    free = m - len(u1 | u2)
    z = max(0, min(f1 - x, f2 - y, free))
    return p - (inter + x + y + z)


def pad_selection(instance: Instance, used: List[List[Tuple[int, int]]], config: Optional[TwoPeriodConfig]):
    """Complete used (site, type) sets to exactly the fleet counts, lowest indices first."""
    counts = instance.fleet.counts
    types = instance.fleet.active_types
    m = instance.m
    if len(used) == 1:
        sel = set(used[0])
        taken = {i for i, _ in sel}
        for tau in types:
            have = sum(1 for _, t in sel if t == tau)
            for i in range(m):
                if have >= counts[tau]:
                    break
                if i not in taken:
                    sel.add((i, tau))
                    taken.add(i)
                    have += 1
        return [sorted(sel)]

    if len(types) != 1:
        raise NotImplementedError("two-period padding supports a single active drone type")
    tau = types[0]
    p = counts[tau]
    u1 = {i for i, _ in used[0]}
    u2 = {i for i, _ in used[1]}
    y1, y2 = set(u1), set(u2)
    for i in sorted(u2 - u1):
        if len(y1) < p:
            y1.add(i)
    for i in sorted(u1 - u2):
        if len(y2) < p:
            y2.add(i)
    for i in range(m):
        if len(y1) >= p or len(y2) >= p:
            break
        if i not in y1 and i not in y2 and i not in u1 | u2:
            y1.add(i)
            y2.add(i)
    for y in (y1, y2):
        for i in range(m):
            if len(y) >= p:
                break
            y.add(i)
    return [sorted((i, tau) for i in y1), sorted((i, tau) for i in y2)]
