"""Time-slot binary ILP models.

``x_{i,t,k,tau}`` is 1 when the drone of type ``tau`` at site ``i`` returns at
the end of slot ``t`` after serving demand ``k``; ``y_{i,d,tau}`` selects site
``i`` for type ``tau`` in period ``d``; ``q_{i,tau}`` flags sites used in only
one of the two periods. Variables that are forced to zero (out of range, or
returning too early in a period) are never created.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .core import Instance, TwoPeriodConfig, eval_disutility
from .schedule import Schedule, Trip

ROW_FAMILIES = ("Assign", "Capacity", "Link", "Count", "FirstFlight", "RelocLB", "RelocBudget", "TypeCount", "SymBreak")


class ModelBuildError(ValueError):
    pass


class VarKey(NamedTuple):
    kind: str  # "x", "y" or "q"
    site: int
    slot: int  # return slot for x, period for y, 0 for q
    demand: int  # -1 for y and q
    drone_type: int

    @property
    def name(self) -> str:
        if self.kind == "x":
            return f"x_{self.site}_{self.slot}_{self.demand}_{self.drone_type}"
        if self.kind == "y":
            return f"y_{self.site}_{self.slot}_{self.drone_type}"
        return f"q_{self.site}_{self.drone_type}"


def X(i: int, t: int, k: int, tau: int = 0) -> VarKey:
    return VarKey("x", i, t, k, tau)


def Y(i: int, period: int = 1, tau: int = 0) -> VarKey:
    return VarKey("y", i, period, -1, tau)


def Q(i: int, tau: int = 0) -> VarKey:
    return VarKey("q", i, 0, -1, tau)


@dataclass(frozen=True)
class Row:
    coefs: Tuple[Tuple[int, float], ...]
    sense: str  # "<=", "=", ">="
    rhs: float
    family: str


@dataclass
class LinearModel:
    columns: List[VarKey]
    objective: List[float]
    rows: List[Row]
    periods: int = 1
    index: Dict[VarKey, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {key: j for j, key in enumerate(self.columns)}

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def column_counts(self) -> Dict[str, int]:
        return dict(Counter(c.kind for c in self.columns))

    def family_counts(self) -> Dict[str, int]:
        return dict(Counter(r.family for r in self.rows))

    def summary(self) -> Dict[str, object]:
        cols = self.column_counts()
        return {
            "columns": self.n_columns,
            "x_columns": cols.get("x", 0),
            "y_columns": cols.get("y", 0),
            "q_columns": cols.get("q", 0),
            "rows": len(self.rows),
            "rows_by_family": dict(sorted(self.family_counts().items())),
            "nonzeros": sum(len(r.coefs) for r in self.rows),
        }

    def matrix(self):
        """Constraint matrix as scipy CSR plus row lower/upper bounds."""
        from scipy.sparse import csr_matrix

        data, ri, ci = [], [], []
        lo = np.empty(len(self.rows))
        hi = np.empty(len(self.rows))
        for r, row in enumerate(self.rows):
            for j, a in row.coefs:
                ri.append(r)
                ci.append(j)
                data.append(a)
            lo[r] = row.rhs if row.sense in ("=", ">=") else -np.inf
            hi[r] = row.rhs if row.sense in ("=", "<=") else np.inf
        A = csr_matrix((data, (ri, ci)), shape=(len(self.rows), self.n_columns))
        return A, lo, hi

    def is_feasible(self, x: Sequence[float], tol: float = 1e-9) -> bool:
        for row in self.rows:
            lhs = sum(a * x[j] for j, a in row.coefs)
            if row.sense == "<=" and lhs > row.rhs + tol:
                return False
            if row.sense == ">=" and lhs < row.rhs - tol:
                return False
            if row.sense == "=" and abs(lhs - row.rhs) > tol:
                return False
        return True

    def feasible_many(self, xs: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Row-wise feasibility for a batch of 0/1 vectors (one per row of ``xs``)."""
        A, lo, hi = self.matrix()
        lhs = (A @ np.asarray(xs, dtype=float).T).T
        return np.all((lhs >= lo - tol) & (lhs <= hi + tol), axis=1)

    def value(self, x: Sequence[float]) -> float:
        return float(sum(c * v for c, v in zip(self.objective, x) if v))


def big_m(p_ik: int, s: int) -> int:
    """Capacity-row constant: at most ``p_ik + 1`` trips fit in the exclusion window."""
    return p_ik + 1


def _units(instance: Instance) -> Tuple[int, ...]:
    return instance.fleet.active_types


def _build(
    instance: Instance,
    config: Optional[TwoPeriodConfig],
    types: Sequence[int],
    symmetry_breaking: bool,
) -> LinearModel:
    if instance.uncoverable:
        raise ModelBuildError(f"uncovered demands: {list(instance.uncovered_demands)}")
    grid = instance.grid
    s = instance.setup_slots
    periods = grid.periods
    T = grid.total_slots

    cols: List[VarKey] = []
    for i in range(instance.m):
        for t in range(1, T + 1):
            d = grid.period_of(t)
            start = grid.period_start(d)
            for k in range(instance.n):
                for tau in types:
                    p = instance.p_ik(tau, i, k)
                    if p and t >= start + p + s:
                        cols.append(X(i, t, k, tau))
    for i in range(instance.m):
        for d in range(1, periods + 1):
            for tau in types:
                cols.append(Y(i, d, tau))
    if periods == 2:
        for i in range(instance.m):
            for tau in types:
                cols.append(Q(i, tau))
    index = {c: j for j, c in enumerate(cols)}

    obj = []
    for c in cols:
        if c.kind == "x":
            p = instance.p_ik(c.drone_type, c.site, c.demand)
            obj.append(eval_disutility(instance.demands[c.demand], c.slot - p / 2, grid, config))
        else:
            obj.append(0.0)

    rows: List[Row] = []
    by_demand = defaultdict(list)
    # returns per (site, type, slot) for window sums
    lane = defaultdict(list)
    for j, c in enumerate(cols):
        if c.kind == "x":
            by_demand[c.demand].append(j)
            lane[(c.site, c.drone_type, c.slot)].append((c.demand, j))

    for k in range(instance.n):
        rows.append(Row(tuple((j, 1.0) for j in by_demand[k]), "=", 1.0, "Assign"))

    for j, c in enumerate(cols):
        if c.kind != "x":
            continue
        p = instance.p_ik(c.drone_type, c.site, c.demand)
        M = big_m(p, s)
        coefs = []
        for t in range(max(1, c.slot - p - s + 1), c.slot + 1):
            for h, jj in lane.get((c.site, c.drone_type, t), ()):
                if h != c.demand:
                    coefs.append((jj, 1.0))
        coefs.append((j, float(M)))
        rows.append(Row(tuple(coefs), "<=", float(M), "Capacity"))

    for j, c in enumerate(cols):
        if c.kind == "x":
            yj = index[Y(c.site, grid.period_of(c.slot), c.drone_type)]
            rows.append(Row(((j, 1.0), (yj, -1.0)), "<=", 0.0, "Link"))

    mixed = len(types) > 1
    for d in range(1, periods + 1):
        for tau in types:
            coefs = tuple((index[Y(i, d, tau)], 1.0) for i in range(instance.m))
            rows.append(Row(coefs, "=", float(instance.fleet.counts[tau]), "TypeCount" if mixed else "Count"))
        if mixed:
            for i in range(instance.m):
                rows.append(Row(tuple((index[Y(i, d, tau)], 1.0) for tau in types), "<=", 1.0, "Count"))

    if periods == 2:
        for i in range(instance.m):
            for tau in types:
                q, y1, y2 = index[Q(i, tau)], index[Y(i, 1, tau)], index[Y(i, 2, tau)]
                rows.append(Row(((q, 1.0), (y1, -1.0), (y2, 1.0)), ">=", 0.0, "RelocLB"))
                rows.append(Row(((q, 1.0), (y2, -1.0), (y1, 1.0)), ">=", 0.0, "RelocLB"))
        budget = tuple((index[Q(i, tau)], 1.0) for i in range(instance.m) for tau in types)
        rows.append(Row(budget, "<=", 2.0 * config.relocation_budget, "RelocBudget"))

    if symmetry_breaking and periods == 1:
        for a, b in duplicate_pairs(instance):
            coefs = [(index[Y(b, 1, tau)], 1.0) for tau in types] + [(index[Y(a, 1, tau)], -1.0) for tau in types]
            rows.append(Row(tuple(coefs), "<=", 0.0, "SymBreak"))

    return LinearModel(cols, obj, rows, periods, index)


def duplicate_pairs(instance: Instance) -> List[Tuple[int, int]]:
    """Consecutive copies (a, b) of the same original site with identical data."""
    groups = defaultdict(list)
    for i, o in enumerate(instance.site_origin):
        groups[o].append(i)
    pairs = []
    for members in groups.values():
        for a, b in zip(members, members[1:]):
            same = instance.sites[a].position == instance.sites[b].position and all(
                mat[a] == mat[b] for mat in instance.roundtrip
            )
            if same:
                pairs.append((a, b))
    return sorted(pairs)


def build_single_period(instance: Instance, symmetry_breaking: bool = True) -> LinearModel:
    if instance.grid.periods != 1:
        raise ModelBuildError("single-period model needs a one-period grid")
    types = _units(instance)
    if len(types) != 1:
        raise ModelBuildError("single-period model needs a homogeneous fleet; use build_mixed_fleet")
    return _build(instance, None, types, symmetry_breaking)


def build_two_period(instance: Instance, config: TwoPeriodConfig) -> LinearModel:
    if instance.grid.periods != 2:
        raise ModelBuildError("two-period model needs a two-period grid")
    if config is None:
        raise ModelBuildError("two-period model needs a TwoPeriodConfig")
    return _build(instance, config, _units(instance), False)


def build_mixed_fleet(
    instance: Instance, config: Optional[TwoPeriodConfig] = None, symmetry_breaking: bool = True
) -> LinearModel:
    if len(instance.fleet.drone_types) < 2:
        raise ModelBuildError("mixed-fleet model needs two drone types")
    if instance.grid.periods == 2 and config is None:
        raise ModelBuildError("two-period model needs a TwoPeriodConfig")
    return _build(instance, config if instance.grid.periods == 2 else None, _units(instance), symmetry_breaking)


def build_model(instance: Instance, config: Optional[TwoPeriodConfig] = None) -> LinearModel:
    """Pick the right builder for the instance's grid and fleet."""
    if len(_units(instance)) > 1:
        return build_mixed_fleet(instance, config)
    if instance.grid.periods == 2:
        return build_two_period(instance, config)
    return build_single_period(instance)


# -- schedule <-> vector ----------------------------------------------------


def decode(model: LinearModel, instance: Instance, x: Sequence[float]) -> Schedule:
    selected = [[] for _ in range(model.periods)]
    trips = []
    for j, c in enumerate(model.columns):
        if x[j] < 0.5:
            continue
        if c.kind == "y":
            selected[c.slot - 1].append((c.site, c.drone_type))
        elif c.kind == "x":
            p = instance.p_ik(c.drone_type, c.site, c.demand)
            trips.append(Trip.make(c.site, c.demand, c.slot, p, c.drone_type, instance.grid.period_of(c.slot)))
    return Schedule(tuple(tuple(s) for s in selected), tuple(trips))


def encode(model: LinearModel, schedule: Schedule) -> np.ndarray:
    """Indicator vector of a schedule; q columns take their smallest valid value."""
    x = np.zeros(model.n_columns)
    for t in schedule.trips:
        x[model.index[X(t.site, t.return_slot, t.demand, t.drone_type)]] = 1
    for d, sel in enumerate(schedule.selected, start=1):
        for i, tau in sel:
            x[model.index[Y(i, d, tau)]] = 1
    if model.periods == 2:
        moved = set(schedule.selected[0]) ^ set(schedule.selected[1])
        for i, tau in moved:
            x[model.index[Q(i, tau)]] = 1
    return x


# -- LP text format ---------------------------------------------------------


def _num(a: float) -> str:
    if a == int(a) and abs(a) < 1e15:
        return str(int(a))
    return format(a, ".17g")


def _terms(coefs: Iterable[Tuple[int, float]], names: List[str]) -> List[str]:
    out = []
    for n, (j, a) in enumerate(coefs):
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        body = names[j] if mag == 1 else f"{_num(mag)} {names[j]}"
        if n == 0:
            out.append(body if sign == "+" else f"- {body}")
        else:
            out.append(f"{sign} {body}")
    return out


def _wrap(head: str, terms: List[str], tail: str, width: int = 8) -> List[str]:
    lines = []
    for n in range(0, max(len(terms), 1), width):
        chunk = " ".join(terms[n : n + width])
        lines.append(("   " if n else f" {head}") + " " + chunk)
    lines[-1] += tail
    return lines


def lp_text(model: LinearModel) -> str:
    names = [c.name for c in model.columns]
    out = ["\\ drone location and scheduling time-slot model", "Minimize"]
    obj = [(j, a) for j, a in enumerate(model.objective) if a != 0]
    out += _wrap("obj:", _terms(obj, names) or ["0 " + names[0]], "")
    out.append("Subject To")
    seen = Counter()
    for row in model.rows:
        seen[row.family] += 1
        label = f"{row.family.lower()}_{seen[row.family]}:"
        coefs = list(row.coefs) or [(0, 0.0)]
        terms = _terms(coefs, names) if row.coefs else [f"0 {names[0]}"]
        out += _wrap(label, terms, f" {row.sense} {_num(row.rhs)}")
    out.append("Binaries")
    for n in range(0, len(names), 8):
        out.append(" " + " ".join(names[n : n + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(model: LinearModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_bytes(lp_text(model).encode("ascii"))
    return path


def read_lp_counts(path: Union[str, Path]) -> Dict[str, int]:
    """Count constraints, distinct variables and declared binaries in an LP file."""
    section = None
    rows = 0
    variables = set()
    binaries = set()
    for raw in Path(path).read_text(encoding="ascii").splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("minimize", "maximize", "subject to", "binaries", "bounds", "generals", "end"):
            section = low
            continue
        if section == "subject to" and ":" in line.split()[0]:
            rows += 1
        tokens = line.replace(":", ": ").split()
        for tok in tokens:
            if tok[0].isalpha() and not tok.endswith(":"):
                if section == "binaries":
                    binaries.add(tok)
                variables.add(tok)
    return {"rows": rows, "variables": len(variables), "binaries": len(binaries)}


# -- optional MILP solve ----------------------------------------------------


@dataclass(frozen=True)
class MilpResult:
    status: str  # optimal, feasible, infeasible or unknown
    objective: Optional[float]
    x: Optional[np.ndarray]
    bound: Optional[float]


def solve_milp(model: LinearModel, time_limit: Optional[float] = None) -> MilpResult:
    """Solve with scipy's HiGHS MILP interface."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    A, lo, hi = model.matrix()
    options = {"time_limit": time_limit} if time_limit else {}
    res = milp(
        c=np.asarray(model.objective),
        constraints=[LinearConstraint(A, lo, hi)] if model.rows else None,
        integrality=np.ones(model.n_columns),
        bounds=Bounds(0, 1),
        options=options,
    )
    bound = getattr(res, "mip_dual_bound", None)
    bound = None if bound is None or not np.isfinite(bound) else float(bound)
    if res.x is None:
        return MilpResult("infeasible" if res.status == 2 else "unknown", None, None, bound)
    status = "optimal" if res.status == 0 else "feasible"
    if status == "optimal":
        bound = float(res.fun)
    return MilpResult(status, float(res.fun), np.round(res.x), bound)


def solve_with_highs(model: LinearModel, time_limit: Optional[float] = None):
    """Shorthand for :func:`solve_milp` returning ``(status, objective, x)``."""
    r = solve_milp(model, time_limit)
    return r.status, r.objective, r.x
