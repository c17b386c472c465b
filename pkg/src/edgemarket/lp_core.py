"""Solver-agnostic linear/mixed-integer model IR and solvers.

``LinearModel`` is a plain sparse container. LP relaxations are solved
with scipy's HiGHS simplex (``solve_lp``); MILPs with an embedded
best-first branch-and-bound over those relaxations (``solve_milp``),
or optionally with HiGHS' own branch-and-bound backend. An MPS writer
and a solution importer bridge to external solvers.
"""

from __future__ import annotations

import heapq
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.optimize as sopt
import scipy.sparse as sp

from .tolerances import TOL

LE, EQ, GE = "<=", "=", ">="

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
GAP_LIMIT = "gap-limit"
TIME_LIMIT = "time-limit"


@dataclass
class _Var:
    vid: int
    name: str
    lb: float
    ub: float
    binary: bool


@dataclass
class _Constr:
    coeffs: Dict[int, float]
    sense: str
    rhs: float
    name: str


class LinearModel:
    """Sparse LP/MILP container with named variables and constraints."""

    def __init__(self, name: str = "model", sense: str = "max"):
        if sense not in ("min", "max"):
            raise ValueError(f"bad objective sense: {sense}")
        self.name = name
        self.obj_sense = sense
        self.variables: List[_Var] = []
        self.constraints: List[_Constr] = []
        self.objective: Dict[int, float] = {}

    # -- building -----------------------------------------------------

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf,
                binary: bool = False) -> int:
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
            if lb > ub:
                raise ValueError(f"binary variable {name} has empty bound range")
        vid = len(self.variables)
        self.variables.append(_Var(vid, name, float(lb), float(ub), binary))
        return vid

    def add_constr(self, coeffs: Dict[int, float], sense: str, rhs: float,
                   name: Optional[str] = None) -> int:
        if sense not in (LE, EQ, GE):
            raise ValueError(f"bad constraint sense: {sense}")
        row = len(self.constraints)
        self.constraints.append(
            _Constr(dict(coeffs), sense, float(rhs), name or f"c{row}"))
        return row

    def set_objective(self, coeffs: Dict[int, float], sense: Optional[str] = None):
        if sense is not None:
            if sense not in ("min", "max"):
                raise ValueError(f"bad objective sense: {sense}")
            self.obj_sense = sense
        self.objective = dict(coeffs)

    # -- introspection ------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constrs(self) -> int:
        return len(self.constraints)

    @property
    def binary_ids(self) -> List[int]:
        return [v.vid for v in self.variables if v.binary]

    @property
    def num_binaries(self) -> int:
        return len(self.binary_ids)

    def validate(self):
        """Raise ValueError on dangling ids or non-finite coefficients."""
        n = self.num_vars
        for c in self.constraints:
            for vid, coef in c.coeffs.items():
                if not 0 <= vid < n:
                    raise ValueError(f"constraint {c.name} references unknown id {vid}")
                if not math.isfinite(coef):
                    raise ValueError(f"non-finite coefficient in {c.name}")
            if not math.isfinite(c.rhs):
                raise ValueError(f"non-finite rhs in {c.name}")
        for vid, coef in self.objective.items():
            if not 0 <= vid < n:
                raise ValueError(f"objective references unknown id {vid}")
            if not math.isfinite(coef):
                raise ValueError("non-finite objective coefficient")
        for v in self.variables:
            if v.binary and not (0.0 <= v.lb and v.ub <= 1.0):
                raise ValueError(f"binary variable {v.name} has bounds outside [0,1]")

    def objective_value(self, values: Dict[int, float]) -> float:
        return sum(coef * values[vid] for vid, coef in self.objective.items())

    def max_violation(self, values: Dict[int, float]) -> float:
        """Largest constraint/bound violation of a candidate point."""
        worst = 0.0
        for v in self.variables:
            x = values[v.vid]
            worst = max(worst, v.lb - x, x - v.ub)
        for c in self.constraints:
            lhs = sum(coef * values[vid] for vid, coef in c.coeffs.items())
            if c.sense == LE:
                worst = max(worst, lhs - c.rhs)
            elif c.sense == GE:
                worst = max(worst, c.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - c.rhs))
        return worst


@dataclass
class MilpSolution:
    status: str
    objective: float
    values: Dict[int, float] = field(default_factory=dict)
    relative_gap: float = 0.0
    nodes_explored: int = 0
    wall_time: float = 0.0
    # Duals of the constraint rows, populated by solve_lp only.
    constraint_duals: Optional[np.ndarray] = None


def _scipy_arrays(m: LinearModel):
    n = m.num_vars
    c = np.zeros(n)
    for vid, coef in m.objective.items():
        c[vid] = coef
    if m.obj_sense == "max":
        c = -c
    rows_ub, rhs_ub, rows_eq, rhs_eq = [], [], [], []
    ub_index, eq_index = [], []
    for ridx, con in enumerate(m.constraints):
        ids = list(con.coeffs)
        vals = np.array([con.coeffs[i] for i in ids])
        if con.sense == EQ:
            rows_eq.append((ids, vals))
            rhs_eq.append(con.rhs)
            eq_index.append(ridx)
        elif con.sense == LE:
            rows_ub.append((ids, vals))
            rhs_ub.append(con.rhs)
            ub_index.append(ridx)
        else:  # GE -> negate
            rows_ub.append((ids, -vals))
            rhs_ub.append(-con.rhs)
            ub_index.append(ridx)
    def build(rows):
        data, ri, ci = [], [], []
        for r, (ids, vals) in enumerate(rows):
            ri.extend([r] * len(ids))
            ci.extend(ids)
            data.extend(vals)
        return sp.csr_matrix((data, (ri, ci)), shape=(len(rows), n))
    A_ub = build(rows_ub) if rows_ub else None
    A_eq = build(rows_eq) if rows_eq else None
    return c, A_ub, np.array(rhs_ub), A_eq, np.array(rhs_eq), ub_index, eq_index


def solve_lp(m: LinearModel,
             bound_overrides: Optional[Dict[int, Tuple[float, float]]] = None
             ) -> MilpSolution:
    """Solve the LP relaxation of ``m`` (integrality ignored).

    ``bound_overrides`` maps variable id to a (lb, ub) pair; used by the
    branch-and-bound to fix binaries without copying the model.
    """
    m.validate()
    t0 = time.perf_counter()
    c, A_ub, b_ub, A_eq, b_eq, ub_index, eq_index = _scipy_arrays(m)
    bounds = []
    for v in m.variables:
        lo, hi = v.lb, v.ub
        if bound_overrides and v.vid in bound_overrides:
            lo, hi = bound_overrides[v.vid]
        bounds.append((lo, None if hi == math.inf else hi))
    # HiGHS occasionally gives up with an unresolved status on
    # near-degenerate bases; retry with other algorithms before failing.
    attempts = [("highs", {}), ("highs", {"presolve": False}),
                ("highs-ds", {}), ("highs-ipm", {})]
    res = None
    for method, options in attempts:
        res = sopt.linprog(c, A_ub=A_ub,
                           b_ub=b_ub if A_ub is not None else None,
                           A_eq=A_eq, b_eq=b_eq if A_eq is not None else None,
                           bounds=bounds, method=method,
                           options=options or None)
        if res.status in (0, 2, 3):
            break
    wall = time.perf_counter() - t0
    if res.status == 2:
        return MilpSolution(INFEASIBLE, math.nan, wall_time=wall)
    if res.status == 3:
        return MilpSolution(UNBOUNDED, math.inf if m.obj_sense == "max" else -math.inf,
                            wall_time=wall)
    if res.status != 0:
        raise RuntimeError(f"LP solve failed: {res.message}")
    values = {i: float(res.x[i]) for i in range(m.num_vars)}
    obj = m.objective_value(values)
    duals = np.zeros(m.num_constrs)
    if res.ineqlin is not None and len(ub_index):
        duals[ub_index] = res.ineqlin.marginals
    if res.eqlin is not None and len(eq_index):
        duals[eq_index] = res.eqlin.marginals
    return MilpSolution(OPTIMAL, obj, values, relative_gap=0.0,
                        wall_time=wall, constraint_duals=duals)


@dataclass
class MilpConfig:
    gap_tol: float = 1e-6
    time_limit: Optional[float] = None
    node_limit: Optional[int] = None
    backend: str = "bnb"          # "bnb" (embedded) or "highs"


def solve_milp(m: LinearModel, cfg: Optional[MilpConfig] = None) -> MilpSolution:
    """Solve a binary MILP.

    The embedded backend is a deterministic best-first branch-and-bound:
    nodes ordered by LP-relaxation bound, branching on the most
    fractional binary with ties broken by lowest variable id. Incumbents
    must have every binary within the integrality tolerance.

    Every incumbent is polished: binaries are rounded and the remaining
    LP re-solved with them fixed. A solver may accept binaries that are
    integral only to its tolerance, and a big-M row multiplying such a
    binary then gains big-M-times-tolerance of spurious slack, inflating
    the objective. If the polished value disagrees with the claimed one,
    that binary assignment is excluded with a no-good cut and the solve
    repeats; since tolerance can only overstate an assignment, the best
    polished value seen is a true optimum once the claims settle.
    """
    cfg = cfg or MilpConfig()
    m.validate()
    if cfg.backend == "highs":
        solver = _solve_milp_highs
    elif cfg.backend == "bnb":
        solver = _solve_milp_bnb
    else:
        raise ValueError(f"unknown backend: {cfg.backend}")
    return _solve_polished(m, cfg, solver)


_POLISH_ROUNDS = 40


def _solve_polished(m: LinearModel, cfg: MilpConfig, solver) -> MilpSolution:
    binaries = m.binary_ids
    base_rows = m.num_constrs
    best: Optional[MilpSolution] = None   # best exactly-polished candidate
    seen = set()
    t0 = time.perf_counter()
    sign = 1.0 if m.obj_sense == "max" else -1.0
    nodes = 0
    try:
        for _ in range(_POLISH_ROUNDS):
            sol = solver(m, cfg)
            nodes += sol.nodes_explored
            if sol.status not in (OPTIMAL, GAP_LIMIT):
                if best is not None and sol.status == INFEASIBLE:
                    break   # only cut assignments remain; fall back to best
                sol.nodes_explored = nodes
                sol.wall_time = time.perf_counter() - t0
                return sol
            assignment = tuple(int(round(sol.values[v])) for v in binaries)
            if assignment in seen:
                raise RuntimeError("solver returned an excluded assignment")
            seen.add(assignment)
            fixed = {v: (float(b), float(b))
                     for v, b in zip(binaries, assignment)}
            lp = solve_lp(m, bound_overrides=fixed)
            polished = None
            if lp.status == OPTIMAL:
                values = dict(lp.values)
                for v, b in zip(binaries, assignment):
                    values[v] = float(b)
                polished = MilpSolution(sol.status, lp.objective, values,
                                        relative_gap=sol.relative_gap,
                                        nodes_explored=nodes)
                if best is None or sign * polished.objective > sign * best.objective:
                    best = polished
            # The claimed bound may exceed the polished value by the
            # requested gap; only a larger excess signals big-M leakage.
            claim_tol = max(cfg.gap_tol, 1e-6)
            claim_ok = (polished is not None and
                        abs(sol.objective - polished.objective)
                        <= claim_tol * max(1.0, abs(polished.objective)))
            if claim_ok or (polished is not None and sol.status == GAP_LIMIT):
                break
            # Inflated or spuriously feasible assignment: exclude it.
            coeffs = {v: (-1.0 if b else 1.0)
                      for v, b in zip(binaries, assignment)}
            m.add_constr(coeffs, GE, 1.0 - sum(assignment), name="nogood")
        else:
            raise RuntimeError("incumbent polishing did not settle within "
                               f"{_POLISH_ROUNDS} rounds")
    finally:
        del m.constraints[base_rows:]
    if best is None:
        return MilpSolution(INFEASIBLE, math.nan, nodes_explored=nodes,
                            wall_time=time.perf_counter() - t0)
    best.wall_time = time.perf_counter() - t0
    return best


def _solve_milp_bnb(m: LinearModel, cfg: MilpConfig) -> MilpSolution:
    t0 = time.perf_counter()
    sign = 1.0 if m.obj_sense == "max" else -1.0  # work in max space
    binaries = m.binary_ids
    root = solve_lp(m)
    if root.status in (INFEASIBLE, UNBOUNDED):
        root.nodes_explored = 1
        root.wall_time = time.perf_counter() - t0
        return root

    incumbent: Optional[Dict[int, float]] = None
    incumbent_obj = -math.inf
    nodes = 0
    counter = 0
    # heap of (-bound_in_max_space, counter, fixings)
    heap = [(-sign * root.objective, counter, {})]
    cached_root = root
    status = OPTIMAL

    def frac_binary(values):
        best_vid, best_frac = None, -1.0
        for vid in binaries:
            x = values[vid]
            f = abs(x - round(x))
            if f > TOL.binary_integrality and 0.5 - abs(x - 0.5) > best_frac + 1e-12:
                best_vid, best_frac = vid, 0.5 - abs(x - 0.5)
        return best_vid

    while heap:
        neg_bound, _, fixings = heapq.heappop(heap)
        bound = -neg_bound
        if incumbent is not None and bound <= incumbent_obj * (1 + 1e-12) + \
                cfg.gap_tol * max(1.0, abs(incumbent_obj)):
            break  # best-first: remaining nodes cannot improve past the gap
        if cfg.time_limit is not None and time.perf_counter() - t0 > cfg.time_limit:
            status = TIME_LIMIT
            break
        if cfg.node_limit is not None and nodes >= cfg.node_limit:
            status = TIME_LIMIT
            break
        nodes += 1
        if nodes == 1 and not fixings:
            sol = cached_root
        else:
            sol = solve_lp(m, {vid: (val, val) for vid, val in fixings.items()})
        if sol.status != OPTIMAL:
            continue
        node_obj = sign * sol.objective
        if incumbent is not None and node_obj <= incumbent_obj + \
                cfg.gap_tol * max(1.0, abs(incumbent_obj)):
            continue
        vid = frac_binary(sol.values)
        if vid is None:
            if node_obj > incumbent_obj:
                incumbent, incumbent_obj = dict(sol.values), node_obj
            continue
        for val in (0.0, 1.0):
            counter += 1
            child = dict(fixings)
            child[vid] = val
            heapq.heappush(heap, (-node_obj, counter, child))

    wall = time.perf_counter() - t0
    best_bound = -heap[0][0] if heap else incumbent_obj
    if incumbent is None:
        if status == OPTIMAL:
            return MilpSolution(INFEASIBLE, math.nan, nodes_explored=nodes,
                                wall_time=wall)
        return MilpSolution(status, math.nan, nodes_explored=nodes, wall_time=wall)
    gap = max(0.0, best_bound - incumbent_obj) / max(1.0, abs(incumbent_obj))
    if status == OPTIMAL and gap > cfg.gap_tol:
        status = GAP_LIMIT
    return MilpSolution(status, sign * incumbent_obj, incumbent,
                        relative_gap=gap, nodes_explored=nodes, wall_time=wall)


def _solve_milp_highs(m: LinearModel, cfg: MilpConfig) -> MilpSolution:
    t0 = time.perf_counter()
    c, A_ub, b_ub, A_eq, b_eq, _, _ = _scipy_arrays(m)
    sign = 1.0 if m.obj_sense == "max" else -1.0
    blocks, lows, highs = [], [], []
    if A_ub is not None:
        blocks.append(A_ub)
        lows.append(np.full(len(b_ub), -np.inf))
        highs.append(b_ub)
    if A_eq is not None:
        blocks.append(A_eq)
        lows.append(b_eq)
        highs.append(b_eq)
    constraints = None
    if blocks:
        constraints = sopt.LinearConstraint(sp.vstack(blocks),
                                            np.concatenate(lows),
                                            np.concatenate(highs))
    integrality = np.array([1 if v.binary else 0 for v in m.variables])
    lb = np.array([v.lb for v in m.variables])
    ub = np.array([v.ub for v in m.variables])
    # The default integrality tolerance (1e-6) times a big-M coefficient
    # leaks visible slack into linearization rows; tighten it. scipy
    # forwards the unrecognized key to HiGHS verbatim (with a warning).
    options = {"mip_rel_gap": cfg.gap_tol,
               "mip_feasibility_tolerance": 1e-9}
    if cfg.time_limit is not None:
        options["time_limit"] = cfg.time_limit
    if cfg.node_limit is not None:
        options["node_limit"] = cfg.node_limit
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="Unrecognized options")
        res = sopt.milp(c, constraints=constraints, integrality=integrality,
                        bounds=sopt.Bounds(lb, ub), options=options)
    wall = time.perf_counter() - t0
    if res.status == 2:
        return MilpSolution(INFEASIBLE, math.nan, wall_time=wall)
    if res.status == 3:
        return MilpSolution(UNBOUNDED, sign * math.inf, wall_time=wall)
    if res.x is None:
        return MilpSolution(TIME_LIMIT, math.nan, wall_time=wall)
    values = {i: float(res.x[i]) for i in range(m.num_vars)}
    obj = m.objective_value(values)
    gap = float(res.mip_gap) if res.mip_gap is not None else 0.0
    status = OPTIMAL if res.status == 0 else TIME_LIMIT
    if status == OPTIMAL and gap > cfg.gap_tol * (1 + 1e-9):
        status = GAP_LIMIT
    return MilpSolution(status, obj, values, relative_gap=gap,
                        nodes_explored=int(getattr(res, "mip_node_count", 0) or 0),
                        wall_time=wall)


# -- MPS bridge -------------------------------------------------------


def _short_names(labels: List[str], prefix: str) -> List[str]:
    """Truncate labels to 8 chars, keeping them unique and deterministic."""
    out, used = [], set()
    for idx, label in enumerate(labels):
        base = "".join(ch if ch.isalnum() else "_" for ch in label)[:8]
        if not base:
            base = f"{prefix}{idx}"
        name = base
        n = 0
        while name in used:
            n += 1
            tag = str(n)
            name = base[:8 - len(tag)] + tag
        used.add(name)
        out.append(name)
    return out


def mps_names(m: LinearModel) -> Tuple[List[str], List[str]]:
    """Deterministic 8-char variable and row names used by the MPS writer."""
    var_names = _short_names([v.name for v in m.variables], "X")
    row_names = _short_names([c.name for c in m.constraints], "R")
    return var_names, row_names


def export_mps(m: LinearModel) -> str:
    """Write ``m`` in fixed-format MPS (binaries inside INTORG/INTEND)."""
    m.validate()
    var_names, row_names = mps_names(m)
    lines = [f"NAME          {m.name[:8].upper() or 'MODEL'}"]
    lines.append("OBJSENSE")
    lines.append(f"    {m.obj_sense.upper()}")
    lines.append("ROWS")
    lines.append(" N  OBJ")
    sense_tag = {LE: "L", EQ: "E", GE: "G"}
    for con, rname in zip(m.constraints, row_names):
        lines.append(f" {sense_tag[con.sense]}  {rname}")
    lines.append("COLUMNS")
    by_var: List[List[Tuple[str, float]]] = [[] for _ in range(m.num_vars)]
    for vid, coef in m.objective.items():
        by_var[vid].append(("OBJ", coef))
    for con, rname in zip(m.constraints, row_names):
        for vid, coef in con.coeffs.items():
            by_var[vid].append((rname, coef))
    in_int = False
    marker = 0
    for v in m.variables:
        if v.binary != in_int:
            tag = "INTORG" if v.binary else "INTEND"
            lines.append(f"    MK{marker:<8}  'MARKER'                 '{tag}'")
            marker += 1
            in_int = v.binary
        for rname, coef in by_var[v.vid]:
            lines.append(f"    {var_names[v.vid]:<10}{rname:<10}{coef:< .12G}")
    if in_int:
        lines.append(f"    MK{marker:<8}  'MARKER'                 'INTEND'")
    lines.append("RHS")
    for con, rname in zip(m.constraints, row_names):
        if con.rhs != 0.0:
            lines.append(f"    RHS       {rname:<10}{con.rhs:< .12G}")
    lines.append("BOUNDS")
    for v in m.variables:
        name = var_names[v.vid]
        if v.binary:
            lines.append(f" BV BND       {name}")
            continue
        if v.lb == -math.inf and v.ub == math.inf:
            lines.append(f" FR BND       {name}")
            continue
        if v.lb == -math.inf:
            lines.append(f" MI BND       {name}")
        elif v.lb != 0.0:
            lines.append(f" LO BND       {name:<10}{v.lb:< .12G}")
        if v.ub != math.inf:
            lines.append(f" UP BND       {name:<10}{v.ub:< .12G}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def import_solution(m: LinearModel, text: str) -> MilpSolution:
    """Read a ``name value`` per-line solution file for ``m``.

    The objective is recomputed from the model; feasibility is verified
    rather than trusted.
    """
    var_names, _ = mps_names(m)
    lookup = {name: vid for vid, name in enumerate(var_names)}
    values: Dict[int, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'name value', got {raw!r}")
        name, val = parts
        if name not in lookup:
            raise ValueError(f"line {lineno}: unknown variable {name!r}")
        values[lookup[name]] = float(val)
    missing = [var_names[i] for i in range(m.num_vars) if i not in values]
    if missing:
        raise ValueError(f"solution file missing variables: {missing[:5]}")
    violation = m.max_violation(values)
    frac = max((abs(values[vid] - round(values[vid])) for vid in m.binary_ids),
               default=0.0)
    feasible = violation <= 1e-6 and frac <= TOL.binary_integrality
    status = OPTIMAL if feasible else INFEASIBLE
    return MilpSolution(status, m.objective_value(values), values)
