"""KKT-based single-level reformulation (P1).

Each follower LP is replaced by its optimality system: primal
feasibility, stationarity, and the eight complementarity families
linearized with binary switches and big-M constants. The bilinear
price-times-budget-multiplier and placement-times-capacity-multiplier
products are expanded over the one-hot price selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import List, Optional, Tuple

import numpy as np

from . import lp_core
from ._milp_base import (IntegrityError, MilpLayout, build_base,
                         extract_solution)
from .lp_core import LE, EQ, LinearModel, MilpConfig, MilpSolution
from .model import (DualSolution, FollowerSolution, Instance, LeaderDecision)


@dataclass(frozen=True)
class BigMSet:
    """One constant per complementarity family plus a shared constant for
    the product linearizations."""

    m1: float   # delay-cap slack / tau
    m2: float   # cloud coverage slack / mu1
    m3: float   # EN coverage slack / lambda
    m4: float   # EN capacity slack / Gamma
    m5: float   # eligibility slack / eta
    m6: float   # budget slack / mu2
    m7: float   # x_cloud / zeta
    m8: float   # x_edge / eps
    m_lin: float

    def scaled(self, factor: float) -> "BigMSet":
        return BigMSet(**{f.name: getattr(self, f.name) * factor
                          for f in fields(self)})

    def check(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"big-M constant {f.name} must be positive "
                                 f"and finite, got {val}")


def derive_bigM(inst: Instance) -> BigMSet:
    """Data-driven big-M proposal.

    Primal-side slacks are bounded by the instance data directly; the
    multiplier side has no a-priori bound, so it gets ten times the
    largest monetary scale in the instance. validate_bigM checks the
    result after solving and the solve wrappers escalate if needed.
    """
    max_delay = max(float(inst.delay_edge.max(initial=0.0)),
                    float(inst.delay_cloud.max(initial=0.0)), 1.0)
    per_service_demand = float(inst.demand.sum(axis=0).max(initial=0.0))
    dual_side = 10.0 * max(
        float(inst.budget.max(initial=0.0)),
        float(inst.price_grid.max(initial=0.0))
        * float(inst.compute_cap.max(initial=0.0)),
        float(inst.delay_weight.max(initial=0.0)) * max_delay
        * per_service_demand,
        1.0,
    )
    def fam(primal_bound):  # noqa: E306 - tiny local helper
        return max(float(primal_bound), dual_side)
    return BigMSet(
        m1=fam(inst.delay_cap.max(initial=0.0)),
        m2=fam(per_service_demand),
        m3=fam(inst.compute_cap.max(initial=0.0)),
        m4=fam(inst.compute_cap.max(initial=0.0)),
        m5=fam(inst.demand.max(initial=0.0)),
        m6=fam(inst.budget.max(initial=0.0)),
        m7=fam(inst.demand.max(initial=0.0)),
        m8=fam(inst.demand.max(initial=0.0)),
        m_lin=dual_side,
    )


def build_p1(inst: Instance, bigm: BigMSet, flat: bool = False,
             fix_price_level: Optional[int] = None,
             ) -> Tuple[LinearModel, MilpLayout]:
    """Single MILP whose feasible points are exactly the leader decisions
    paired with follower-optimal responses (certified by KKT)."""
    bigm.check()
    M, N, K = inst.num_aps, inst.num_ens, inst.num_services
    m, lay = build_base(inst, bigm.m_lin, "p1", flat=flat,
                        fix_price_level=fix_price_level)

    for k in range(K):
        w = inst.delay_weight[k]
        # Stationarity, written in the dual sign convention.
        m.add_constr({lay.mu1[k]: 1.0, lay.mu2[k]: -inst.cloud_price},
                     EQ, inst.cloud_price, name=f"staty0_{k}")
        for j in range(N):
            coeffs = {lay.lam[j, k]: 1.0, lay.gamma[j, k]: -1.0}
            for v in range(inst.num_price_levels):
                pg = inst.price_grid[j, v]
                coeffs[lay.pi[j, v, k]] = -pg
                coeffs[lay.r[j, v]] = -pg
            m.add_constr(coeffs, EQ, 0.0, name=f"staty_{j}_{k}")
        for i in range(M):
            m.add_constr({lay.sigma[i, k]: inst.demand[i, k],
                          lay.tau[i, k]: 1.0}, EQ, 0.0, name=f"statda_{i}_{k}")
        for i in range(M):
            m.add_constr({lay.xi[i, k]: 1.0,
                          lay.sigma[i, k]: inst.delay_cloud[i],
                          lay.mu1[k]: -1.0, lay.zeta[i, k]: 1.0},
                         EQ, w * inst.delay_cloud[i], name=f"statx0_{i}_{k}")
        for i in range(M):
            for j in range(N):
                m.add_constr({lay.xi[i, k]: 1.0,
                              lay.sigma[i, k]: inst.delay_edge[i, j],
                              lay.lam[j, k]: -1.0, lay.eta[i, j, k]: -1.0,
                              lay.eps[i, j, k]: 1.0},
                             EQ, w * inst.delay_edge[i, j],
                             name=f"statx_{i}_{j}_{k}")

        # Complementarity switches: switch = 1 frees the slack side and
        # zeroes the multiplier side.
        for i in range(M):
            lay.psi[i, k] = m.add_var(f"psi_{i}_{k}", binary=True)
        lay.v1[k] = m.add_var(f"v1_{k}", binary=True)
        for j in range(N):
            lay.kappa[j, k] = m.add_var(f"kappa_{j}_{k}", binary=True)
        for j in range(N):
            lay.theta[j, k] = m.add_var(f"theta_{j}_{k}", binary=True)
        for i in range(M):
            for j in range(N):
                lay.rho[i, j, k] = m.add_var(f"rho_{i}_{j}_{k}", binary=True)
        lay.v2[k] = m.add_var(f"v2_{k}", binary=True)
        for i in range(M):
            lay.phi_sw[i, k] = m.add_var(f"phi_{i}_{k}", binary=True)
        for i in range(M):
            for j in range(N):
                lay.omega[i, j, k] = m.add_var(f"omega_{i}_{j}_{k}",
                                               binary=True)

        for i in range(M):
            m.add_constr({lay.avg_delay[i, k]: -1.0, lay.psi[i, k]: -bigm.m1},
                         LE, -inst.delay_cap[k], name=f"cc1s_{i}_{k}")
            m.add_constr({lay.tau[i, k]: 1.0, lay.psi[i, k]: bigm.m1},
                         LE, bigm.m1, name=f"cc1m_{i}_{k}")
        coeffs = {lay.y_cloud[k]: 1.0, lay.v1[k]: -bigm.m2}
        for i in range(M):
            coeffs[lay.x_cloud[i, k]] = -1.0
        m.add_constr(coeffs, LE, 0.0, name=f"cc2s_{k}")
        m.add_constr({lay.mu1[k]: 1.0, lay.v1[k]: bigm.m2}, LE, bigm.m2,
                     name=f"cc2m_{k}")
        for j in range(N):
            coeffs = {lay.y_edge[j, k]: 1.0, lay.kappa[j, k]: -bigm.m3}
            for i in range(M):
                coeffs[lay.x_edge[i, j, k]] = -1.0
            m.add_constr(coeffs, LE, 0.0, name=f"cc3s_{j}_{k}")
            m.add_constr({lay.lam[j, k]: 1.0, lay.kappa[j, k]: bigm.m3},
                         LE, bigm.m3, name=f"cc3m_{j}_{k}")
        for j in range(N):
            m.add_constr({lay.t[j, k]: inst.compute_cap[j],
                          lay.y_edge[j, k]: -1.0,
                          lay.theta[j, k]: -bigm.m4}, LE, 0.0,
                         name=f"cc4s_{j}_{k}")
            m.add_constr({lay.gamma[j, k]: 1.0, lay.theta[j, k]: bigm.m4},
                         LE, bigm.m4, name=f"cc4m_{j}_{k}")
        for i in range(M):
            for j in range(N):
                m.add_constr({lay.x_edge[i, j, k]: -1.0,
                              lay.rho[i, j, k]: -bigm.m5}, LE,
                             -inst.eligible[i, j, k] * inst.demand[i, k],
                             name=f"cc5s_{i}_{j}_{k}")
                m.add_constr({lay.eta[i, j, k]: 1.0,
                              lay.rho[i, j, k]: bigm.m5}, LE, bigm.m5,
                             name=f"cc5m_{i}_{j}_{k}")
        # Budget slack via the revenue variable, which the strong-duality
        # row pins to the true edge spend at any KKT-consistent point.
        m.add_constr({lay.rev[k]: -1.0, lay.y_cloud[k]: -inst.cloud_price,
                      lay.v2[k]: -bigm.m6}, LE, -inst.budget[k],
                     name=f"cc6s_{k}")
        m.add_constr({lay.mu2[k]: 1.0, lay.v2[k]: bigm.m6}, LE, bigm.m6,
                     name=f"cc6m_{k}")
        for i in range(M):
            m.add_constr({lay.x_cloud[i, k]: 1.0, lay.phi_sw[i, k]: -bigm.m7},
                         LE, 0.0, name=f"cc7s_{i}_{k}")
            m.add_constr({lay.zeta[i, k]: 1.0, lay.phi_sw[i, k]: bigm.m7},
                         LE, bigm.m7, name=f"cc7m_{i}_{k}")
        for i in range(M):
            for j in range(N):
                m.add_constr({lay.x_edge[i, j, k]: 1.0,
                              lay.omega[i, j, k]: -bigm.m8}, LE, 0.0,
                             name=f"cc8s_{i}_{j}_{k}")
                m.add_constr({lay.eps[i, j, k]: 1.0,
                              lay.omega[i, j, k]: bigm.m8}, LE, bigm.m8,
                             name=f"cc8m_{i}_{j}_{k}")
    return m, lay


def extract_solution_p1(inst: Instance, lay: MilpLayout, sol: MilpSolution,
                        ) -> Tuple[LeaderDecision, List[FollowerSolution],
                                   List[DualSolution]]:
    return extract_solution(inst, lay, sol)


def validate_bigM(inst: Instance, lay: MilpLayout, sol: MilpSolution,
                  bigm: BigMSet) -> List[str]:
    """Flag any multiplier or slack within 1% of its big-M constant.

    A binding big-M silently truncates the feasible set and invalidates
    the reformulation, so callers must re-solve with larger constants
    when this returns a non-empty list. Works for both builders; the
    switch families are only checked when present.

    Multipliers of vacuous rows (capacity of an unplaced EN, eligibility
    of a barred pair, rows with zero demand) are costless degenerate rays
    that the solver may legitimately park at the bound; those are skipped
    because any value of theirs supports the same optimum.
    """
    M, N, K = inst.num_aps, inst.num_ens, inst.num_services
    val = sol.values
    flags: List[str] = []

    def check(value, limit, label):
        if value >= 0.99 * limit:
            flags.append(f"{label}: value {value:.6g} within 1% of M "
                         f"{limit:.6g}")

    for k in range(K):
        check(val[lay.mu2[k]], bigm.m_lin, f"Mlin pi-product mu2[{k}]")
        placed = [val[lay.t[j, k]] > 0.5 for j in range(N)]
        for j in range(N):
            if placed[j]:
                check(val[lay.gamma[j, k]], bigm.m_lin,
                      f"Mlin g-product Gamma[{j},{k}]")
        if not lay.psi:
            continue
        for i in range(M):
            if inst.demand[i, k] > 0:
                check(val[lay.tau[i, k]], bigm.m1, f"M1 tau[{i},{k}]")
            check(inst.delay_cap[k] - val[lay.avg_delay[i, k]], bigm.m1,
                  f"M1 delay-cap slack[{i},{k}]")
        cov0 = val[lay.y_cloud[k]] - sum(val[lay.x_cloud[i, k]]
                                         for i in range(M))
        check(val[lay.mu1[k]], bigm.m2, f"M2 mu1[{k}]")
        check(cov0, bigm.m2, f"M2 cloud-coverage slack[{k}]")
        for j in range(N):
            cov = val[lay.y_edge[j, k]] - sum(val[lay.x_edge[i, j, k]]
                                              for i in range(M))
            check(cov, bigm.m3, f"M3 coverage slack[{j},{k}]")
            cap = (inst.compute_cap[j] * val[lay.t[j, k]]
                   - val[lay.y_edge[j, k]])
            check(cap, bigm.m4, f"M4 capacity slack[{j},{k}]")
            if placed[j]:
                check(val[lay.lam[j, k]], bigm.m3, f"M3 lambda[{j},{k}]")
                check(val[lay.gamma[j, k]], bigm.m4, f"M4 Gamma[{j},{k}]")
        for i in range(M):
            for j in range(N):
                live = (placed[j] and inst.eligible[i, j, k]
                        and inst.demand[i, k] > 0)
                elig = (inst.eligible[i, j, k] * inst.demand[i, k]
                        - val[lay.x_edge[i, j, k]])
                check(elig, bigm.m5, f"M5 eligibility slack[{i},{j},{k}]")
                check(val[lay.x_edge[i, j, k]], bigm.m8, f"M8 x[{i},{j},{k}]")
                if live:
                    check(val[lay.eta[i, j, k]], bigm.m5,
                          f"M5 eta[{i},{j},{k}]")
                    check(val[lay.eps[i, j, k]], bigm.m8,
                          f"M8 eps[{i},{j},{k}]")
        budget_slack = (inst.budget[k] - inst.cloud_price * val[lay.y_cloud[k]]
                        - val[lay.rev[k]])
        check(val[lay.mu2[k]], bigm.m6, f"M6 mu2[{k}]")
        check(budget_slack, bigm.m6, f"M6 budget slack[{k}]")
        for i in range(M):
            check(val[lay.x_cloud[i, k]], bigm.m7, f"M7 x0[{i},{k}]")
            if inst.demand[i, k] > 0:
                check(val[lay.zeta[i, k]], bigm.m7, f"M7 zeta[{i},{k}]")
    return flags


@dataclass
class ReformResult:
    """Outcome of a full build/solve/extract/validate cycle."""

    status: str
    objective: Optional[float]
    leader: Optional[LeaderDecision]
    followers: Optional[List[FollowerSolution]]
    duals: Optional[List[DualSolution]]
    milp: MilpSolution
    bigm: BigMSet
    escalations: int
    flags: List[str]


MAX_ESCALATIONS = 3


def solve_p1(inst: Instance, config: Optional[MilpConfig] = None,
             bigm: Optional[BigMSet] = None, flat: bool = False,
             fix_price_level: Optional[int] = None) -> ReformResult:
    """Derive big-M constants, solve P1, and escalate the constants
    tenfold (at most three times) if any turns out binding."""
    bigm = bigm or derive_bigM(inst)
    config = config or MilpConfig()
    for escalation in range(MAX_ESCALATIONS + 1):
        model, lay = build_p1(inst, bigm, flat=flat,
                              fix_price_level=fix_price_level)
        sol = lp_core.solve_milp(model, config)
        if sol.status not in (lp_core.OPTIMAL, lp_core.GAP_LIMIT):
            return ReformResult(sol.status, None, None, None, None, sol,
                                bigm, escalation, [])
        leader, followers, duals = extract_solution_p1(inst, lay, sol)
        flags = validate_bigM(inst, lay, sol, bigm)
        if not flags:
            return ReformResult(sol.status, sol.objective, leader, followers,
                                duals, sol, bigm, escalation, [])
        bigm = bigm.scaled(10.0)
    raise RuntimeError("reformulation unsound: big-M constants still binding "
                       f"after {MAX_ESCALATIONS} escalations: {flags}")
