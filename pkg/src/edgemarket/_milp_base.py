"""Shared machinery for the two single-level MILP reformulations.

Both P1 (KKT-based) and P2 (duality-based) contain the same core: leader
constraints, per-service primal feasibility, the price-times-multiplier
and placement-times-multiplier product linearizations, and the
strong-duality revenue variables. The two builders differ only in how
they certify follower optimality (complementarity switches vs dual
feasibility rows).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .lp_core import LE, EQ, GE, LinearModel, MilpSolution
from .model import (DualSolution, FollowerSolution, Instance, LeaderDecision,
                    leader_profit, follower_cost)
from .tolerances import TOL


class IntegrityError(Exception):
    """A solved MILP violates a structural expectation (fractional binary,
    profit mismatch)."""


@dataclass
class MilpLayout:
    """Maps every model symbol (with its indices) to a variable id."""

    r: Dict[Tuple[int, int], int] = field(default_factory=dict)        # (j, v)
    z: Dict[int, int] = field(default_factory=dict)                    # j
    t: Dict[Tuple[int, int], int] = field(default_factory=dict)        # (j, k)
    x_cloud: Dict[Tuple[int, int], int] = field(default_factory=dict)  # (i, k)
    x_edge: Dict[Tuple[int, int, int], int] = field(default_factory=dict)
    y_cloud: Dict[int, int] = field(default_factory=dict)              # k
    y_edge: Dict[Tuple[int, int], int] = field(default_factory=dict)   # (j, k)
    avg_delay: Dict[Tuple[int, int], int] = field(default_factory=dict)
    xi: Dict[Tuple[int, int], int] = field(default_factory=dict)
    sigma: Dict[Tuple[int, int], int] = field(default_factory=dict)
    tau: Dict[Tuple[int, int], int] = field(default_factory=dict)
    mu1: Dict[int, int] = field(default_factory=dict)
    mu2: Dict[int, int] = field(default_factory=dict)
    lam: Dict[Tuple[int, int], int] = field(default_factory=dict)
    gamma: Dict[Tuple[int, int], int] = field(default_factory=dict)
    eta: Dict[Tuple[int, int, int], int] = field(default_factory=dict)
    zeta: Dict[Tuple[int, int], int] = field(default_factory=dict)
    eps: Dict[Tuple[int, int, int], int] = field(default_factory=dict)
    pi: Dict[Tuple[int, int, int], int] = field(default_factory=dict)  # (j, v, k)
    h: Dict[Tuple[int, int, int], int] = field(default_factory=dict)   # (j, v, k)
    g: Dict[Tuple[int, int], int] = field(default_factory=dict)        # (j, k)
    rev: Dict[int, int] = field(default_factory=dict)                  # k
    # KKT-only complementarity switches
    psi: Dict[Tuple[int, int], int] = field(default_factory=dict)      # (i, k)
    v1: Dict[int, int] = field(default_factory=dict)
    kappa: Dict[Tuple[int, int], int] = field(default_factory=dict)
    theta: Dict[Tuple[int, int], int] = field(default_factory=dict)
    rho: Dict[Tuple[int, int, int], int] = field(default_factory=dict)
    v2: Dict[int, int] = field(default_factory=dict)
    phi_sw: Dict[Tuple[int, int], int] = field(default_factory=dict)
    omega: Dict[Tuple[int, int, int], int] = field(default_factory=dict)


def build_base(inst: Instance, m_lin: float, name: str,
               flat: bool = False,
               fix_price_level: Optional[int] = None,
               ) -> Tuple[LinearModel, MilpLayout]:
    """Leader block, follower primal feasibility, product linearizations
    and per-service revenue definitions common to P1 and P2.

    ``flat`` links the price-selection rows across ENs; ``fix_price_level``
    pins every EN to one grid level. Both are used by the pricing-scheme
    harness, not by the plain builders.
    """
    M, N, K, V = inst.num_aps, inst.num_ens, inst.num_services, inst.num_price_levels
    m = LinearModel(name=name, sense="max")
    lay = MilpLayout()

    for j in range(N):
        lay.z[j] = m.add_var(f"z_{j}", binary=True)
    for j in range(N):
        for k in range(K):
            lay.t[j, k] = m.add_var(f"t_{j}_{k}", binary=True)
    for j in range(N):
        for v in range(V):
            lay.r[j, v] = m.add_var(f"r_{j}_{v}", binary=True)

    for k in range(K):
        for i in range(M):
            lay.x_cloud[i, k] = m.add_var(f"x0_{i}_{k}")
        for i in range(M):
            for j in range(N):
                lay.x_edge[i, j, k] = m.add_var(f"x_{i}_{j}_{k}")
        lay.y_cloud[k] = m.add_var(f"y0_{k}")
        for j in range(N):
            lay.y_edge[j, k] = m.add_var(f"y_{j}_{k}")
        for i in range(M):
            lay.avg_delay[i, k] = m.add_var(f"da_{i}_{k}")
        for i in range(M):
            lay.xi[i, k] = m.add_var(f"xi_{i}_{k}", lb=-math.inf)
        for i in range(M):
            lay.sigma[i, k] = m.add_var(f"sigma_{i}_{k}", lb=-math.inf)
        for i in range(M):
            lay.tau[i, k] = m.add_var(f"tau_{i}_{k}")
        lay.mu1[k] = m.add_var(f"mu1_{k}")
        lay.mu2[k] = m.add_var(f"mu2_{k}")
        for j in range(N):
            lay.lam[j, k] = m.add_var(f"lam_{j}_{k}")
        for j in range(N):
            lay.gamma[j, k] = m.add_var(f"gamma_{j}_{k}")
        for i in range(M):
            for j in range(N):
                lay.eta[i, j, k] = m.add_var(f"eta_{i}_{j}_{k}")
        for i in range(M):
            lay.zeta[i, k] = m.add_var(f"zeta_{i}_{k}")
        for i in range(M):
            for j in range(N):
                lay.eps[i, j, k] = m.add_var(f"eps_{i}_{j}_{k}")
        for j in range(N):
            for v in range(V):
                lay.pi[j, v, k] = m.add_var(f"pi_{j}_{v}_{k}")
        for j in range(N):
            lay.g[j, k] = m.add_var(f"g_{j}_{k}")
        lay.rev[k] = m.add_var(f"rev_{k}", lb=-math.inf)

    # Leader constraints: placement only on active ENs, shared capacity,
    # storage, one grid price per EN.
    for j in range(N):
        for k in range(K):
            m.add_constr({lay.t[j, k]: 1.0, lay.z[j]: -1.0}, LE, 0.0,
                         name=f"place_{j}_{k}")
    for j in range(N):
        coeffs = {lay.y_edge[j, k]: 1.0 for k in range(K)}
        coeffs[lay.z[j]] = -inst.compute_cap[j]
        m.add_constr(coeffs, LE, 0.0, name=f"encap_{j}")
    for j in range(N):
        coeffs = {lay.t[j, k]: inst.service_size[k] for k in range(K)}
        coeffs[lay.z[j]] = -inst.storage_cap[j]
        m.add_constr(coeffs, LE, 0.0, name=f"storage_{j}")
    for j in range(N):
        m.add_constr({lay.r[j, v]: 1.0 for v in range(V)}, EQ, 1.0,
                     name=f"onehot_{j}")
    if flat:
        if not np.allclose(inst.price_grid, inst.price_grid[0][None, :]):
            raise ValueError("flat pricing requires identical grids on all ENs")
        for j in range(1, N):
            for v in range(V):
                m.add_constr({lay.r[j, v]: 1.0, lay.r[0, v]: -1.0}, EQ, 0.0,
                             name=f"flat_{j}_{v}")
    if fix_price_level is not None:
        for j in range(N):
            m.add_constr({lay.r[j, fix_price_level]: 1.0}, EQ, 1.0,
                         name=f"fixlvl_{j}")

    # Per-service primal feasibility; the budget row uses the revenue
    # variable in place of the bilinear price*procurement term.
    for k in range(K):
        w = inst.delay_weight[k]
        for i in range(M):
            coeffs = {lay.x_cloud[i, k]: 1.0}
            for j in range(N):
                coeffs[lay.x_edge[i, j, k]] = 1.0
            m.add_constr(coeffs, EQ, inst.demand[i, k], name=f"bal_{i}_{k}")
        coeffs = {lay.x_cloud[i, k]: 1.0 for i in range(M)}
        coeffs[lay.y_cloud[k]] = -1.0
        m.add_constr(coeffs, LE, 0.0, name=f"cov0_{k}")
        for j in range(N):
            coeffs = {lay.x_edge[i, j, k]: 1.0 for i in range(M)}
            coeffs[lay.y_edge[j, k]] = -1.0
            m.add_constr(coeffs, LE, 0.0, name=f"cov_{j}_{k}")
        for j in range(N):
            m.add_constr({lay.y_edge[j, k]: 1.0,
                          lay.t[j, k]: -inst.compute_cap[j]}, LE, 0.0,
                         name=f"cap_{j}_{k}")
        for i in range(M):
            for j in range(N):
                m.add_constr({lay.x_edge[i, j, k]: 1.0}, LE,
                             inst.eligible[i, j, k] * inst.demand[i, k],
                             name=f"elig_{i}_{j}_{k}")
        for i in range(M):
            coeffs = {lay.x_cloud[i, k]: inst.delay_cloud[i]}
            for j in range(N):
                coeffs[lay.x_edge[i, j, k]] = inst.delay_edge[i, j]
            coeffs[lay.avg_delay[i, k]] = -inst.demand[i, k]
            m.add_constr(coeffs, EQ, 0.0, name=f"ddef_{i}_{k}")
        for i in range(M):
            m.add_constr({lay.avg_delay[i, k]: 1.0}, LE, inst.delay_cap[k],
                         name=f"dcap_{i}_{k}")
        m.add_constr({lay.rev[k]: 1.0, lay.y_cloud[k]: inst.cloud_price},
                     LE, inst.budget[k], name=f"budget_{k}")

        # pi[j,v,k] = r[j,v] * mu2[k]
        for j in range(N):
            for v in range(V):
                p_id, r_id = lay.pi[j, v, k], lay.r[j, v]
                m.add_constr({p_id: 1.0, r_id: -m_lin}, LE, 0.0,
                             name=f"piub1_{j}_{v}_{k}")
                m.add_constr({p_id: 1.0, lay.mu2[k]: -1.0}, LE, 0.0,
                             name=f"piub2_{j}_{v}_{k}")
                m.add_constr({lay.mu2[k]: 1.0, p_id: -1.0, r_id: m_lin},
                             LE, m_lin, name=f"pilb_{j}_{v}_{k}")
        # g[j,k] = t[j,k] * gamma[j,k]
        for j in range(N):
            g_id, t_id = lay.g[j, k], lay.t[j, k]
            m.add_constr({g_id: 1.0, t_id: -m_lin}, LE, 0.0,
                         name=f"gub1_{j}_{k}")
            m.add_constr({g_id: 1.0, lay.gamma[j, k]: -1.0}, LE, 0.0,
                         name=f"gub2_{j}_{k}")
            m.add_constr({lay.gamma[j, k]: 1.0, g_id: -1.0, t_id: m_lin},
                         LE, m_lin, name=f"glb_{j}_{k}")

        # Strong-duality revenue: edge revenue written in dual terms.
        coeffs = {lay.rev[k]: 1.0, lay.y_cloud[k]: inst.cloud_price,
                  lay.mu2[k]: inst.budget[k]}
        for i in range(M):
            coeffs[lay.x_cloud[i, k]] = w * inst.delay_cloud[i]
            coeffs[lay.xi[i, k]] = -inst.demand[i, k]
            coeffs[lay.tau[i, k]] = float(inst.delay_cap[k])
            for j in range(N):
                coeffs[lay.x_edge[i, j, k]] = w * inst.delay_edge[i, j]
                coeffs[lay.eta[i, j, k]] = (inst.demand[i, k]
                                            * inst.eligible[i, j, k])
        for j in range(N):
            coeffs[lay.g[j, k]] = inst.compute_cap[j]
        m.add_constr(coeffs, EQ, 0.0, name=f"revdef_{k}")

    obj: Dict[int, float] = {}
    for k in range(K):
        obj[lay.rev[k]] = 1.0
        for j in range(N):
            obj[lay.y_edge[j, k]] = -inst.variable_cost[j] / inst.compute_cap[j]
            obj[lay.t[j, k]] = -inst.placement_cost[j, k]
    for j in range(N):
        obj[lay.z[j]] = -inst.fixed_cost[j]
    m.set_objective(obj)
    return m, lay


def _rounded_binary(sol: MilpSolution, vid: int, name: str) -> int:
    val = sol.values[vid]
    if abs(val - round(val)) > TOL.binary_integrality:
        raise IntegrityError(f"binary {name} not integral: {val}")
    return int(round(val))


def extract_solution(inst: Instance, lay: MilpLayout, sol: MilpSolution,
                     ) -> Tuple[LeaderDecision, List[FollowerSolution],
                                List[DualSolution]]:
    """Map MILP values back to decision objects and cross-check the profit.

    Both builders write their multiplier rows in the explicit-dual sign
    convention, so the extracted multipliers are directly comparable with
    the ones ``solve_follower`` returns.
    """
    if sol.status not in ("optimal", "gap-limit"):
        raise ValueError(f"cannot extract from solution with status {sol.status}")
    M, N, K, V = inst.num_aps, inst.num_ens, inst.num_services, inst.num_price_levels
    level = np.zeros(N, dtype=int)
    for j in range(N):
        picks = [v for v in range(V)
                 if _rounded_binary(sol, lay.r[j, v], f"r[{j},{v}]")]
        if len(picks) != 1:
            raise IntegrityError(f"EN {j} selects {len(picks)} price levels")
        level[j] = picks[0]
    ld = LeaderDecision(
        price_level=level,
        price=np.array([inst.price_grid[j, level[j]] for j in range(N)]),
        active=np.array([_rounded_binary(sol, lay.z[j], f"z[{j}]")
                         for j in range(N)]),
        placed=np.array([[_rounded_binary(sol, lay.t[j, k], f"t[{j},{k}]")
                          for k in range(K)] for j in range(N)]),
    )
    followers, duals = [], []
    for k in range(K):
        fs = FollowerSolution(
            x_cloud=np.array([sol.values[lay.x_cloud[i, k]] for i in range(M)]),
            x_edge=np.array([[sol.values[lay.x_edge[i, j, k]] for j in range(N)]
                             for i in range(M)]),
            y_cloud=sol.values[lay.y_cloud[k]],
            y_edge=np.array([sol.values[lay.y_edge[j, k]] for j in range(N)]),
            avg_delay=np.array([sol.values[lay.avg_delay[i, k]]
                                for i in range(M)]),
            cost=0.0,
        )
        fs.cost = follower_cost(inst, ld.price, k, fs)
        followers.append(fs)
        duals.append(DualSolution(
            xi=np.array([sol.values[lay.xi[i, k]] for i in range(M)]),
            sigma=np.array([sol.values[lay.sigma[i, k]] for i in range(M)]),
            tau=np.array([sol.values[lay.tau[i, k]] for i in range(M)]),
            mu1=sol.values[lay.mu1[k]],
            mu2=sol.values[lay.mu2[k]],
            lam=np.array([sol.values[lay.lam[j, k]] for j in range(N)]),
            gamma=np.array([sol.values[lay.gamma[j, k]] for j in range(N)]),
            eta=np.array([[sol.values[lay.eta[i, j, k]] for j in range(N)]
                          for i in range(M)]),
            zeta=np.array([sol.values[lay.zeta[i, k]] for i in range(M)]),
            eps=np.array([[sol.values[lay.eps[i, j, k]] for j in range(N)]
                          for i in range(M)]),
        ))
    profit = leader_profit(inst, ld, followers)
    if sol.status == "optimal":
        rel = abs(profit - sol.objective) / max(1.0, abs(sol.objective))
        if rel > TOL.profit_recompute_rel:
            raise IntegrityError(
                f"profit recomputation mismatch: model {sol.objective}, "
                f"first-principles {profit}")
    return ld, followers, duals
