"""Closed-form solver for the single-EN special case.

With one EN, each service either buys from that EN or from the cloud,
so its best response has a greedy closed form and the platform can just
enumerate the price grid. Two regimes: an edge price at or below the
cloud price attracts all workload (Case 1); a higher price attracts only
APs whose delay saving beats the price premium, capped by the budget
(Case 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .model import FollowerSolution, Instance

_TOL = 1e-9


@dataclass
class SingleEnResult:
    status: str                      # "optimal" or "infeasible"
    price: Optional[float]
    profit: Optional[float]
    case: str                        # case1 | case2 | inactive | infeasible
    followers: Optional[List[FollowerSolution]]
    placed: Optional[np.ndarray]     # (K,)
    per_price: Dict[float, object] = field(default_factory=dict)


def _require_single_en(inst: Instance):
    if inst.num_ens != 1:
        raise ValueError(f"analytic solver requires N=1, got {inst.num_ens}")


def _cloud_solution(inst: Instance, k: int) -> Optional[FollowerSolution]:
    """All-cloud response; None when even that violates budget or delay."""
    R = inst.demand[:, k]
    total = float(R.sum())
    if inst.cloud_price * total > inst.budget[k] + _TOL:
        return None
    if np.any((R > 0) & (inst.delay_cloud > inst.delay_cap[k] + _TOL)):
        return None
    fs = FollowerSolution(
        x_cloud=R.copy(), x_edge=np.zeros((inst.num_aps, 1)),
        y_cloud=total, y_edge=np.zeros(1),
        avg_delay=np.where(R > 0, inst.delay_cloud, 0.0), cost=0.0)
    fs.cost = (inst.cloud_price * total
               + inst.delay_weight[k] * float(R @ inst.delay_cloud))
    return fs


def follower_best_response_single_en(inst: Instance, k: int, p1: float,
                                     ) -> Optional[FollowerSolution]:
    """Greedy best response of service k when the single EN charges p1
    and hosts the service; None when the response is infeasible.

    The per-unit saving of moving AP i's workload to the EN is
    w*(d0_i - d1_i) - (p1 - p0); offloading strictly-positive savers in
    descending order, capped by the EN capacity and (when p1 > p0) by
    the budget headroom, is the exact continuous-knapsack optimum.
    """
    _require_single_en(inst)
    p0, w = inst.cloud_price, inst.delay_weight[k]
    R = inst.demand[:, k]
    d1 = inst.delay_edge[:, 0]
    elig = inst.eligible[:, 0, k]
    total = float(R.sum())
    M = inst.num_aps
    premium = p1 - p0

    remaining = float(inst.compute_cap[0])
    if premium > _TOL:
        if p0 * total > inst.budget[k] + _TOL:
            # Offloading only raises spend: the cloud fallback is the
            # cheapest allocation, and even it is unaffordable.
            return None
        remaining = min(remaining, (inst.budget[k] - p0 * total) / premium)
    saving = w * (inst.delay_cloud - d1) - premium
    x_edge = np.zeros(M)
    for i in sorted(range(M), key=lambda i: (-saving[i], i)):
        if remaining <= _TOL:
            break
        if not elig[i] or R[i] <= 0 or saving[i] <= _TOL:
            continue
        x_edge[i] = min(R[i], remaining)
        remaining -= x_edge[i]
    x_cloud = R - x_edge
    spend = p0 * float(x_cloud.sum()) + p1 * float(x_edge.sum())
    if spend > inst.budget[k] + _TOL:
        return None
    with np.errstate(invalid="ignore"):
        da = np.where(R > 0,
                      (x_cloud * inst.delay_cloud + x_edge * d1)
                      / np.maximum(R, 1e-300), 0.0)
    if np.any(da > inst.delay_cap[k] + _TOL):
        return None
    fs = FollowerSolution(
        x_cloud=x_cloud, x_edge=x_edge.reshape(M, 1),
        y_cloud=float(x_cloud.sum()), y_edge=np.array([float(x_edge.sum())]),
        avg_delay=da, cost=0.0)
    fs.cost = spend + w * float(x_cloud @ inst.delay_cloud + x_edge @ d1)
    return fs


def _evaluate_price(inst: Instance, p1: float):
    """Per-service responses at p1 with storage-aware placement; returns
    (profit, followers, placed) or a reason string."""
    K = inst.num_services
    responses = []
    for k in range(K):
        fs = follower_best_response_single_en(inst, k, p1)
        if fs is None:
            return f"follower {k} infeasible at p1={p1}"
        responses.append(fs)
    placed = np.array([1 if fs.y_edge[0] > _TOL else 0 for fs in responses])
    # Storage: drop the least profitable placements until the EN fits.
    while float(inst.service_size @ placed) > inst.storage_cap[0] + _TOL:
        cands = [k for k in range(K) if placed[k]]
        worst = min(cands, key=lambda k: (p1 * responses[k].y_edge[0]
                                          - inst.placement_cost[0, k], k))
        placed[worst] = 0
        fallback = _cloud_solution(inst, worst)
        if fallback is None:
            return f"follower {worst} infeasible without placement"
        responses[worst] = fallback
    edge_total = sum(fs.y_edge[0] for fs in responses)
    if edge_total > inst.compute_cap[0] + _TOL:
        # Services jointly over-demand the EN; their individually optimal
        # responses cannot coexist, so this price is not playable.
        return "over-demanded"
    if not placed.any():
        return 0.0, responses, placed   # nothing placed: keep the EN off
    profit = (p1 * edge_total
              - inst.fixed_cost[0]
              - inst.variable_cost[0] * edge_total / inst.compute_cap[0]
              - float(inst.placement_cost[0] @ placed))
    return profit, responses, placed


def solve_single_en(inst: Instance) -> SingleEnResult:
    """Enumerate the price grid: Case 1 over prices at or below the cloud
    price, Case 2 descending from the top of the grid, plus the
    all-inactive fallback; returns the overall argmax."""
    _require_single_en(inst)
    p0 = inst.cloud_price
    grid = inst.price_grid[0]
    per_price: Dict[float, object] = {}
    best = None   # (profit, case, price, followers, placed)

    def consider(profit, case, price, followers, placed):
        nonlocal best
        if best is None or profit > best[0] + _TOL or (
                abs(profit - best[0]) <= _TOL and case == "case2"):
            best = (profit, case, price, followers, placed)

    for p1 in sorted((p for p in grid if p <= p0), reverse=True):
        res = _evaluate_price(inst, p1)
        per_price[p1] = res if isinstance(res, str) else res[0]
        if not isinstance(res, str):
            consider(res[0], "case1", p1, res[1], res[2])

    for p1 in sorted((p for p in grid if p > p0), reverse=True):
        res = _evaluate_price(inst, p1)
        per_price[p1] = res if isinstance(res, str) else res[0]
        if res == "over-demanded":
            break   # offloads grow as the price drops; lower prices too
        if not isinstance(res, str):
            consider(res[0], "case2", p1, res[1], res[2])

    # All-inactive fallback: valid when every service can live on the cloud.
    cloud = [_cloud_solution(inst, k) for k in range(inst.num_services)]
    if all(fs is not None for fs in cloud):
        consider(0.0, "inactive", None, cloud,
                 np.zeros(inst.num_services, int))

    if best is None:
        return SingleEnResult("infeasible", None, None, "infeasible",
                              None, None, per_price)
    profit, case, price, followers, placed = best
    return SingleEnResult("optimal", price, profit, case, followers, placed,
                          per_price)
