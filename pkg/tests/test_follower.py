"""Follower LP: structure, duality, complementarity, perturbation
responses and infeasibility diagnosis."""

import dataclasses

import numpy as np
import pytest

from edgemarket.follower import (FollowerContext, FollowerInfeasibleError,
                                 build_follower_dual, build_follower_lp,
                                 check_strong_duality,
                                 complementarity_residuals, dual_objective,
                                 solve_follower)
from edgemarket.model import follower_cost

from conftest import tiny_instance


def _ctx(seed=1, k=0, price=0.03, placed=1):
    inst = tiny_instance(seed)
    prices = np.full(inst.num_ens, price)
    placement = np.full(inst.num_ens, placed, dtype=int)
    return FollowerContext(inst, k, prices, placement)


def test_lp_dimensions_minimal_case():
    inst = tiny_instance(11, num_aps=1, num_ens=1, num_services=1)
    ctx = FollowerContext(inst, 0, [0.03], [1])
    m = build_follower_lp(ctx)
    # x0, x, y0, y, da
    assert m.num_vars == 5
    # bal, cov0, cov, cap, elig, budget, ddef (delay cap is a bound)
    assert m.num_constrs == 7


def test_primal_dual_agreement():
    for seed in range(8):
        ctx = _ctx(seed)
        try:
            fs, ds = solve_follower(ctx)
        except FollowerInfeasibleError:
            continue
        rep = check_strong_duality(fs, ds, ctx)
        assert rep.passed, (seed, rep)
        assert abs(rep.primal_value - rep.dual_value) \
            <= 1e-7 * (1 + abs(rep.primal_value))


def test_complementarity_residuals_small():
    for seed in range(8):
        ctx = _ctx(seed)
        try:
            fs, ds = solve_follower(ctx)
        except FollowerInfeasibleError:
            continue
        res = complementarity_residuals(fs, ds, ctx)
        assert set(res) == {"delay_cap", "cloud_coverage", "edge_coverage",
                            "capacity", "eligibility", "budget",
                            "x_cloud_sign", "x_edge_sign"}
        worst = max(res.values())
        assert worst <= 1e-5, (seed, res)


def test_solution_is_feasible_and_demand_balanced():
    ctx = _ctx(2)
    fs, _ = solve_follower(ctx)
    inst, k = ctx.inst, ctx.k
    assert np.allclose(fs.x_cloud + fs.x_edge.sum(axis=1),
                       inst.demand[:, k], atol=1e-7)
    assert fs.y_cloud >= fs.x_cloud.sum() - 1e-7
    assert np.all(fs.y_edge >= fs.x_edge.sum(axis=0) - 1e-7)
    assert np.all(fs.y_edge <= inst.compute_cap * ctx.placed + 1e-7)
    spend = inst.cloud_price * fs.y_cloud + float(ctx.prices @ fs.y_edge)
    assert spend <= inst.budget[k] + 1e-7
    assert np.all(fs.avg_delay <= inst.delay_cap[k] + 1e-7)


def test_cost_matches_follower_cost_helper():
    ctx = _ctx(2)
    fs, _ = solve_follower(ctx)
    assert fs.cost == pytest.approx(
        follower_cost(ctx.inst, ctx.prices, ctx.k, fs), abs=1e-9)


def test_unplaced_service_stays_on_cloud():
    ctx = _ctx(2, placed=0)
    fs, _ = solve_follower(ctx)
    assert np.allclose(fs.x_edge, 0.0, atol=1e-9)
    assert np.allclose(fs.y_edge, 0.0, atol=1e-9)
    assert fs.y_cloud == pytest.approx(ctx.inst.demand[:, ctx.k].sum(),
                                       abs=1e-7)


def test_price_increase_never_decreases_cost():
    """Follower optimum is monotone in the edge price."""
    inst = tiny_instance(5)
    placed = np.ones(inst.num_ens, dtype=int)
    costs = []
    for price in (0.01, 0.03, 0.05):
        ctx = FollowerContext(inst, 0, np.full(inst.num_ens, price), placed)
        fs, _ = solve_follower(ctx)
        costs.append(fs.cost)
    assert costs[0] <= costs[1] + 1e-9 <= costs[2] + 2e-9


def test_cheap_edge_attracts_all_eligible_load():
    """At an edge price below the cloud price and with full eligibility,
    everything moves to the edge when capacity allows."""
    inst = tiny_instance(12, num_aps=2, num_ens=1, num_services=1,
                         demand_range=(1.0, 2.0))
    if not inst.eligible.all():
        pytest.skip("random delays made an AP ineligible")
    ctx = FollowerContext(inst, 0, [0.005], [1])
    fs, _ = solve_follower(ctx)
    assert fs.y_cloud == pytest.approx(0.0, abs=1e-7)
    assert fs.x_edge.sum() == pytest.approx(inst.demand[:, 0].sum(), abs=1e-6)


def test_infeasibility_diagnosis_names_budget():
    inst = tiny_instance(6)
    tight = dataclasses.replace(inst, budget=np.full(inst.num_services, 1e-6))
    ctx = FollowerContext(tight, 0, np.full(inst.num_ens, 0.03),
                          np.ones(inst.num_ens, dtype=int))
    with pytest.raises(FollowerInfeasibleError, match="budget"):
        solve_follower(ctx)


def test_infeasibility_diagnosis_names_delay_cap():
    # Cap below the cloud delay with no eligible EN; per-AP demand above
    # the cloud delay makes the cap the cheapest row to relax.
    inst = tiny_instance(6, demand_range=(80.0, 90.0))
    strict = dataclasses.replace(
        inst, delay_cap=np.full(inst.num_services, 50.0),
        eligible=np.zeros_like(inst.eligible))
    ctx = FollowerContext(strict, 0, np.full(inst.num_ens, 0.03),
                          np.ones(inst.num_ens, dtype=int))
    with pytest.raises(FollowerInfeasibleError, match="delay cap"):
        solve_follower(ctx)


def test_dual_objective_matches_explicit_dual_lp():
    from edgemarket import lp_core
    ctx = _ctx(2)
    dual = build_follower_dual(ctx)
    dsol = lp_core.solve_lp(dual)
    fs, ds = solve_follower(ctx)
    assert dsol.status == lp_core.OPTIMAL
    assert dual_objective(ctx, ds) == pytest.approx(dsol.objective, abs=1e-7)
    assert fs.cost == pytest.approx(dsol.objective, abs=1e-6)


def test_context_rejects_wrong_shapes():
    inst = tiny_instance(3)
    with pytest.raises(ValueError):
        FollowerContext(inst, 0, np.zeros(inst.num_ens + 1),
                        np.ones(inst.num_ens, dtype=int))
