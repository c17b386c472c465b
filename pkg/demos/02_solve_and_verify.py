"""Solve one instance three ways and certify the answer.

The bilevel program (platform sets prices/activation/placement, each
service then splits its workload optimally) is solved by:
  - P2, the duality reformulation: embed each follower's dual LP and a
    strong-duality equality; the follower's optimality becomes linear.
  - P1, the KKT reformulation: embed stationarity plus big-M linearized
    complementarity switches.
  - a brute-force oracle that enumerates every leader candidate and
    re-solves the follower LPs, for ground truth at tiny sizes.
All three must agree, and the winning decision is re-certified by
re-solving each follower LP from scratch.
"""

import numpy as np

from edgemarket import (MilpConfig, ScenarioConfig, brute_force_bilevel,
                        sample_instance, solve_p1, solve_p2,
                        verify_bilevel_optimality)

inst = sample_instance(ScenarioConfig(
    seed=5, num_aps=3, num_ens=2, num_services=2,
    price_levels=(0.01, 0.03, 0.05)))
cfg = MilpConfig(backend="highs")

p2 = solve_p2(inst, cfg)
p1 = solve_p1(inst, cfg)
oracle = brute_force_bilevel(inst, keep_log=False)

print(f"duality reformulation  profit {p2.objective:.9f}  "
      f"({p2.milp.nodes_explored} nodes)")
print(f"kkt reformulation      profit {p1.objective:.9f}  "
      f"({p1.milp.nodes_explored} nodes, {p1.escalations} big-M "
      "escalations)")
print(f"brute-force oracle     profit {oracle.profit:.9f}  "
      f"({oracle.candidates_examined} candidates)")
assert abs(p2.objective - oracle.profit) <= 1e-6 * (1 + abs(oracle.profit))
assert abs(p1.objective - oracle.profit) <= 1e-6 * (1 + abs(oracle.profit))

ld = p2.leader
print(f"\nprices    {ld.price}")
print(f"active    {ld.active}")
print(f"placed\n{ld.placed}")
for k, fs in enumerate(p2.followers):
    print(f"service {k}: edge {fs.y_edge.sum():.2f}, "
          f"cloud {fs.y_cloud:.2f}, cost {fs.cost:.4f}")

# incentive compatibility: no service can do better than the allocation
# the MILP claims for it
cert = verify_bilevel_optimality(inst, ld, p2.followers)
print(f"\nbilevel optimality certified: {cert.passed} "
      f"(worst relative cost gap {max(cert.rel_diffs):.2e})")
assert cert.passed
