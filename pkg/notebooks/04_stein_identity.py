"""
Checking the score tensors through Stein's identity
===================================================

E[g(x) S_m(x)] equals E[grad^m g(x)] for smooth g. Monte Carlo residuals
along a few probe directions should look like standard normal draws.
"""

from score_landscape.harness import ExperimentSpec, run

res = run(ExperimentSpec.for_kind("stein-check", mc_samples=50_000))
for dist, fn, order, probe, z in res.rows:
    print(f"{dist:9s} {fn:13s} m={order} {probe:20s} z={z:+.2f}")
print("largest |z|:", round(res.summary["max_abs_z"], 2))
