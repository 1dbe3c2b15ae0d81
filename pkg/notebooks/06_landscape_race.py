"""
Three losses from one random start
==================================

A ReLU teacher with Laplace inputs. The loss built from the matched score
finds the teacher's rows; the Gaussian-score version and plain squared
error stall. Scaled to d = 6 and 4000 iterations for a quick run; the
command line defaults to d = 10 and 10^4 iterations.
"""

from score_landscape.harness import ExperimentSpec, run

spec = ExperimentSpec.for_kind("landscape-race", dim=6, iters=4000, record_every=500)
res = run(spec)
for method in ("l2", "gaussian", "designed"):
    curve = [(it, err) for it, m, err in res.rows if m == method]
    print(f"{method:9s}", " ".join(f"{err:.3f}" for _, err in curve))
print({k: v for k, v in res.summary.items() if k.startswith("status")})
