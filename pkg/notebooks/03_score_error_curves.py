"""
Error percentiles versus sample size
====================================

The score-error experiment repeated over many trials, summarised by
percentiles and a log-log slope of the median. Trials are reduced here to
keep the run short; the command-line default is 500.
"""

import io

from score_landscape.harness import ExperimentSpec, run, write_result

for dist in ("gaussian", "mixture"):
    spec = ExperimentSpec.for_kind("score-error", dist=dist, trials=150)
    res = run(spec)
    medians = [(r[0], r[1], r[3]) for r in res.rows if r[2] == 50]
    print(dist)
    for n, order, err in medians:
        print(f"  n={n:<5} order={order}  median={err:.4f}")
    print(f"  slopes: order 2 {res.summary['slope_order2']:.3f}, order 4 {res.summary['slope_order4']:.3f}")

# Same table as the CLI writes, config header included.
buf = io.StringIO()
write_result(res, spec, buf)
print(buf.getvalue().splitlines()[0])
