"""Observed convergence rates along each experiment axis.

For each axis a geometric sweep is run and a least-squares line is fitted
to the log-log data.  Expected slopes: about -1.5 in the truncation level,
about +2 in the mesh size h (nodal information) and about -1/2 in the
sample size.

Run with ``python demos/02_convergence_rates.py``.
"""
from covrecon.experiments import ExperimentConfig, run_converge

cfg = ExperimentConfig(replicates=5)

studies = [
    ("truncation", cfg, [8, 16, 32, 64, 128]),
    ("fem", cfg.replace(information="pointwise"), [8, 16, 32, 64, 128]),
    ("sampling", cfg.replace(n_h=40), [256, 1024, 4096, 16384]),
]
for axis, c, sweep in studies:
    res = run_converge(c, axis, sweep)
    print(f"{axis:10s} slope {res.slope:+.3f}  R^2 {res.r2:.4f}")
    for x, m in zip(res.values, res.mean):
        print(f"    {x:>10g}  {m:.4e}")
