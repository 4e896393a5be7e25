"""Anchored (Halpern) iteration against the plain proximal point method.

The test operator is a block-diagonal rotation whose frequencies range over
[1e-3, 1]. Slow blocks make the plain method sublinear, close to k^(-1/2),
while the anchored iteration keeps a 1/k residual.

Run: python3 demos/02_halpern_vs_classical.py
"""
import numpy as np

from hippm import SolveConfig, ToleranceSchedule, fit_rate, run_hippm
from hippm.instances import skew2, spread_skew

K = 10001
inst = spread_skew()
op = inst.operator()
traces = {m: run_hippm(op, SolveConfig(anchor=inst.anchor, max_iter=K, method=m,
                                       tolerance=ToleranceSchedule.exact(K)))
          for m in ("halpern", "classical")}

print(f"{inst.name}: residual ||z_k - P(z_k)||")
print(f"{'k':>6} {'halpern':>11} {'classical':>11}")
for k in (10, 100, 500, 1000, 5000, 10000):
    print(f"{k:6d} {traces['halpern'].residual[k]:11.3e} {traces['classical'].residual[k]:11.3e}")
for m, tr in traces.items():
    print(f"{m:9s} log-log slope over [1e3, 1e4]: {fit_rate(tr, 1000, 10000):+.3f}")
h, c = traces["halpern"].residual, traces["classical"].residual
print("halpern below classical for every k >= 500:", bool(np.all(h[500:] < c[500:])))

# On a single planar rotation the plain method is not a fair opponent: its
# resolvent contracts by 1/sqrt(2) every step, so it converges linearly.
tr = run_hippm(skew2().operator(), SolveConfig(anchor=[1.0, 0.0], max_iter=60, method="classical",
                                               tolerance=ToleranceSchedule.exact(60)))
print("\nplanar rotation, classical residual ratio per step:", tr.residual[21] / tr.residual[20])
