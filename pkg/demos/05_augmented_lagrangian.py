"""Anchored augmented Lagrangian method on small quadratic programs.

Canonical problem: min |x|^2/2 subject to x_1 >= 1, with x* = (1, 0),
multiplier y* = 1 and optimal value 1/2. Inner problems are solved to a
certified gap eps_k^2/(2 c_k); the weighted ergodic average of the inner
solutions carries the feasibility and objective guarantees.

Run: python3 demos/05_augmented_lagrangian.py
"""
import numpy as np

from hippm import ALMConfig, ProxParamSchedule, ergodic_bound_check, pointwise_bound_check, run_alm
from hippm.instances import canonical_qp, random_qp

prog = canonical_qp().program()
for mode in ("constant", "linear"):
    tr = run_alm(prog, ALMConfig(y0=[0.0], prox_schedule=ProxParamSchedule(mode, 1.0), max_outer=10000))
    ks, fb, ob, fok, ook = ergodic_bound_check(tr)
    pf, po = pointwise_bound_check(tr)
    print(f"{mode} c_k: y={tr.y[-1][0]:.6f}  feasibility {tr.feas_max[-1]:.2e}  "
          f"objective gap {tr.obj_gap[-1]:+.2e}")
    print(f"    ergodic bounds at k=1e4: feas <= {fb[-1]:.2e}, obj <= {ob[-1]:.2e}; "
          f"all hold: {bool(fok.all() and ook.all())}; pointwise all hold: {bool(pf.all() and po.all())}")
    print(f"    inner iterations total {int(tr.inner_iterations.sum())}")

inst = random_qp(8, 5, seed=3)
p = inst.program()
tr = run_alm(p, ALMConfig(y0=inst.anchor, prox_schedule=ProxParamSchedule.linear(1.0), max_outer=2000))
print(f"\nrandom QP (n=8, m=5): |y - y*| = {np.linalg.norm(tr.y[-1] - p.y_star):.2e}, "
      f"|x~ - x*| = {np.linalg.norm(tr.xtilde[-1] - p.x_star):.2e}")
