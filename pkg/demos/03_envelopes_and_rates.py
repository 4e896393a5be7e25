"""Inexact runs under the absolute tolerance rule and their residual envelopes.

Tolerances eps_k = 1/(k+2)^(1+delta). Adversarial mode spends the full
budget eps_k in a seeded random direction each step. The envelope
2 dist0/(k+1) + sqrt(Theta_k) bounds every residual, and its slope
approaches -min(delta/2, 1).

Run: python3 demos/03_envelopes_and_rates.py
"""
import numpy as np

from hippm import (EnvelopeParams, SolveConfig, ToleranceSchedule, bound_report, predicted_slope,
                   fit_rate, run_hippm, theta_envelope)
from hippm.instances import skew2

inst = skew2()
dist0 = float(np.linalg.norm(inst.anchor - inst.zstar))
ks = np.array([10, 100, 1000, 10000])

for delta in (0.5, 1.0, 2.0, 3.0):
    tr = run_hippm(inst.operator(), SolveConfig(
        anchor=inst.anchor, max_iter=10001, tolerance=ToleranceSchedule("A", delta),
        error_mode="adversarial", seed=1, zstar=inst.zstar))
    rep = bound_report(tr)
    env = theta_envelope(EnvelopeParams.from_run(delta, dist0), ks)
    print(f"delta={delta:g}  envelope holds at all k: {rep.all_satisfied}  "
          f"predicted slope {predicted_slope(delta):+.2f}  observed {fit_rate(tr, 1000, 10000):+.3f}")
    for k, e in zip(ks, env):
        print(f"    k={k:6d}  residual {tr.residual[k]:.3e}  envelope {e:.3e}")
# The observed slope is close to -1 for every delta: a random error direction
# rarely lines up against the iteration, so the envelope is pessimistic for
# small delta. It is a worst-case guarantee, not a prediction.
