"""
The low-gain trade-off
======================

The parameter gamma sets the decay rate the feedback aims for. Large
gamma gives aggressive gains that the input delay destabilises; small
gamma is always safe but slow. This script scans gamma and reports the
gain size, the certified rightmost root and the error over the last 50 s
of a 200 s run. The smallest gammas are still in their transient there.

Run with ``python3 demos/low_gain_tradeoff.py``.
"""

import numpy as np

from coopreg import decay_metrics, double_integrator_team, simulate_state_feedback, synthesize_state_feedback
from coopreg.exceptions import SynthesisInfeasible

team = double_integrator_team()

for gamma in (0.8, 0.4, 0.2, 0.1, 0.05, 0.025):
    try:
        ctrl = synthesize_state_feedback(team, gamma0=gamma, nu1=1.0, max_halvings=0)
    except SynthesisInfeasible:
        print(f"gamma = {gamma:6.3f}: not certified")
        continue
    worst = max(complex(r).real for r in ctrl.certificate.roots)
    traj = simulate_state_feedback(team, ctrl, t_end=200.0, dt=1e-2)
    tail = decay_metrics(traj).tail_sup.max()
    gain = np.linalg.norm(np.hstack([ctrl.Kx, ctrl.Kz]))
    print(f"gamma = {gamma:6.3f}: |K| = {gain:.4f}, rightmost root {worst:+.4f}, tail sup |e| = {tail:.2e}")
