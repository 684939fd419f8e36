"""
Why the tracking error vanishes: the delay regulator equations
==============================================================

For the closed loop ``xc' = A0 xc + A1 xc(t - tau) + B v`` driven by the
exosystem ``v' = S v``, the steady state is ``xc = X v`` where

    X S = A0 X + A1 X exp(-S tau) + B.

The tracking error in steady state is ``Y_w v``. With the internal model
in the loop, ``Y_w`` vanishes even when the plant is perturbed.

Run with ``python3 demos/regulator_equations.py``.
"""

import numpy as np

from coopreg import (
    dde_rightmost_root,
    double_integrator_team,
    mat_exp,
    solve_delay_regulator,
    synthesize_state_feedback,
    verify_regulation,
)

team = double_integrator_team()
ctrl = synthesize_state_feedback(team, gamma0=0.1, nu1=1.0)

# %%
# Nominal and perturbed plants, same controller.
for nominal in (True, False):
    rep = verify_regulation(team, ctrl, use_nominal=nominal)
    label = "nominal  " if nominal else "perturbed"
    print(f"{label}: |Y_w| = {rep.Y_w_norm:.2e}, residual = {rep.residual_dynamic:.2e}, "
          f"cond = {rep.condition:.1e}, rightmost root = {rep.rightmost_root:.4f}")

# %%
# Scaling the perturbation up leaves Y_w at roundoff: the regulator
# equations stay solvable with a zero error block. What the larger
# perturbations destroy is stability, without which the steady state is
# never reached.
w = team.uncertainty()
for scale in (1, 3, 10, 30):
    rep = verify_regulation(team.nominal(), ctrl, perturbation_w=scale * w)
    print(f"  {scale:3d} x w: stable = {rep.stable!s:5s} |Y_w| = {rep.Y_w_norm:.2e}")

# %%
# Contrast with a single agent under static delayed feedback plus exact
# feedforward of the reference, u = K (x - v)(t - tau). The steady state
# x = v is exact for the nominal agent, but a perturbed agent settles with
# a constant offset because nothing in the loop reproduces the ramp.
a = np.array([[0.0, 1.0], [0.0, 0.0]])
b = np.array([[0.0], [1.0]])
c = np.array([[1.0, 0.0]])
f = np.array([[-1.0, 0.0]])
s = np.array([[0.0, 1.0], [0.0, 0.0]])
k = np.array([[-0.3, -0.8]])
tau = 0.5
print("static loop rightmost root:", np.round(dde_rightmost_root(a, b @ k, tau), 4))
for label, da, db in (("nominal", 0.0, 0.0), ("perturbed", 0.05, 0.03)):
    ap = a + np.array([[0.0, da], [0.0, 0.0]])
    bp = b + np.array([[db], [0.0]])
    sol = solve_delay_regulator(ap, bp @ k, -bp @ k @ mat_exp(-s, tau), s, tau, c0=c, c1=np.zeros_like(c), d=f)
    print(f"  {label:9s} static loop: Y_w = {sol.Y_w.round(4)}")
