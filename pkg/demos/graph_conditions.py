"""
When can the followers reach the leader?
========================================

Each follower forms a virtual error from the output differences to its
neighbours. The stacked virtual error is ``(H kron I) e`` where ``H`` is
the follower block of the leader-augmented Laplacian. The design needs
every eigenvalue of ``H`` in the open right half-plane, which holds
exactly when the leader roots a spanning tree.

Run with ``python3 demos/graph_conditions.py``.
"""

import numpy as np

from coopreg import Digraph, double_integrator_team, laplacian_parts, synthesize_state_feedback
from coopreg.exceptions import NoSpanningTree
from coopreg.graph import reachable_from_leader
from coopreg.scenarios import TEAM_EDGES

team = Digraph.from_edges(5, TEAM_EDGES)
parts = laplacian_parts(team)
print("H =\n", parts.H)
print("eig(H) =", np.round(np.linalg.eigvals(parts.H), 4))

# %%
# Cut the leader's link to agent 1. Agent 1 still hears agent 2, which
# hears the leader, so the tree survives and eig(H) stays in the open
# right half-plane.
# Cutting the link to agent 2 instead leaves agent 2 unreachable, and
# cutting both isolates the leader.
for cut in ([(0, 1)], [(0, 2)], [(0, 1), (0, 2)]):
    edges = [e for e in TEAM_EDGES if (e[0], e[1]) not in cut]
    g = Digraph.from_edges(5, edges)
    reach = sorted(reachable_from_leader(g))
    ev = np.linalg.eigvals(laplacian_parts(g).H)
    print(f"cut {cut}: reachable {reach}, min Re eig(H) = {ev.real.min():.4f}")
    try:
        ctrl = synthesize_state_feedback(double_integrator_team(graph=g), gamma0=0.1)
        print(f"  synthesis ok, gamma = {ctrl.gamma}, nu1 = {ctrl.nu1:.4f}")
    except NoSpanningTree as exc:
        print("  synthesis refused:", exc, "| unreachable:", exc.witness)
