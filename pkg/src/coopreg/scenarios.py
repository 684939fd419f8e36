"""Ready-made scenarios: four double-integrator followers tracking a ramp."""

import numpy as np

from .graph import Digraph
from .plant import AgentPlant, Exosystem, PlantEnsemble

# (from, to, weight)
TEAM_EDGES = [(0, 1, 1.0), (2, 1, 1.0), (0, 2, 1.0), (1, 3, 1.0), (1, 4, 1.0), (2, 4, 1.0), (3, 4, 1.0)]

# per-agent (gain error on the velocity coupling, input leakage into position)
TEAM_PERTURBATION = (0.05, 0.03, 0.05, 0.01, 0.02, 0.08, 0.05, 0.04)


def team_graph():
    return Digraph.from_edges(5, TEAM_EDGES)


def double_integrator_team(perturbation=TEAM_PERTURBATION, tau_con=0.5, tau_com=0.5,
                           v0=(1.0, 0.2), graph=None):
    """Four uncertain double integrators following a ramp leader.

    ``perturbation`` holds pairs ``(w_i1, w_i2)`` per agent: ``w_i1`` is
    added to ``A[0, 1]`` and ``w_i2`` to ``B[0, 0]``. Pass ``None`` for the
    nominal plant.
    """
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    b = np.array([[0.0], [1.0]])
    c = np.array([[1.0, 0.0]])
    graph = team_graph() if graph is None else graph
    n_agents = graph.followers
    w = np.zeros(2 * n_agents) if perturbation is None else np.asarray(perturbation, dtype=float)
    agents = []
    for i in range(n_agents):
        e = np.array([[0.0, 0.0], [0.0, float(i + 1)]])
        da = np.array([[0.0, w[2 * i]], [0.0, 0.0]])
        db = np.array([[w[2 * i + 1]], [0.0]])
        agents.append(AgentPlant(a, b, e, c, dA=da, dB=db))
    exo = Exosystem(S=np.array([[0.0, 1.0], [0.0, 0.0]]), F=np.array([[-1.0, 0.0]]), v0=v0)
    return PlantEnsemble(agents, exo, graph, tau_con=tau_con, tau_com=tau_com)
