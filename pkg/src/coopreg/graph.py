"""Leader-follower communication digraphs and their Laplacian blocks.

Node 0 is the leader (the exosystem); nodes 1..N are the followers. The
weight ``a[i, j] > 0`` means agent ``i`` receives information from node
``j``, i.e. the graph has the edge ``(j, i)``.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .exceptions import GraphConsistencyError
from .numerics import axis_tolerance


@dataclass(frozen=True)
class Digraph:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ValueError(f"adjacency must be square, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("edge weights must be finite and nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("self loops are not allowed")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_edges(cls, node_count, edges):
        """Build from ``(from_node, to_node, weight)`` triples."""
        w = np.zeros((node_count, node_count))
        for edge in edges:
            j, i, *rest = edge
            weight = float(rest[0]) if rest else 1.0
            if not (0 <= i < node_count and 0 <= j < node_count):
                raise ValueError(f"edge {edge} refers to a node outside 0..{node_count - 1}")
            if i == 0:
                raise ValueError("the leader (node 0) cannot receive information")
            w[i, j] = weight
        return cls(w)

    @property
    def node_count(self):
        return self.weights.shape[0]

    @property
    def followers(self):
        return self.node_count - 1

    def edges(self):
        """Edge triples ``(from, to, weight)`` in row-major order of the target."""
        out = []
        for i in range(self.node_count):
            for j in range(self.node_count):
                if self.weights[i, j] > 0:
                    out.append((j, i, float(self.weights[i, j])))
        return out

    def neighbors(self, i):
        return [j for j in range(self.node_count) if self.weights[i, j] > 0]


@dataclass(frozen=True)
class LaplacianParts:
    L_bar: np.ndarray
    H: np.ndarray
    Delta: np.ndarray


def laplacian_parts(g):
    """Laplacian of the full graph plus its follower block ``H`` and
    the diagonal matrix ``Delta`` of leader weights."""
    a = g.weights
    lap = np.diag(a.sum(axis=1)) - a
    return LaplacianParts(L_bar=lap, H=lap[1:, 1:].copy(), Delta=np.diag(a[1:, 0]))


def reachable_from_leader(g):
    """Nodes reachable from node 0 along the direction of information flow."""
    seen = {0}
    queue = deque([0])
    while queue:
        j = queue.popleft()
        for i in np.nonzero(g.weights[:, j] > 0)[0]:
            if int(i) not in seen:
                seen.add(int(i))
                queue.append(int(i))
    return seen


def has_spanning_tree_from_leader(g, check_spectrum=True):
    """True iff every follower is reachable from the leader.

    Traversal decides; when `check_spectrum` is set the answer is compared
    with the sign of ``min Re eig(H)`` and a disagreement beyond the axis
    tolerance raises :class:`GraphConsistencyError`.
    """
    ok = len(reachable_from_leader(g)) == g.node_count
    if check_spectrum and g.followers > 0:
        h = laplacian_parts(g).H
        tol = axis_tolerance(h)
        smallest = float(np.min(np.linalg.eigvals(h).real))
        if (ok and smallest < -tol) or (not ok and smallest > tol):
            raise GraphConsistencyError(
                f"traversal says {ok} but min Re eig(H) = {smallest:.3e}"
            )
    return ok


def virtual_errors(g, e):
    """Per-agent weighted neighbour differences ``sum_j a_ij (y_i - y_j)``.

    `e` is an ``(N, p)`` array of regulated errors; since the leader's
    error is zero, differences of errors equal differences of outputs.
    """
    e = np.asarray(e, dtype=float)
    a = g.weights
    padded = np.vstack([np.zeros((1, e.shape[1])), e])
    out = np.zeros_like(e)
    for i in range(1, g.node_count):
        for j in g.neighbors(i):
            out[i - 1] += a[i, j] * (padded[i] - padded[j])
    return out
