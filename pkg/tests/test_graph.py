import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _helpers import brute_force_reachable, random_digraph
from coopreg.graph import (
    Digraph,
    has_spanning_tree_from_leader,
    laplacian_parts,
    reachable_from_leader,
    virtual_errors,
)
from coopreg.scenarios import TEAM_EDGES, team_graph

TEAM_H = np.array([[2.0, -1, 0, 0], [0, 1, 0, 0], [-1, 0, 1, 0], [-1, -1, -1, 3]])


def chain(n, skip_first=False):
    edges = [(k, k + 1, 1.0) for k in range(n)]
    if skip_first:
        edges = edges[1:]
    return Digraph.from_edges(n + 1, edges)


def test_team_graph_h_matrix():
    parts = laplacian_parts(team_graph())
    np.testing.assert_array_equal(parts.H, TEAM_H)
    np.testing.assert_array_equal(parts.Delta, np.diag([1.0, 1.0, 0.0, 0.0]))


def test_edgeless_graph_has_zero_laplacian():
    parts = laplacian_parts(Digraph(np.zeros((4, 4))))
    np.testing.assert_array_equal(parts.L_bar, np.zeros((4, 4)))
    np.testing.assert_array_equal(parts.H, np.zeros((3, 3)))


def test_single_follower():
    parts = laplacian_parts(Digraph.from_edges(2, [(0, 1, 1.0)]))
    np.testing.assert_array_equal(parts.H, [[1.0]])
    np.testing.assert_array_equal(parts.Delta, [[1.0]])


def test_team_graph_has_spanning_tree():
    g = team_graph()
    assert has_spanning_tree_from_leader(g)
    lam = np.linalg.eigvals(laplacian_parts(g).H)
    assert np.min(lam.real) == pytest.approx(1.0)


def test_isolated_leader_has_no_spanning_tree():
    g = Digraph.from_edges(4, [(1, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0)])
    assert not has_spanning_tree_from_leader(g)


def test_chain_and_broken_chain():
    assert has_spanning_tree_from_leader(chain(4))
    assert not has_spanning_tree_from_leader(chain(4, skip_first=True))
    assert brute_force_reachable(chain(4, skip_first=True)) == {0}


def test_digraph_validation():
    with pytest.raises(ValueError):
        Digraph(np.array([[0.0, -1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        Digraph(np.eye(2))
    with pytest.raises(ValueError):
        Digraph(np.array([[0.0, np.nan], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        Digraph.from_edges(3, [(1, 0, 1.0)])
    with pytest.raises(ValueError):
        Digraph.from_edges(3, [(0, 5, 1.0)])


def test_weights_are_read_only():
    g = team_graph()
    with pytest.raises(ValueError):
        g.weights[1, 0] = 2.0


def test_edges_round_trip():
    g = team_graph()
    again = Digraph.from_edges(g.node_count, g.edges())
    np.testing.assert_array_equal(again.weights, g.weights)
    assert sorted(g.edges()) == sorted(TEAM_EDGES)


def test_random_digraphs_traversal_matches_spectrum_and_brute_force(rng):
    for _ in range(200):
        g = random_digraph(rng)
        ok = has_spanning_tree_from_leader(g)
        assert reachable_from_leader(g) == brute_force_reachable(g)
        assert ok == (len(brute_force_reachable(g)) == g.node_count)
        smallest = np.min(np.linalg.eigvals(laplacian_parts(g).H).real)
        assert ok == (smallest > 1e-8 * (1 + np.linalg.norm(laplacian_parts(g).H)))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_laplacian_rows_sum_to_zero_and_h_identity(seed):
    g = random_digraph(np.random.default_rng(seed))
    parts = laplacian_parts(g)
    assert np.max(np.abs(parts.L_bar.sum(axis=1))) <= 1e-12
    ones = np.ones(g.followers)
    np.testing.assert_allclose(parts.H @ ones, parts.Delta @ ones, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), p=st.integers(1, 3))
def test_virtual_errors_equal_kronecker_form(seed, p):
    rng = np.random.default_rng(seed)
    g = random_digraph(rng)
    e = rng.standard_normal((g.followers, p))
    h = laplacian_parts(g).H
    stacked = np.kron(h, np.eye(p)) @ e.ravel()
    np.testing.assert_allclose(virtual_errors(g, e).ravel(), stacked, atol=1e-12)
