"""Random generators shared by the test modules. Every generator takes an
explicit ``numpy.random.Generator``."""

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import polynomial as P

from coopreg.graph import Digraph


def random_similarity(rng, n, cond=10.0):
    """Random matrix with condition number at most ``cond``."""
    q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
    q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
    d = np.exp(rng.uniform(0, np.log(cond), n))
    return q1 @ np.diag(d) @ q2


def _rotation(w):
    return np.array([[0.0, w], [-w, 0.0]])


def random_on_axis_exosystem(rng, qmax=4):
    """Random ``S`` with spectrum on the imaginary axis, plus the minimal
    polynomial implied by its block construction (ascending coefficients).
    """
    blocks = []
    zero_order = 0
    freq_order = {}
    size = 0
    while size < qmax:
        room = qmax - size
        kind = rng.choice(["zero", "rot", "rot_jordan", "repeat"])
        if kind == "zero":
            k = int(rng.integers(1, min(room, 3) + 1))
            blocks.append(np.eye(k, k=1))
            zero_order = max(zero_order, k)
            size += k
        elif kind == "rot" and room >= 2:
            w = _fresh_frequency(rng, freq_order)
            blocks.append(_rotation(w))
            freq_order[w] = max(freq_order.get(w, 0), 1)
            size += 2
        elif kind == "rot_jordan" and room >= 4:
            w = _fresh_frequency(rng, freq_order)
            j = _rotation(w)
            blocks.append(np.block([[j, np.eye(2)], [np.zeros((2, 2)), j]]))
            freq_order[w] = 2
            size += 4
        elif kind == "repeat" and freq_order and room >= 2:
            w = list(freq_order)[int(rng.integers(len(freq_order)))]
            blocks.append(_rotation(w))
            size += 2
        if size and rng.random() < 0.3:
            break
    q = size
    s = np.zeros((q, q))
    i = 0
    for b in blocks:
        k = b.shape[0]
        s[i:i + k, i:i + k] = b
        i += k
    t = random_similarity(rng, q, cond=5.0)
    s = t @ s @ np.linalg.inv(t)
    poly = np.array([1.0])
    if zero_order:
        poly = P.polymul(poly, np.eye(zero_order + 1)[-1])
    for w, k in freq_order.items():
        for _ in range(k):
            poly = P.polymul(poly, [w * w, 0.0, 1.0])
    return s, poly


def _fresh_frequency(rng, used):
    while True:
        w = float(np.round(rng.uniform(0.5, 3.0), 2))
        if all(abs(w - u) > 0.3 for u in used):
            return w


def random_digraph(rng, max_followers=6, density=None):
    """Random leader-follower digraph with positive random weights."""
    n = int(rng.integers(1, max_followers + 1))
    p = rng.uniform(0.1, 0.6) if density is None else density
    w = np.where(rng.random((n + 1, n + 1)) < p, rng.uniform(0.2, 2.0, (n + 1, n + 1)), 0.0)
    np.fill_diagonal(w, 0.0)
    w[0, :] = 0.0
    return Digraph(w)


def brute_force_reachable(g):
    """Followers reachable from node 0 by repeated relaxation of the edge set."""
    reach = {0}
    changed = True
    while changed:
        changed = False
        for j, i, _ in g.edges():
            if j in reach and i not in reach:
                reach.add(i)
                changed = True
    return reach


def random_antistable_pair(rng, n, m):
    """Controllable ``(A, B)`` whose spectrum lies in the closed right half-plane."""
    vals = []
    size = 0
    axis_used = set()
    while size < n:
        re = rng.uniform(0.0, 1.5)
        kind = "pair" if n - size >= 2 and rng.random() < 0.5 else "real"
        if kind not in axis_used and rng.random() < 0.3:
            # at most one axis eigenvalue of each kind keeps (A, B) controllable
            re = 0.0
            axis_used.add(kind)
        if kind == "pair":
            im = rng.uniform(0.3, 2.0)
            vals.append(np.array([[re, im], [-im, re]]))
        else:
            vals.append(np.array([[re]]))
        size += vals[-1].shape[0]
    d = np.zeros((n, n))
    i = 0
    for v in vals:
        k = v.shape[0]
        d[i:i + k, i:i + k] = v
        i += k
    t = random_similarity(rng, n, cond=5.0)
    a = t @ d @ np.linalg.inv(t)
    b = rng.standard_normal((n, m))
    return a, b


def random_are_case(rng, max_n=6, max_cond=1e6):
    """Random ``(A, B, gamma)`` for the parametric ARE whose solution has
    condition number at most `max_cond`.

    The condition number comes from the Lyapunov form of the inverse
    solution, so the filter does not depend on the solver under test.
    Draws that are nearly uncontrollable are redrawn.
    """
    while True:
        n = int(rng.integers(1, max_n + 1))
        m = int(rng.integers(1, 3))
        a, b = random_antistable_pair(rng, n, m)
        gamma = float(rng.uniform(0.05, 0.5))
        x = sla.solve_continuous_lyapunov(a + 0.5 * gamma * np.eye(n), b @ b.T)
        if np.linalg.cond(x) <= max_cond:
            return a, b, gamma
