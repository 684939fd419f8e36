"""Distributed low-gain controller design and closed-loop assembly.

The state-feedback gains ``(Kx, Kz)`` come from a parametric Riccati
equation on the augmented pair ``(Ac, Bc)``; the output-feedback design
reuses them and adds an observer gain ``L`` from a dual Riccati equation.
Every design is certified by locating the rightmost characteristic root of
each delayed subsystem ``x' = Ac x + lam Bc K x(t - tau)``, one per
eigenvalue ``lam`` of ``H``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    AssumptionViolation,
    DimensionError,
    GridRefinementError,
    NoSpanningTree,
    SynthesisInfeasible,
)
from .graph import laplacian_parts
from .numerics import (
    as_matrix,
    is_hurwitz,
    mat_exp,
    solve_dual_riccati,
    solve_parametric_are,
    spectral_split,
)
from .plant import build_internal_model, check_assumptions

log = logging.getLogger(__name__)

STATE_FEEDBACK = "state-feedback"
OUTPUT_FEEDBACK = "output-feedback"

DEFAULT_GRID = 24
DEFAULT_MARGIN = 1e-6
GRID_TOL = 1e-4


# --------------------------------------------------------------------------
# characteristic roots of linear delay systems

def chebyshev(grid, tau):
    """Chebyshev extremal nodes on ``[-tau, 0]`` (node 0 at ``theta = 0``)
    and the matching differentiation matrix."""
    k = np.arange(grid + 1)
    x = np.cos(np.pi * k / grid)
    c = np.where((k == 0) | (k == grid), 2.0, 1.0) * (-1.0) ** k
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(grid + 1))
    d -= np.diag(d.sum(axis=1))
    return tau * (x - 1.0) / 2.0, d * (2.0 / tau)


def _lagrange_row(nodes, point):
    """Values of every Lagrange basis polynomial on `nodes` at `point`."""
    hit = np.isclose(nodes, point, rtol=0, atol=1e-14 * (1 + abs(point)))
    if hit.any():
        row = np.zeros(len(nodes))
        row[np.argmax(hit)] = 1.0
        return row
    k = np.arange(len(nodes))
    w = np.where((k == 0) | (k == len(nodes) - 1), 0.5, 1.0) * (-1.0) ** k
    terms = w / (point - nodes)
    return terms / terms.sum()


def delay_spectrum(terms, grid=DEFAULT_GRID):
    """Eigenvalues of the pseudospectral discretisation of the generator of
    ``x'(t) = sum_k M_k x(t - d_k)``.

    Parameters
    ----------
    terms : list of (delay, matrix)
    grid : int
        Number of Chebyshev intervals on ``[-max delay, 0]``.
    """
    terms = [(float(d), as_matrix(m)) for d, m in terms]
    n = terms[0][1].shape[0]
    tau = max(d for d, _ in terms)
    if tau == 0.0:
        return np.linalg.eigvals(sum(m for _, m in terms)).astype(complex)
    nodes, d = chebyshev(grid, tau)
    big = np.zeros((n * (grid + 1), n * (grid + 1)))
    big[n:, :] = np.kron(d[1:], np.eye(n))
    for delay, m in terms:
        big[:n, :] += np.kron(_lagrange_row(nodes, -delay)[None, :], m)
    return np.linalg.eigvals(big).astype(complex)


def _rightmost(values):
    values = np.asarray(values)
    best = np.max(values.real)
    near = values[values.real >= best - 1e-12 * (1 + abs(best))]
    return complex(near[np.argmax(near.imag)])


def rightmost_root(terms, grid=DEFAULT_GRID, tol=GRID_TOL, max_grid=384):
    """Rightmost characteristic root, refined by grid doubling.

    Returns ``(root, grid_used)``. Raises :class:`GridRefinementError` if
    two successive grids still differ by more than `tol` at `max_grid`.
    """
    terms = [(float(d), as_matrix(m)) for d, m in terms]
    if max(d for d, _ in terms) == 0.0:
        return _rightmost(delay_spectrum(terms)), 0
    if all(not np.any(m) for d, m in terms if d > 0):
        return _rightmost(np.linalg.eigvals(sum(m for d, m in terms if d == 0))), 0
    if grid < 8:
        raise ValueError("grid must be at least 8")
    coarse = _rightmost(delay_spectrum(terms, grid))
    while True:
        fine = _rightmost(delay_spectrum(terms, 2 * grid))
        if abs(fine - coarse) <= tol:
            return fine, 2 * grid
        grid *= 2
        if 2 * grid > max_grid:
            raise GridRefinementError(
                f"rightmost root moved by {abs(fine - coarse):.2e} between grids "
                f"{grid // 2} and {grid}"
            )
        coarse = fine


def dde_rightmost_root(m0, m1, tau, grid=DEFAULT_GRID):
    """Rightmost characteristic root of ``x' = M0 x + M1 x(t - tau)``."""
    m0 = as_matrix(m0, "M0")
    m1 = as_matrix(m1, "M1")
    if m0.shape != m1.shape or m0.shape[0] != m0.shape[1]:
        raise DimensionError("M0 and M1 must be square and of equal size")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    root, _ = rightmost_root([(0.0, m0), (float(tau), m1)], grid)
    return root


def realify(m):
    """Real ``2n x 2n`` representation of a complex ``n x n`` matrix."""
    return np.block([[m.real, -m.imag], [m.imag, m.real]])


# --------------------------------------------------------------------------
# low-gain design

@dataclass
class StabilityCertificate:
    lambdas: list
    roots: list
    margin: float
    grid: int
    accepted: bool

    def to_dict(self):
        return {
            "lambdas": [[float(np.real(z)), float(np.imag(z))] for z in self.lambdas],
            "roots": [[float(np.real(z)), float(np.imag(z))] for z in self.roots],
            "margin": self.margin,
            "grid": self.grid,
            "accepted": self.accepted,
        }


def certify(a1, b1k, lambdas, tau, a2=None, margin=DEFAULT_MARGIN, grid=DEFAULT_GRID):
    """Certify ``x' = a1 x + lam b1k x(t - tau)`` for every `lam`.

    Complex `lam` are handled through the real realification. When the
    stable block `a2` is given its spectral abscissa joins each estimate,
    since it sits in cascade below the delayed part.
    """
    roots = []
    used = 0
    stable_floor = -np.inf
    if a2 is not None and a2.shape[0]:
        stable_floor = float(np.max(np.linalg.eigvals(a2).real))
    for lam in lambdas:
        lam = complex(lam)
        if a1.shape[0] == 0:
            root = complex(stable_floor, 0.0)
        else:
            if abs(lam.imag) <= 1e-12 * abs(lam):
                terms = [(0.0, a1), (tau, lam.real * b1k)]
            else:
                terms = [(0.0, np.kron(np.eye(2), a1)), (tau, realify(lam * b1k))]
            root, g = rightmost_root(terms, grid)
            used = max(used, g)
            if stable_floor > root.real:
                root = complex(stable_floor, 0.0)
        roots.append(root)
    accepted = all(r.real < -margin for r in roots)
    return StabilityCertificate(list(lambdas), roots, margin, used, accepted)


def low_gain_K(ac, bc, lambda_set, tau, gamma, nu1, margin=DEFAULT_MARGIN, grid=DEFAULT_GRID):
    """Low-gain feedback ``K`` stabilising every ``x' = Ac x + lam Bc K x(t - tau)``.

    The imaginary-axis part ``(A1, B1)`` of ``(Ac, Bc)`` gets
    ``K1 = -B1' P exp(A1 tau) / nu1`` with ``P`` from the parametric ARE;
    the stable part gets no feedback and the result is mapped back through
    the splitting transform.

    Returns
    -------
    K : (m, n) ndarray
    cert : StabilityCertificate
    """
    ac = as_matrix(ac, "Ac")
    bc = as_matrix(bc, "Bc")
    lambdas = [complex(x) for x in lambda_set]
    if not lambdas:
        raise ValueError("lambda_set is empty")
    min_re = min(x.real for x in lambdas)
    if not (0 < nu1 <= min_re * (1 + 1e-12)):
        raise ValueError(f"nu1 = {nu1} must lie in (0, min Re lambda = {min_re}]")
    try:
        t, a1, a2 = spectral_split(ac)
    except AssumptionViolation as exc:
        raise SynthesisInfeasible(str(exc)) from exc
    k = a1.shape[0]
    m = bc.shape[1]
    tb = t @ bc
    b1 = tb[:k]
    if k == 0:
        gain = np.zeros((m, ac.shape[0]))
        cert = certify(a1, np.zeros((0, 0)), lambdas, tau, a2=a2, margin=margin, grid=grid)
        return gain, cert
    p = solve_parametric_are(a1, b1, gamma)
    k1 = -(b1.T @ p @ mat_exp(a1, tau)) / nu1
    kbar = np.hstack([k1, np.zeros((m, ac.shape[0] - k))])
    cert = certify(a1, b1 @ k1, lambdas, tau, a2=a2, margin=margin, grid=grid)
    return kbar @ t, cert


@dataclass
class ControllerRealization:
    """Synthesised distributed controller."""

    kind: str
    Kx: np.ndarray
    Kz: np.ndarray
    im: object
    gamma: float
    nu1: float
    L: np.ndarray = None
    nu2: float = None
    certificate: StabilityCertificate = None
    notes: list = field(default_factory=list)

    @property
    def K1(self):
        return self.Kz

    @property
    def K2(self):
        return self.Kx

    @property
    def G1(self):
        return self.im.G1

    @property
    def G2(self):
        return self.im.G2


def augmented_pair(a, b, c, im):
    """``Ac = [[A, 0], [G2 C, G1]]`` and ``Bc = [B; 0]``."""
    n, nz = a.shape[0], im.nz
    ac = np.block([[a, np.zeros((n, nz))], [im.G2 @ c, im.G1]])
    bc = np.vstack([b, np.zeros((nz, b.shape[1]))])
    return ac, bc


def _require(report, keys):
    tree = [r for r in report.failures(keys) if r.key == "spanning_tree"]
    if tree:
        raise NoSpanningTree(
            "the leader does not root a spanning tree; no distributed controller "
            "of this form can solve the problem", witness=tree[0].witness,
        )
    bad = report.failures(keys)
    if bad:
        raise AssumptionViolation(
            "; ".join(f"{r.key} fails (witness {r.witness})" for r in bad),
            witness=bad[0].witness,
        )


_STATE_KEYS = (
    "exosystem_on_axis", "stabilizable", "transmission_rank", "spanning_tree", "no_unstable_modes",
)


def _state_design(pe, gamma0, nu1, max_halvings, margin, grid):
    lam = np.linalg.eigvals(laplacian_parts(pe.graph).H)
    if nu1 is None:
        nu1 = float(np.min(lam.real))
    im = build_internal_model(pe.exo.S, pe.dims[2])
    ac, bc = augmented_pair(pe.A, pe.B, pe.C, im)
    gamma = float(gamma0)
    for attempt in range(max_halvings + 1):
        try:
            gain, cert = low_gain_K(ac, bc, lam, pe.tau, gamma, nu1, margin, grid)
        except GridRefinementError as exc:
            log.info("gamma=%g: certificate unresolved (%s)", gamma, exc)
            cert = None
        if cert is not None and cert.accepted:
            n = pe.dims[0]
            return im, gain[:, :n], gain[:, n:], gamma, nu1, cert
        log.info("gamma=%g rejected, halving", gamma)
        gamma /= 2
    raise SynthesisInfeasible(
        f"no certified gain after {max_halvings} halvings of gamma0={gamma0}"
    )


def synthesize_state_feedback(pe, gamma0=0.1, nu1=None, max_halvings=20,
                              margin=DEFAULT_MARGIN, grid=DEFAULT_GRID):
    """Distributed dynamic state feedback ``u_i = Kx eta_i + Kz z_i``.

    ``nu1`` defaults to ``min Re eig(H)``; ``gamma`` is halved from
    `gamma0` until every per-eigenvalue subsystem is certified stable.

    Raises
    ------
    NoSpanningTree
        If the leader does not root a spanning tree.
    AssumptionViolation
        For any other hard assumption failure.
    SynthesisInfeasible
        If halving is exhausted.
    """
    _require(check_assumptions(pe), _STATE_KEYS)
    im, kx, kz, gamma, nu1, cert = _state_design(pe, gamma0, nu1, max_halvings, margin, grid)
    return ControllerRealization(
        kind=STATE_FEEDBACK, Kx=kx, Kz=kz, im=im, gamma=gamma, nu1=nu1, certificate=cert,
    )


def synthesize_output_feedback(pe, gamma0=0.1, nu1=None, nu2=None, max_halvings=20,
                               margin=DEFAULT_MARGIN, grid=DEFAULT_GRID):
    """Distributed dynamic output feedback with observer gain
    ``L = P~ C' / nu2``.

    ``nu2`` defaults to ``1 / max Re eig(H)`` clipped to ``min Re eig(H)``
    and is halved until every ``A - lam L C`` is Hurwitz.
    """
    report = check_assumptions(pe)
    _require(report, _STATE_KEYS + ("detectable",))
    im, kx, kz, gamma, nu1, cert = _state_design(pe, gamma0, nu1, max_halvings, margin, grid)
    lam = np.linalg.eigvals(laplacian_parts(pe.graph).H)
    notes = []
    if nu2 is None:
        nu2 = min(1.0 / float(np.max(lam.real)), float(np.min(lam.real)))
        notes.append("nu2 from the heuristic default min(1/max Re eig(H), min Re eig(H))")
    p_obs = solve_dual_riccati(pe.A, pe.C)
    for _ in range(max_halvings + 1):
        gain_l = p_obs @ pe.C.T / nu2
        if all(is_hurwitz(pe.A - x * gain_l @ pe.C) for x in lam):
            break
        nu2 /= 2
    else:
        raise SynthesisInfeasible("observer coupling I kron A - H kron LC is not Hurwitz")
    return ControllerRealization(
        kind=OUTPUT_FEEDBACK, Kx=kx, Kz=kz, im=im, gamma=gamma, nu1=nu1,
        L=gain_l, nu2=nu2, certificate=cert, notes=notes,
    )


# --------------------------------------------------------------------------
# closed loop in the shifted coordinates

@dataclass(frozen=True)
class ClosedLoop:
    """``x_c' = A0 x_c + A1 x_c(t - tau) + B v``, ``e_v = C0 x_c + C1 x_c(t - tau) + D v``."""

    A_cw0: np.ndarray
    A_cw1: np.ndarray
    B_cw: np.ndarray
    C_cw0: np.ndarray
    C_cw1: np.ndarray
    D_cw: np.ndarray
    taus: tuple
    blocks: tuple = ()

    @property
    def tau(self):
        return self.taus[1]

    @property
    def dim(self):
        return self.A_cw0.shape[0]


def assemble_closed_loop(pe, ctrl, use_nominal=True):
    """Closed-loop matrices with the controller states shifted forward by
    the communication delay, so only the lags ``0`` and ``tau`` remain.

    ``blocks`` lists the sizes of ``x``, ``z`` (and ``xi``).
    """
    st = pe.stacked(use_nominal=use_nominal)
    n, m, p, q = pe.dims
    big_n = pe.N
    h = laplacian_parts(pe.graph).H
    eye = np.eye(big_n)
    g1 = np.kron(eye, ctrl.G1)
    g2 = np.kron(eye, ctrl.G2)
    nx, nzs = big_n * n, big_n * ctrl.im.nz
    if ctrl.Kx.shape != (m, n) or ctrl.Kz.shape != (m, ctrl.im.nz):
        raise DimensionError("gain shapes do not match the plant and internal model")
    kx_t = np.kron(h, ctrl.Kx)
    kz_t = np.kron(eye, ctrl.Kz)
    if ctrl.kind == STATE_FEEDBACK:
        a0 = np.block([[st.A, np.zeros((nx, nzs))], [g2 @ st.C, g1]])
        a1 = np.block([[st.B @ kx_t, st.B @ kz_t], [np.zeros((nzs, nx + nzs))]])
        b = np.vstack([st.E, g2 @ st.F])
        c0 = np.hstack([st.C, np.zeros((st.C.shape[0], nzs))])
        blocks = (nx, nzs)
    elif ctrl.kind == OUTPUT_FEEDBACK:
        if ctrl.L is None or ctrl.L.shape != (n, p):
            raise DimensionError("output feedback needs an n x p observer gain")
        s1 = np.kron(eye, pe.A) - np.kron(h, ctrl.L @ pe.C)
        s2 = np.kron(eye, ctrl.L)
        bn = np.kron(eye, pe.B)
        s3 = np.hstack([bn @ kz_t, bn @ kx_t])
        z = np.zeros
        a0 = np.block([
            [st.A, z((nx, nzs)), z((nx, nx))],
            [g2 @ st.C, g1, z((nzs, nx))],
            [s2 @ st.C, z((nx, nzs)), s1],
        ])
        a1 = np.block([
            [z((nx, nx)), st.B @ kz_t, st.B @ kx_t],
            [z((nzs, nx + nzs + nx))],
            [z((nx, nx)), s3],
        ])
        b = np.vstack([st.E, g2 @ st.F, s2 @ st.F])
        c0 = np.hstack([st.C, np.zeros((st.C.shape[0], nzs + nx))])
        blocks = (nx, nzs, nx)
    else:
        raise ValueError(f"unknown controller kind {ctrl.kind!r}")
    return ClosedLoop(
        A_cw0=a0, A_cw1=a1, B_cw=b, C_cw0=c0, C_cw1=np.zeros_like(c0), D_cw=st.F.copy(),
        taus=(0.0, pe.tau), blocks=blocks,
    )


def closed_loop_rightmost_root(cl, grid=DEFAULT_GRID):
    """Rightmost characteristic root of the assembled two-lag closed loop."""
    return rightmost_root([(0.0, cl.A_cw0), (cl.tau, cl.A_cw1)], grid)[0]
