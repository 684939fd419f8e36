"""Dense linear-algebra kernels shared by the design, verification and
simulation code.

All public routines take and return real ``numpy`` arrays; complex
arithmetic stays inside the spectral helpers.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import (
    AssumptionViolation,
    BorderlineRankWarning,
    DimensionError,
    MinimalPolynomialAmbiguity,
    NumericFailure,
    SynthesisInfeasible,
)

EPS_RANK = 1e-9
ARE_RTOL = 1e-9

LEFT, AXIS, RIGHT = "left", "axis", "right"


def as_matrix(a, name="matrix"):
    """Return `a` as a finite 2-D float array."""
    m = np.array(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def _square(a, name="matrix"):
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


def axis_tolerance(a):
    """Default tolerance for classifying an eigenvalue as imaginary-axis."""
    return 1e-8 * (1.0 + np.linalg.norm(a, "fro"))


def mat_exp(a, t=1.0):
    """Matrix exponential ``exp(a * t)`` (scaling and squaring, Pade)."""
    a = _square(a, "A")
    return sla.expm(a * float(t))


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues with a left / axis / right classification."""

    values: np.ndarray
    labels: tuple
    eps_axis: float

    def __len__(self):
        return len(self.values)

    @property
    def max_real(self):
        return float(np.max(self.values.real)) if len(self.values) else -np.inf

    @property
    def min_real(self):
        return float(np.min(self.values.real)) if len(self.values) else np.inf

    def where(self, label):
        return self.values[[lab == label for lab in self.labels]]


def classify(values, eps_axis):
    labels = []
    for lam in values:
        if lam.real < -eps_axis:
            labels.append(LEFT)
        elif lam.real > eps_axis:
            labels.append(RIGHT)
        else:
            labels.append(AXIS)
    return tuple(labels)


def eigenvalues(a, eps_axis=None):
    """All eigenvalues of a square matrix, classified against `eps_axis`.

    Parameters
    ----------
    a : (n, n) array_like
    eps_axis : float, optional
        Half-width of the band around the imaginary axis. Defaults to
        ``1e-8 * (1 + ||a||_F)``.

    Returns
    -------
    Spectrum
    """
    a = _square(a, "A")
    if eps_axis is None:
        eps_axis = axis_tolerance(a)
    try:
        vals = np.linalg.eigvals(a).astype(complex)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"eigenvalue iteration did not converge: {exc}") from exc
    return Spectrum(vals, classify(vals, eps_axis), float(eps_axis))


def numerical_rank(m, eps_rank=EPS_RANK, context="matrix"):
    """Rank by singular values with threshold ``eps_rank * sigma_max``.

    Emits a :class:`BorderlineRankWarning` when a singular value lies within
    a factor 10 of the threshold.
    """
    m = np.asarray(m)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0.0:
        return 0
    thr = eps_rank * s[0]
    close = s[(s > thr / 10) & (s < thr * 10)]
    if close.size:
        warnings.warn(
            f"{context}: singular value {close[0]:.3e} is within 10x of the "
            f"rank threshold {thr:.3e}",
            BorderlineRankWarning,
            stacklevel=2,
        )
    return int(np.sum(s > thr))


def distinct(values, tol=1e-6):
    """Cluster nearly equal complex numbers, keeping one representative."""
    out = []
    for lam in values:
        if all(abs(lam - mu) > tol * (1 + abs(mu)) for mu in out):
            out.append(lam)
    return out


def minimal_polynomial(s, eps_rank=EPS_RANK):
    """Monic minimal polynomial of `s`, coefficients in ascending order.

    Stacks ``vec(I), vec(S), vec(S^2), ...`` of the norm-scaled matrix and
    stops at the first power that is linearly dependent on the previous ones.

    Raises
    ------
    MinimalPolynomialAmbiguity
        If the deciding singular value lies within a factor 10 of
        ``eps_rank * sigma_max``.
    """
    s = _square(s, "S")
    n = s.shape[0]
    if n == 0:
        return np.array([1.0])
    scale = np.linalg.norm(s, 2)
    if scale == 0.0:
        return np.array([0.0, 1.0])
    sh = s / scale
    powers = [np.eye(n).ravel()]
    current = np.eye(n)
    for d in range(1, n + 1):
        current = current @ sh
        powers.append(current.ravel())
        krylov = np.column_stack(powers)
        sv = np.linalg.svd(krylov, compute_uv=False)
        thr = eps_rank * sv[0]
        smin = sv[-1]
        if thr / 10 < smin < thr * 10:
            raise MinimalPolynomialAmbiguity(
                f"rank test at degree {d} is indecisive: singular value "
                f"{smin:.3e} vs threshold {thr:.3e}",
                singular_value=float(smin),
                threshold=float(thr),
            )
        if smin <= thr / 10:
            coef, *_ = np.linalg.lstsq(krylov[:, :d], -krylov[:, d], rcond=None)
            scaled = np.append(coef, 1.0)
            # undo the normalisation: c_k -> c_k * scale^(d-k)
            return scaled * scale ** (d - np.arange(d + 1))
    raise NumericFailure("Krylov stack never became rank deficient")


def polyval_matrix(coef, s):
    """Evaluate the ascending-coefficient polynomial `coef` at matrix `s`."""
    s = _square(s, "S")
    out = np.zeros_like(s)
    for c in coef[::-1]:
        out = out @ s + c * np.eye(s.shape[0])
    return out


def companion(coef):
    """Companion matrix of a monic ascending polynomial, last row carries
    ``-c_0, ..., -c_{d-1}`` so that ``(companion, e_d)`` is controllable."""
    coef = np.asarray(coef, dtype=float)
    d = len(coef) - 1
    beta = np.zeros((d, d))
    if d == 0:
        return beta
    beta[:-1, 1:] = np.eye(d - 1)
    beta[-1, :] = -coef[:-1]
    return beta


def _pbh(a, b, lams, eps_rank, context):
    n = a.shape[0]
    for lam in lams:
        m = np.hstack([a - lam * np.eye(n), b])
        if numerical_rank(m, eps_rank, context) < n:
            return False, lam
    return True, None


def pbh_stabilizable(a, b, eps_rank=EPS_RANK, eps_axis=None, witness=False):
    """PBH stabilizability of ``(a, b)``.

    Tests ``rank [a - lam I, b] = n`` at every eigenvalue with real part
    ``>= -eps_axis``. With ``witness=True`` returns ``(ok, lam)``.
    """
    a = _square(a, "A")
    b = as_matrix(b, "B")
    if b.shape[0] != a.shape[0]:
        raise DimensionError(f"B has {b.shape[0]} rows, A is {a.shape[0]}x{a.shape[0]}")
    spec = eigenvalues(a, eps_axis)
    lams = [lam for lam, lab in zip(spec.values, spec.labels) if lab != LEFT]
    ok, lam = _pbh(a, b, distinct(lams), eps_rank, "PBH stabilizability")
    return (ok, lam) if witness else ok


def pbh_detectable(c, a, eps_rank=EPS_RANK, eps_axis=None, witness=False):
    """PBH detectability of ``(c, a)``, the dual of :func:`pbh_stabilizable`."""
    a = _square(a, "A")
    c = as_matrix(c, "C")
    if c.shape[1] != a.shape[0]:
        raise DimensionError(f"C has {c.shape[1]} columns, A is {a.shape[0]}x{a.shape[0]}")
    return pbh_stabilizable(a.T, c.T, eps_rank, eps_axis, witness)


def pbh_controllable(a, b, eps_rank=EPS_RANK):
    a = _square(a, "A")
    b = as_matrix(b, "B")
    ok, _ = _pbh(a, b, distinct(eigenvalues(a).values), eps_rank, "PBH controllability")
    return ok


def transmission_rank_ok(a, b, c, s, eps_rank=EPS_RANK, witness=False):
    """Check ``rank [[A - lam I, B], [C, 0]] = n + p`` at each eigenvalue of S."""
    a = _square(a, "A")
    b = as_matrix(b, "B")
    c = as_matrix(c, "C")
    s = _square(s, "S")
    n, m, p = a.shape[0], b.shape[1], c.shape[0]
    if b.shape[0] != n or c.shape[1] != n:
        raise DimensionError("A, B, C have incompatible shapes")
    for lam in distinct(eigenvalues(s).values):
        top = np.hstack([a - lam * np.eye(n), b])
        bottom = np.hstack([c, np.zeros((p, m))]).astype(complex)
        r = numerical_rank(np.vstack([top, bottom]), eps_rank, "transmission rank")
        if r < n + p:
            return (False, lam) if witness else False
    return (True, None) if witness else True


def is_hurwitz(a, margin=0.0):
    a = _square(a, "A")
    if a.shape[0] == 0:
        return True
    return bool(np.max(np.linalg.eigvals(a).real) < -margin)


def care_residual(a, g, q, p):
    return np.linalg.norm(a.T @ p + p @ a - p @ g @ p + q, "fro")


def care(a, g, q, newton_steps=8):
    """Stabilizing solution of ``A'P + PA - P G P + Q = 0``.

    Ordered real Schur form of the Hamiltonian gives the first iterate;
    Newton-Kleinman steps then polish it while the residual keeps falling.

    Raises
    ------
    SynthesisInfeasible
        If the Hamiltonian has imaginary-axis eigenvalues or the stable
        invariant subspace is not a graph subspace.
    """
    a = _square(a, "A")
    n = a.shape[0]
    ham = np.block([[a, -g], [-q, -a.T]])
    hev = np.linalg.eigvals(ham)
    tol = 1e-10 * (1.0 + np.linalg.norm(ham, "fro"))
    if np.min(np.abs(hev.real)) <= tol:
        raise SynthesisInfeasible("Hamiltonian has eigenvalues on the imaginary axis")
    try:
        _, z, sdim = sla.schur(ham, output="real", sort="lhp")
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"ordered Schur form failed: {exc}") from exc
    if sdim != n:
        raise SynthesisInfeasible(f"stable invariant subspace has dimension {sdim}, expected {n}")
    u1, u2 = z[:n, :n], z[n:, :n]
    if np.linalg.cond(u1) > 1e12:
        raise SynthesisInfeasible("stable Hamiltonian subspace is not a graph subspace")
    p = np.linalg.solve(u1.T, u2.T).T
    p = (p + p.T) / 2
    res = care_residual(a, g, q, p)
    for _ in range(newton_steps):
        closed = a - g @ p
        if not is_hurwitz(closed):
            break
        p_new = sla.solve_continuous_lyapunov(closed.T, -(q + p @ g @ p))
        p_new = (p_new + p_new.T) / 2
        res_new = care_residual(a, g, q, p_new)
        if not res_new < res:
            break
        p, res = p_new, res_new
    return p


def _require_pd(p, what):
    # low-gain solutions are badly scaled (eigenvalues ~ gamma^(2k-1) on a
    # k-chain), so positivity is judged relative to roundoff, not to 1
    w = np.linalg.eigvalsh(p)
    floor = 10 * p.shape[0] * np.finfo(float).eps * abs(w[-1])
    try:
        np.linalg.cholesky(p)
    except np.linalg.LinAlgError:
        w[0] = min(w[0], 0.0)
    if w[0] <= floor:
        raise SynthesisInfeasible(f"{what} is not positive definite (min eigenvalue {w[0]:.3e})")


def solve_parametric_are(a, b, gamma):
    """Positive definite solution of ``A'P + PA - P B B' P + gamma P = 0``.

    Solved as the standard Riccati equation of ``(A + gamma/2 I, B)`` with a
    zero state weight. The solution is positive definite when no eigenvalue
    of ``A + gamma/2 I`` lies in the open left half-plane.

    Raises
    ------
    SynthesisInfeasible
        If the shifted pair is not stabilizable or no positive definite
        stabilizing solution exists.
    """
    a = _square(a, "A")
    b = as_matrix(b, "B")
    if b.shape[0] != a.shape[0]:
        raise DimensionError("B must have as many rows as A")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    n = a.shape[0]
    shifted = a + 0.5 * gamma * np.eye(n)
    ok, lam = pbh_stabilizable(shifted, b, witness=True)
    if not ok:
        raise SynthesisInfeasible(f"(A + gamma/2 I, B) is not stabilizable at {lam}")
    zero = np.zeros((n, n))
    p = care(shifted, b @ b.T, zero)
    d = np.ones(n)
    for _ in range(2):
        diag = np.diag(p)
        if np.any(diag <= 0):
            break
        # re-solve in coordinates where the solution has unit diagonal
        d = d / np.sqrt(diag)
        a_bal = shifted * d[None, :] / d[:, None]
        b_bal = b / d[:, None]
        p = care(a_bal, b_bal @ b_bal.T, zero)
    a_bal = shifted * d[None, :] / d[:, None]
    b_bal = b / d[:, None]
    if care_residual(a_bal, b_bal @ b_bal.T, zero, p) > ARE_RTOL * np.linalg.norm(p, "fro"):
        raise NumericFailure("parametric ARE residual above tolerance")
    _require_pd(p, "parametric ARE solution")
    p = p / np.outer(d, d)
    return (p + p.T) / 2


def solve_dual_riccati(a, c):
    """Positive definite solution of ``A P + P A' + I - P C' C P = 0``."""
    a = _square(a, "A")
    c = as_matrix(c, "C")
    if c.shape[1] != a.shape[0]:
        raise DimensionError("C must have as many columns as A")
    if not np.any(c):
        raise SynthesisInfeasible("output matrix is identically zero")
    ok, lam = pbh_detectable(c, a, witness=True)
    if not ok:
        raise SynthesisInfeasible(f"(C, A) is not detectable at {lam}")
    n = a.shape[0]
    p = care(a.T, c.T @ c, np.eye(n))
    if care_residual(a.T, c.T @ c, np.eye(n), p) > ARE_RTOL * max(1.0, np.linalg.norm(p, "fro")):
        raise NumericFailure("dual Riccati residual above tolerance")
    _require_pd(p, "dual Riccati solution")
    return p


def spectral_split(a, eps_axis=None):
    """Block-diagonalise `a` into imaginary-axis and stable parts.

    Returns ``(T, A1, A2)`` with ``T a T^{-1} = blockdiag(A1, A2)``, where
    the spectrum of ``A1`` lies within `eps_axis` of the imaginary axis and
    ``A2`` is Hurwitz.

    Raises
    ------
    AssumptionViolation
        If `a` has an eigenvalue in the open right half-plane.
    """
    a = _square(a, "A")
    n = a.shape[0]
    if eps_axis is None:
        eps_axis = axis_tolerance(a)
    spec = eigenvalues(a, eps_axis)
    right = spec.where(RIGHT)
    if len(right):
        raise AssumptionViolation(
            f"eigenvalue {right[0]} lies in the open right half-plane", witness=right[0]
        )
    k = sum(lab == AXIS for lab in spec.labels)
    if k == 0:
        return np.eye(n), np.zeros((0, 0)), a.copy()
    if k == n:
        return np.eye(n), a.copy(), np.zeros((0, 0))
    ts, u, sdim = sla.schur(a, output="real", sort=lambda re, im: abs(re) <= eps_axis)
    if sdim != k:
        raise NumericFailure(f"Schur reordering selected {sdim} axis eigenvalues, expected {k}")
    t11, t12, t22 = ts[:k, :k], ts[:k, k:], ts[k:, k:]
    x = sla.solve_sylvester(t11, -t22, t12)
    z = np.eye(n)
    z[:k, k:] = x
    return z @ u.T, t11, t22
