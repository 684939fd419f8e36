"""Algebraic verification of output regulation through the delay
regulator equations

    X S = A0 X + A1 X exp(-S tau) + B,     0 = C0 X + C1 X exp(-S tau) + D.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, GridRefinementError, RegulatorSingular
from .numerics import as_matrix, mat_exp
from .synthesis import assemble_closed_loop, closed_loop_rightmost_root

COND_LIMIT = 1e12


@dataclass
class RegulatorSolution:
    X_cw: np.ndarray
    residual_dynamic: float
    residual_error: float
    Y_w: np.ndarray
    condition: float


def regulator_operator(a0, a1, s, tau):
    """Matrix of ``X -> X S - A0 X - A1 X exp(-S tau)`` acting on
    column-major ``vec(X)``."""
    q = s.shape[0]
    nc = a0.shape[0]
    shift = mat_exp(-s, tau)
    return np.kron(s.T, np.eye(nc)) - np.kron(np.eye(q), a0) - np.kron(shift.T, a1)


def solve_delay_regulator(a0, a1, b, s, tau, c0=None, c1=None, d=None):
    """Solve the first delay regulator equation for ``X_cw``.

    When the output blocks `c0`, `c1`, `d` are supplied, ``Y_w`` is
    ``C0 X + C1 X exp(-S tau) + D`` and `residual_error` is its max-abs
    entry; otherwise both are left as ``nan``.

    Raises
    ------
    RegulatorSingular
        If the vectorised operator has condition number above 1e12.
    """
    a0 = as_matrix(a0, "A_cw0")
    a1 = as_matrix(a1, "A_cw1")
    b = as_matrix(b, "B_cw")
    s = as_matrix(s, "S")
    nc, q = a0.shape[0], s.shape[0]
    if a1.shape != a0.shape or b.shape != (nc, q):
        raise DimensionError("closed-loop blocks are inconsistent")
    op = regulator_operator(a0, a1, s, tau)
    cond = float(np.linalg.cond(op)) if op.size else 1.0
    if not cond < COND_LIMIT:
        raise RegulatorSingular(
            f"regulator operator condition number {cond:.3e} exceeds {COND_LIMIT:.0e}; "
            "the closed loop is not exponentially stable or S has off-axis modes"
        )
    x = np.linalg.solve(op, b.ravel(order="F")).reshape((nc, q), order="F")
    shift = mat_exp(-s, tau)
    res_dyn = float(np.max(np.abs(x @ s - a0 @ x - a1 @ x @ shift - b))) if x.size else 0.0
    if c0 is None:
        return RegulatorSolution(x, res_dyn, float("nan"), None, cond)
    c0 = as_matrix(c0, "C_cw0")
    c1 = np.zeros_like(c0) if c1 is None else as_matrix(c1, "C_cw1")
    d = as_matrix(d, "D_cw")
    y = c0 @ x + c1 @ x @ shift + d
    res_err = float(np.max(np.abs(y))) if y.size else 0.0
    return RegulatorSolution(x, res_dyn, res_err, y, cond)


@dataclass
class RegulationReport:
    use_nominal: bool
    residual_dynamic: float
    residual_error: float
    Y_w_norm: float
    condition: float
    rightmost_root: complex
    stable: bool
    regulated: bool
    solution: RegulatorSolution = None
    message: str = ""

    def to_dict(self):
        root = self.rightmost_root
        return {
            "use_nominal": self.use_nominal,
            "residual_dynamic": self.residual_dynamic,
            "residual_error": self.residual_error,
            "Y_w_norm": self.Y_w_norm,
            "condition": self.condition,
            "rightmost_root": None if root is None else [root.real, root.imag],
            "stable": self.stable,
            "regulated": self.regulated,
            "message": self.message,
        }


def verify_regulation(pe, ctrl, use_nominal=True, perturbation_w=None, tol=1e-6,
                      grid=24, stability_margin=0.0):
    """Assemble the shifted closed loop, solve the regulator equation and
    check that the internal-model forcing ``Y_w = C~ X_w + F~`` vanishes.

    `regulated` is claimed only when the closed loop has a negative
    rightmost root and the error residual is below `tol`.
    """
    if perturbation_w is not None:
        pe = pe.with_uncertainty(perturbation_w)
        use_nominal = False
    cl = assemble_closed_loop(pe, ctrl, use_nominal=use_nominal)
    try:
        root = closed_loop_rightmost_root(cl, grid)
    except GridRefinementError as exc:
        root = None
        msg = str(exc)
    else:
        msg = ""
    stable = root is not None and root.real < -stability_margin
    sol = solve_delay_regulator(
        cl.A_cw0, cl.A_cw1, cl.B_cw, pe.exo.S, cl.tau, cl.C_cw0, cl.C_cw1, cl.D_cw
    )
    st = pe.stacked(use_nominal=use_nominal)
    x_w = sol.X_cw[: cl.blocks[0]]
    y_w = st.C @ x_w + st.F
    y_norm = float(np.max(np.abs(y_w))) if y_w.size else 0.0
    if not stable and not msg:
        msg = "closed loop is not exponentially stable; no regulation claim"
    return RegulationReport(
        use_nominal=use_nominal,
        residual_dynamic=sol.residual_dynamic,
        residual_error=sol.residual_error,
        Y_w_norm=y_norm,
        condition=sol.condition,
        rightmost_root=root,
        stable=stable,
        regulated=bool(stable and sol.residual_error <= tol),
        solution=sol,
        message=msg,
    )
