"""Fixed-step integration of linear delay systems and closed-loop
simulation of the distributed controllers.

Delays are snapped to multiples of the step ``dt``. Stage values at
half steps are read from a buffer kept at resolution ``dt / 2``; the
half-step entries are filled by cubic Hermite interpolation from the
step end points and their derivatives.
"""

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import DimensionError, SimulationDivergence
from .graph import laplacian_parts
from .numerics import as_matrix, mat_exp
from .synthesis import OUTPUT_FEEDBACK, STATE_FEEDBACK

log = logging.getLogger(__name__)

BLOW_UP = 1e12


@dataclass
class DelaySystem:
    """``x'(t) = sum_k M_k x(t - d_k) + B_v v(t)`` with ``v' = S v``."""

    terms: list
    B_v: np.ndarray
    S: np.ndarray
    v0: np.ndarray

    def __post_init__(self):
        merged = {}
        for d, m in self.terms:
            d = float(d)
            if d < 0:
                raise ValueError("delays must be nonnegative")
            m = as_matrix(m)
            merged[d] = merged[d] + m if d in merged else m.copy()
        if 0.0 not in merged:
            dim = next(iter(merged.values())).shape[0]
            merged[0.0] = np.zeros((dim, dim))
        self.terms = sorted(merged.items())
        dim = self.terms[0][1].shape[0]
        for _, m in self.terms:
            if m.shape != (dim, dim):
                raise DimensionError("all coefficient matrices must be state_dim x state_dim")
        self.S = as_matrix(self.S, "S")
        self.v0 = np.asarray(self.v0, dtype=float).ravel()
        self.B_v = np.asarray(self.B_v, dtype=float).reshape(dim, self.S.shape[0])

    @property
    def state_dim(self):
        return self.terms[0][1].shape[0]

    @property
    def max_delay(self):
        return self.terms[-1][0]


@dataclass
class History:
    """Initial function sampled on ``[-K dt, 0]`` with step ``dt``.

    ``midpoints`` holds the values half a step after each grid point; when
    absent they are filled with a cubic spline through ``values``.
    """

    dt: float
    values: np.ndarray
    midpoints: np.ndarray = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        k = self.values.shape[0] - 1
        if self.midpoints is None:
            if k == 0:
                self.midpoints = np.zeros((0, self.values.shape[1]))
            elif k == 1:
                self.midpoints = 0.5 * (self.values[:1] + self.values[1:])
            else:
                grid = np.arange(-k, 1) * self.dt
                self.midpoints = CubicSpline(grid, self.values, axis=0)(grid[:-1] + self.dt / 2)
        self.midpoints = np.atleast_2d(np.asarray(self.midpoints, dtype=float))

    @property
    def span(self):
        return (self.values.shape[0] - 1) * self.dt

    @classmethod
    def constant(cls, x0, span, dt):
        x0 = np.asarray(x0, dtype=float).ravel()
        k = int(round(span / dt))
        return cls(dt, np.tile(x0, (k + 1, 1)), np.tile(x0, (k, 1)))

    @classmethod
    def from_function(cls, f, span, dt):
        k = int(round(span / dt))
        grid = np.arange(-k, 1) * dt
        vals = np.array([np.atleast_1d(f(t)) for t in grid], dtype=float)
        mids = np.array([np.atleast_1d(f(t + dt / 2)) for t in grid[:-1]], dtype=float)
        return cls(dt, vals, mids.reshape(k, vals.shape[1]))


@dataclass
class Trajectory:
    """Uniformly sampled solution; ``prefix`` holds the history samples
    on ``[-span, 0)`` so that lagged channels can be formed."""

    times: np.ndarray
    states: np.ndarray
    v: np.ndarray
    dt: float
    prefix: np.ndarray = None
    channels: dict = field(default_factory=dict)
    blocks: dict = field(default_factory=dict)

    def lagged(self, delay):
        """States at ``t - delay`` on the sample grid (delay a multiple of dt)."""
        k = int(round(delay / self.dt))
        if k == 0:
            return self.states
        full = np.vstack([self.prefix, self.states])
        start = self.prefix.shape[0] - k
        if start < 0:
            raise ValueError("delay exceeds the stored history")
        return full[start:start + self.states.shape[0]]

    def to_csv(self, path, columns=("x", "e", "ev", "u", "v")):
        """Write ``t, x[..], e[..], ev[..], u[..], v[..]`` with 15 significant digits."""
        data = {"x": self.states, "v": self.v, **self.channels}
        header = ["t"]
        blocks = [self.times[:, None]]
        for name in columns:
            if name not in data:
                continue
            arr = np.asarray(data[name]).reshape(len(self.times), -1)
            header += [f"{name}[{k}]" for k in range(arr.shape[1])]
            blocks.append(arr)
        table = np.hstack(blocks)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in table:
                writer.writerow([f"{x:.15g}" for x in row])


def snap_delay(delay, dt):
    """Nearest multiple of dt (ties round up), warning if the shift exceeds dt/100."""
    k = int(np.floor(delay / dt + 0.5))
    snapped = k * dt
    if abs(snapped - delay) > dt / 100:
        warnings.warn(f"delay {delay} snapped to {snapped} (dt = {dt})", stacklevel=3)
    return k


def default_dt(delays):
    positive = [d for d in delays if d > 0]
    if not positive:
        return 1e-2
    return max(min(positive) / 50, 1e-4)


def integrate(sys, hist, t_end, dt):
    """Classical RK4 by the method of steps with exact grid reads.

    Parameters
    ----------
    sys : DelaySystem
    hist : History or array_like
        Initial function; a plain vector means a constant history.
    t_end, dt : float

    Raises
    ------
    SimulationDivergence
        At the first sample where the state is non-finite or exceeds 1e12.
    """
    if not dt > 0 or t_end < dt:
        raise ValueError("need dt > 0 and t_end >= dt")
    lags = {}
    for d, m in sys.terms:
        k = snap_delay(d, dt)
        lags[k] = lags[k] + m if k in lags else m
    kmax = max(lags)
    if not isinstance(hist, History):
        hist = History.constant(hist, kmax * dt, dt)
    if hist.values.shape[1] != sys.state_dim:
        raise DimensionError("history dimension does not match the system")
    if hist.values.shape[0] - 1 < kmax:
        raise ValueError(f"history covers {hist.span}, delays need {kmax * dt}")

    dim = sys.state_dim
    nsteps = int(round(t_end / dt))
    hk = hist.values.shape[0] - 1
    # half-step buffer: index 2*j <-> time (j - hk) * dt
    buf = np.empty((2 * (hk + nsteps) + 1, dim))
    buf[0:2 * hk + 1:2] = hist.values
    buf[1:2 * hk:2] = hist.midpoints

    m0 = lags.pop(0, np.zeros((dim, dim)))
    lag_k = np.array(sorted(lags), dtype=int)
    mcat = np.hstack([lags[k] for k in lag_k]) if len(lag_k) else np.zeros((dim, 0))

    s = sys.S
    e_half = mat_exp(s, dt / 2)
    e_full = mat_exp(s, dt)
    bv = sys.B_v
    v = np.empty((nsteps + 1, s.shape[0]))
    v[0] = sys.v0

    def delayed(idx):
        if not len(lag_k):
            return 0.0
        return mcat @ buf[idx - 2 * lag_k].ravel()

    h = dt
    base = 2 * hk
    x = buf[base].copy()
    f_prev = None
    for n in range(nsteps):
        i0 = base + 2 * n
        vn = v[n]
        v_half = e_half @ vn
        v_next = e_full @ vn
        k1 = m0 @ x + delayed(i0) + bv @ vn
        if f_prev is not None:
            # Hermite midpoint of the previous step
            buf[i0 - 1] = 0.5 * (buf[i0 - 2] + x) + h / 8 * (f_prev - k1)
        k2 = m0 @ (x + h / 2 * k1) + delayed(i0 + 1) + bv @ v_half
        k3 = m0 @ (x + h / 2 * k2) + delayed(i0 + 1) + bv @ v_half
        k4 = m0 @ (x + h * k3) + delayed(i0 + 2) + bv @ v_next
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOW_UP:
            raise SimulationDivergence(f"state diverged at t = {(n + 1) * dt:.6g}", (n + 1) * dt)
        buf[i0 + 2] = x
        v[n + 1] = v_next
        f_prev = k1
    # k1 of step n is only known inside the loop; the last midpoint is never read
    states = buf[base::2]
    return Trajectory(
        times=np.arange(nsteps + 1) * dt,
        states=states.copy(),
        v=v,
        dt=dt,
        prefix=buf[0:base:2].copy(),
    )


def exo_trajectory(s, v0, times):
    return np.array([mat_exp(s, t) @ v0 for t in times])


# --------------------------------------------------------------------------
# closed-loop simulation of the distributed controllers

def _history(init, key, size, span, dt):
    val = None if init is None else init.get(key)
    if val is None:
        return np.zeros((int(round(span / dt)) + 1, size)), None
    if callable(val):
        h = History.from_function(val, span, dt)
        return h.values, h.midpoints
    arr = np.asarray(val, dtype=float).ravel()
    if arr.size != size:
        raise DimensionError(f"initial {key} has {arr.size} entries, expected {size}")
    k = int(round(span / dt))
    return np.tile(arr, (k + 1, 1)), np.tile(arr, (k, 1))


def _stacked_history(init, parts, span, dt):
    vals, mids = [], []
    for key, size in parts:
        v, m = _history(init, key, size, span, dt)
        if m is None:
            m = np.zeros((v.shape[0] - 1, size))
        vals.append(v)
        mids.append(m)
    return History(dt, np.hstack(vals), np.hstack(mids))


def _setup(pe, ctrl, dt, kind):
    if ctrl.kind != kind:
        raise ValueError(f"controller is {ctrl.kind}, expected {kind}")
    if dt is None:
        dt = default_dt([pe.tau_con, pe.tau_com])
    return dt


def _lagged(traj, delay):
    k = int(np.floor(delay / traj.dt + 0.5))
    return traj.lagged(k * traj.dt)


def simulate_state_feedback(pe, ctrl, init=None, t_end=200.0, dt=None):
    """Simulate the raw interconnection under ``u_i = Kx eta_i + Kz z_i``.

    State ordering is ``col(x_1..x_N, z_1..z_N)``. `init` may map ``"x"``
    and ``"z"`` to a stacked vector (constant history) or to a callable of
    time; missing entries default to zero.

    Channels: ``e`` regulated errors, ``ev`` virtual errors, ``u`` inputs.
    """
    dt = _setup(pe, ctrl, dt, STATE_FEEDBACK)
    st = pe.stacked()
    n, m, p, q = pe.dims
    big_n = pe.N
    h = laplacian_parts(pe.graph).H
    eye = np.eye(big_n)
    g1 = np.kron(eye, ctrl.G1)
    g2 = np.kron(eye, ctrl.G2)
    nx, nz = big_n * n, big_n * ctrl.im.nz
    dim = nx + nz
    kx_t = np.kron(h, ctrl.Kx)
    kz_t = np.kron(eye, ctrl.Kz)
    s = pe.exo.S

    def pad(block, row, col):
        out = np.zeros((dim, dim))
        r = slice(0, nx) if row == "x" else slice(nx, dim)
        c = slice(0, nx) if col == "x" else slice(nx, dim)
        out[r, c] = block
        return out

    terms = [
        (0.0, pad(st.A, "x", "x") + pad(g1, "z", "z")),
        (pe.tau, pad(st.B @ kx_t, "x", "x")),
        (pe.tau_con, pad(st.B @ kz_t, "x", "z")),
        (pe.tau_com, pad(g2 @ st.C, "z", "x")),
    ]
    bv = np.vstack([st.E, g2 @ st.F @ mat_exp(-s, pe.tau_com)])
    sysd = DelaySystem(terms, bv, s, pe.exo.v0)
    span = max(pe.tau, dt)
    hist = _stacked_history(init, [("x", nx), ("z", nz)], span, dt)
    traj = integrate(sysd, hist, t_end, dt)

    x = traj.states[:, :nx]
    z = traj.states[:, nx:]
    traj.channels["e"] = x @ st.C_agents.T + traj.v @ st.F_agents.T
    traj.channels["ev"] = x @ st.C.T + traj.v @ st.F.T
    x_com = _lagged(traj, pe.tau_com)[:, :nx]
    traj.channels["u"] = x_com @ kx_t.T + z @ kz_t.T
    traj.blocks = {"x": (0, nx), "z": (nx, dim)}
    return traj


def simulate_output_feedback(pe, ctrl, init=None, t_end=200.0, dt=None):
    """Simulate the raw interconnection under the observer-based law.

    State ordering is ``col(x, z, xi)``. Extra channel ``obs`` is the
    observer error ``xi(t) - x(t - tau_com)``.
    """
    dt = _setup(pe, ctrl, dt, OUTPUT_FEEDBACK)
    st = pe.stacked()
    n, m, p, q = pe.dims
    big_n = pe.N
    h = laplacian_parts(pe.graph).H
    eye = np.eye(big_n)
    g1 = np.kron(eye, ctrl.G1)
    g2 = np.kron(eye, ctrl.G2)
    nx, nz = big_n * n, big_n * ctrl.im.nz
    dim = 2 * nx + nz
    sl = {"x": slice(0, nx), "z": slice(nx, nx + nz), "xi": slice(nx + nz, dim)}
    k1_t = np.kron(eye, ctrl.K1)
    k2_t = np.kron(h, ctrl.K2)
    b_nom = np.kron(eye, pe.B)
    l_t = np.kron(eye, ctrl.L)
    s = pe.exo.S

    def pad(block, row, col):
        out = np.zeros((dim, dim))
        out[sl[row], sl[col]] = block
        return out

    terms = [
        (0.0, pad(st.A, "x", "x") + pad(g1, "z", "z")
         + pad(np.kron(eye, pe.A) - np.kron(h, ctrl.L @ pe.C), "xi", "xi")),
        (pe.tau_con, pad(st.B @ k1_t, "x", "z") + pad(st.B @ k2_t, "x", "xi")),
        (pe.tau_com, pad(g2 @ st.C, "z", "x") + pad(l_t @ st.C, "xi", "x")),
        (pe.tau, pad(b_nom @ k1_t, "xi", "z") + pad(b_nom @ k2_t, "xi", "xi")),
    ]
    shift = mat_exp(-s, pe.tau_com)
    bv = np.vstack([st.E, g2 @ st.F @ shift, l_t @ st.F @ shift])
    sysd = DelaySystem(terms, bv, s, pe.exo.v0)
    span = max(pe.tau, dt)
    hist = _stacked_history(init, [("x", nx), ("z", nz), ("xi", nx)], span, dt)
    traj = integrate(sysd, hist, t_end, dt)

    x = traj.states[:, sl["x"]]
    z = traj.states[:, sl["z"]]
    xi = traj.states[:, sl["xi"]]
    traj.channels["e"] = x @ st.C_agents.T + traj.v @ st.F_agents.T
    traj.channels["ev"] = x @ st.C.T + traj.v @ st.F.T
    traj.channels["u"] = z @ k1_t.T + xi @ k2_t.T
    traj.channels["obs"] = xi - _lagged(traj, pe.tau_com)[:, sl["x"]]
    traj.blocks = {k: (v.start, v.stop) for k, v in sl.items()}
    return traj


def simulate_closed_loop(cl, s, v0, hist, t_end, dt):
    """Integrate the shifted two-lag closed loop directly."""
    sysd = DelaySystem([(0.0, cl.A_cw0), (cl.tau, cl.A_cw1)], cl.B_cw, s, v0)
    traj = integrate(sysd, hist, t_end, dt)
    traj.channels["ev"] = traj.states @ cl.C_cw0.T + traj.v @ cl.D_cw.T
    return traj


# --------------------------------------------------------------------------
# convergence metrics

@dataclass
class DecayReport:
    tail_sup: np.ndarray
    rate: np.ndarray
    settling_time: list
    threshold: float

    @property
    def overall_rate(self):
        return float(np.max(self.rate))

    def to_dict(self):
        return {
            "tail_sup": [float(x) for x in self.tail_sup],
            "rate": [float(x) for x in self.rate],
            "settling_time": [None if t is None else float(t) for t in self.settling_time],
            "threshold": self.threshold,
        }


def decay_metrics(traj, tail_fraction=0.25, threshold=0.05, channel="e"):
    """Tail sup-norm, exponential rate and settling time of each error channel.

    The rate is the slope of a least-squares line through the log of the
    backward running maximum of ``|e_i|``; the settling time is the first
    sample after which ``|e_i|`` stays below `threshold` (``None`` if the
    final sample is still above it).
    """
    t = traj.times
    if len(t) <= 10:
        raise ValueError("trajectory too short for decay metrics")
    e = np.asarray(traj.channels[channel] if channel in traj.channels else traj.states)
    e = e.reshape(len(t), -1)
    start = int(np.floor((1 - tail_fraction) * len(t)))
    tails, rates, settles = [], [], []
    for col in np.abs(e).T:
        tails.append(float(np.max(col[start:])))
        env = np.maximum.accumulate(col[::-1])[::-1]
        ok = env > 1e-300
        if ok.sum() >= 2:
            slope = np.polyfit(t[ok], np.log(env[ok]), 1)[0]
        else:
            slope = -np.inf
        rates.append(float(slope))
        above = np.nonzero(env > threshold)[0]
        if len(above) == 0:
            settles.append(float(t[0]))
        elif above[-1] == len(t) - 1:
            settles.append(None)
        else:
            settles.append(float(t[above[-1] + 1]))
    return DecayReport(np.array(tails), np.array(rates), settles, threshold)
