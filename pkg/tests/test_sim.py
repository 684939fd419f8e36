import csv
import math
from dataclasses import replace

import numpy as np
import pytest

from coopreg.exceptions import DimensionError, SimulationDivergence
from coopreg.graph import Digraph
from coopreg.numerics import mat_exp
from coopreg.scenarios import double_integrator_team
from coopreg.sim import (
    DelaySystem,
    History,
    decay_metrics,
    default_dt,
    exo_trajectory,
    integrate,
    simulate_closed_loop,
    simulate_output_feedback,
    simulate_state_feedback,
    snap_delay,
)
from coopreg.synthesis import assemble_closed_loop, dde_rightmost_root, low_gain_K

NO_EXO = dict(B_v=np.zeros((1, 1)), S=np.zeros((1, 1)), v0=[0.0])


def cosine_dde_error(dt, t_end=10.0):
    """Max error against x(t) = cos(pi t / 2), which solves x' = -(pi/2) x(t - 1)."""
    sysd = DelaySystem([(1.0, [[-math.pi / 2]])], **NO_EXO)
    hist = History.from_function(lambda t: math.cos(math.pi * t / 2), 1.0, dt)
    traj = integrate(sysd, hist, t_end, dt)
    return np.max(np.abs(traj.states[:, 0] - np.cos(math.pi * traj.times / 2)))


# --------------------------------------------------------------------------
# integrator

def test_scalar_exponential():
    sysd = DelaySystem([(0.0, [[-1.0]])], **NO_EXO)
    traj = integrate(sysd, np.ones(1), 5.0, 1e-3)
    assert np.max(np.abs(traj.states[:, 0] - np.exp(-traj.times))) <= 1e-8


def test_cosine_dde():
    assert cosine_dde_error(1e-3) <= 1e-6


def test_cosine_dde_convergence_order():
    coarse = cosine_dde_error(0.02)
    fine = cosine_dde_error(0.01)
    assert coarse / fine >= 8


def test_exosystem_ramp_is_exact():
    s = np.array([[0.0, 1.0], [0.0, 0.0]])
    sysd = DelaySystem([(0.0, [[-1.0]])], np.zeros((1, 2)), s, [1.0, 1.0])
    traj = integrate(sysd, np.zeros(1), 10.0, 0.01)
    np.testing.assert_allclose(traj.v[:, 0], 1 + traj.times, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(traj.v[:, 1], 1.0)


def test_exosystem_rotation_matches_exponential():
    s = np.array([[0.0, 2.0], [-2.0, 0.0]])
    sysd = DelaySystem([(0.0, [[-1.0]])], np.zeros((1, 2)), s, [1.0, 0.5])
    traj = integrate(sysd, np.zeros(1), 20.0, 0.01)
    np.testing.assert_allclose(traj.v, exo_trajectory(s, np.array([1.0, 0.5]), traj.times), atol=1e-12)


def test_forcing_enters_through_exosystem():
    # x' = -x + v with constant v = 1 -> x(t) = 1 - exp(-t)
    sysd = DelaySystem([(0.0, [[-1.0]])], np.ones((1, 1)), np.zeros((1, 1)), [1.0])
    traj = integrate(sysd, np.zeros(1), 4.0, 1e-3)
    assert np.max(np.abs(traj.states[:, 0] - (1 - np.exp(-traj.times)))) <= 1e-9


def test_delay_system_normalises_terms():
    sysd = DelaySystem([(1.0, [[1.0]]), (0.5, [[2.0]]), (1.0, [[3.0]])], **NO_EXO)
    assert [d for d, _ in sysd.terms] == [0.0, 0.5, 1.0]
    np.testing.assert_array_equal(sysd.terms[0][1], [[0.0]])
    np.testing.assert_array_equal(sysd.terms[2][1], [[4.0]])
    assert sysd.max_delay == 1.0


def test_delay_system_rejects_mixed_sizes():
    with pytest.raises(DimensionError):
        DelaySystem([(0.0, np.eye(2)), (1.0, np.eye(3))], np.zeros((2, 1)), np.zeros((1, 1)), [0.0])
    with pytest.raises(ValueError):
        DelaySystem([(-1.0, np.eye(1))], **NO_EXO)


def test_snapping_warns_on_large_shift():
    with pytest.warns(UserWarning):
        assert snap_delay(0.333, 0.1) == 3
    with pytest.warns(UserWarning):
        assert snap_delay(0.25, 0.1) == 3  # ties round up
    assert snap_delay(0.5, 0.005) == 100


def test_default_step():
    assert default_dt([0.5, 0.5]) == pytest.approx(0.01)
    assert default_dt([0.001]) == pytest.approx(1e-4)
    assert default_dt([0.0]) == pytest.approx(1e-2)


def test_history_must_cover_delay():
    sysd = DelaySystem([(1.0, [[-1.0]])], **NO_EXO)
    short = History(0.1, np.ones((3, 1)))
    with pytest.raises(ValueError):
        integrate(sysd, short, 1.0, 0.1)


def test_divergence_is_reported():
    sysd = DelaySystem([(0.0, [[5.0]])], **NO_EXO)
    with pytest.raises(SimulationDivergence) as info:
        integrate(sysd, np.ones(1), 20.0, 0.01)
    assert 5.0 < info.value.time < 6.0


def test_lagged_states_and_csv(tmp_path):
    sysd = DelaySystem([(0.0, [[-1.0]]), (0.5, [[0.2]])], np.ones((1, 1)), np.zeros((1, 1)), [1.0])
    traj = integrate(sysd, np.ones(1), 2.0, 0.1)
    lag = traj.lagged(0.5)
    np.testing.assert_array_equal(lag[5:], traj.states[:-5])
    np.testing.assert_array_equal(lag[:5], np.ones((5, 1)))
    traj.channels["e"] = traj.states * 2
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x[0]", "e[0]", "v[0]"]
    assert len(rows) == len(traj.times) + 1
    np.testing.assert_allclose(float(rows[7][1]), traj.states[6, 0], rtol=1e-14)


# --------------------------------------------------------------------------
# metrics

def test_decay_rate_of_exponential():
    sysd = DelaySystem([(0.0, [[-1.0]])], **NO_EXO)
    traj = integrate(sysd, np.ones(1), 10.0, 0.01)
    rep = decay_metrics(traj, channel="x")
    assert rep.rate[0] == pytest.approx(-1.0, abs=0.05)
    assert rep.settling_time[0] == pytest.approx(-math.log(0.05), abs=0.02)


def test_constant_error_does_not_settle():
    sysd = DelaySystem([(0.0, [[0.0]])], **NO_EXO)
    traj = integrate(sysd, np.ones(1), 10.0, 0.01)
    rep = decay_metrics(traj, channel="x")
    assert rep.rate[0] == pytest.approx(0.0, abs=1e-12)
    assert rep.settling_time == [None]
    assert rep.to_dict()["settling_time"] == [None]


def test_metrics_need_enough_samples():
    sysd = DelaySystem([(0.0, [[-1.0]])], **NO_EXO)
    with pytest.raises(ValueError):
        decay_metrics(integrate(sysd, np.ones(1), 0.05, 0.01), channel="x")


# --------------------------------------------------------------------------
# closed-loop simulation

def test_state_feedback_equilibrium(team, sf_ctrl):
    pe = replace(team, exo=replace(team.exo, v0=np.zeros(2)))
    traj = simulate_state_feedback(pe, sf_ctrl, t_end=5.0, dt=0.01)
    assert np.max(np.abs(traj.states)) == 0.0
    assert np.max(np.abs(traj.channels["e"])) == 0.0


def test_output_feedback_equilibrium(team, of_ctrl):
    pe = replace(team, exo=replace(team.exo, v0=np.zeros(2)))
    traj = simulate_output_feedback(pe, of_ctrl, t_end=5.0, dt=0.01)
    assert np.max(np.abs(traj.states)) == 0.0
    assert set(traj.channels) >= {"e", "ev", "u", "obs"}


def test_kind_mismatch_is_rejected(team, sf_ctrl):
    with pytest.raises(ValueError):
        simulate_output_feedback(team, sf_ctrl, t_end=1.0)


def test_initial_state_dimension_is_checked(team, sf_ctrl):
    with pytest.raises(DimensionError):
        simulate_state_feedback(team, sf_ctrl, init={"x": np.ones(3)}, t_end=1.0, dt=0.01)


def test_raw_and_shifted_loops_agree(team, sf_ctrl):
    dt, t_end = 0.01, 30.0
    raw = simulate_state_feedback(team, sf_ctrl, init={"x": 0.1 * np.arange(8.0)}, t_end=t_end + 1, dt=dt)
    cl = assemble_closed_loop(team, sf_ctrl, use_nominal=False)
    k_tau = round(team.tau / dt)
    k_com = round(team.tau_com / dt)
    full = np.vstack([raw.prefix, raw.states])
    start = raw.prefix.shape[0]
    # shifted internal-model state zbar(t) = z(t + tau_com)
    x_hist = full[start - k_tau:start + 1, :8]
    z_hist = full[start - k_tau + k_com:start + 1 + k_com, 8:]
    hist = History(dt, np.hstack([x_hist, z_hist]))
    shifted = simulate_closed_loop(cl, team.exo.S, team.exo.v0, hist, t_end, dt)
    n = len(shifted.times)
    np.testing.assert_allclose(shifted.states[:, :8], raw.states[:n, :8], atol=1e-6)
    np.testing.assert_allclose(shifted.states[:, 8:], raw.states[k_com:n + k_com, 8:], atol=1e-6)
    np.testing.assert_allclose(shifted.channels["ev"], raw.channels["ev"][:n], atol=1e-6)


def test_cascade_of_certified_loop_and_decaying_input():
    ac = np.array([[0.0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 1], [1, 0, 0, 0]])
    bc = np.array([[0.0], [1.0], [0.0], [0.0]])
    gain, cert = low_gain_K(ac, bc, [1.0], 1.0, 0.1, 1.0)
    assert cert.accepted
    # zeta = col(x, w): x' = Ac x + Bc K x(t - 1) + Bc w,  w' = -0.5 w
    m0 = np.block([[ac, bc], [np.zeros((1, 4)), np.array([[-0.5]])]])
    m1 = np.block([[bc @ gain, np.zeros((4, 1))], [np.zeros((1, 5))]])
    assert dde_rightmost_root(m0, m1, 1.0).real < 0
    sysd = DelaySystem([(0.0, m0), (1.0, m1)], np.zeros((5, 1)), np.zeros((1, 1)), [0.0])
    traj = integrate(sysd, np.array([0.0, 0.0, 0.0, 0.0, 1.0]), 300.0, 0.02)
    peak = np.max(np.abs(traj.states[:, :4]))
    assert peak > 0.1
    assert np.max(np.abs(traj.states[-500:, :4])) < 1e-3 * peak
    assert decay_metrics(traj, channel="x").overall_rate < 0


def test_unreachable_agent_does_not_converge(sf_ctrl):
    # agent 4 listens to nobody
    g = Digraph.from_edges(5, [(0, 1, 1.0), (2, 1, 1.0), (0, 2, 1.0), (1, 3, 1.0)])
    pe = double_integrator_team(graph=g)
    traj = simulate_state_feedback(pe, sf_ctrl, t_end=60.0, dt=0.01)
    e = np.abs(traj.channels["e"])
    assert np.max(e[-100:, 3]) > 1.0
    assert np.max(e[-100:, 3]) > np.max(e[:100, 3])


def test_output_feedback_without_observer_injection_fails(team, of_ctrl):
    blind = replace(of_ctrl, L=np.zeros_like(of_ctrl.L))
    try:
        traj = simulate_output_feedback(team, blind, t_end=150.0, dt=0.01)
    except SimulationDivergence:
        return
    assert np.max(np.abs(traj.channels["e"][-1000:])) > 1.0


def test_exosystem_channel_in_closed_loop(team, sf_ctrl):
    traj = simulate_state_feedback(team, sf_ctrl, t_end=10.0, dt=0.01)
    expected = np.column_stack([1.0 + 0.2 * traj.times, np.full(len(traj.times), 0.2)])
    np.testing.assert_allclose(traj.v, expected, atol=1e-12)
    np.testing.assert_allclose(traj.v, [mat_exp(team.exo.S, t) @ team.exo.v0 for t in traj.times], atol=1e-12)
