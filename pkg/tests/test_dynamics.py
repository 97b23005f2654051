import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from sir_icu import (
    REFERENCE_X0,
    ControlSchedule,
    EpidemicParams,
    EpidemicState,
    SolverConfig,
    conserved_quantity,
    conserved_residuals,
    herd_time_bound,
    reference_params,
    running_cost,
    simulate,
    state_at,
)
from sir_icu.dynamics import (
    implicit_midpoint_step,
    rk4_step,
    simulate_bang_bang_batch,
    trapezoid,
    vector_field,
)
from sir_icu.errors import DomainError, HorizonInvalid, SimplexViolation, StepSizeInvalid, ValidationError


def reference_solution(x0, v, p, t_end, events=None):
    """High-accuracy scipy solution, an oracle independent of the fixed-step code."""

    def f(t, y):
        s, i = y
        return [-p.beta * s * i - v * s, p.beta * s * i - p.gamma * i]

    return solve_ivp(f, (0.0, t_end), [x0.s, x0.i], method="DOP853", rtol=1e-12, atol=1e-15, events=events)


# parameters and schedules ------------------------------------------------------

def test_reference_params_values(ref_params):
    assert (ref_params.beta, ref_params.gamma, ref_params.v_max, ref_params.i_max) == (0.18, 0.07, 0.01, 0.005)
    assert ref_params.sigma == pytest.approx(0.07 / 0.18)


@pytest.mark.parametrize(
    "changes",
    [dict(beta=0.0), dict(gamma=-0.1), dict(v_max=-1.0), dict(i_max=0.0), dict(i_max=1.5),
     dict(lambda_v=0.0, lambda_i=0.0), dict(lambda_i=-1.0), dict(horizon_T=0.0), dict(beta=float("nan"))],
)
def test_params_invariants(ref_params, changes):
    with pytest.raises(ValidationError):
        ref_params.replace(**changes)


@pytest.mark.parametrize("s,i", [(-0.1, 0.1), (0.5, -0.01), (0.7, 0.4)])
def test_state_outside_simplex(s, i):
    with pytest.raises(ValidationError):
        EpidemicState(s, i)


def test_schedule_right_open_intervals():
    u = ControlSchedule((0.0, 10.0, 20.0), (0.01, 0.0))
    assert u.value(0.0) == 0.01
    assert u.value(9.999) == 0.01
    assert u.value(10.0) == 0.0
    assert u.value(20.0) == 0.0
    assert u.integral(0.0, 20.0) == pytest.approx(0.1)
    assert u.integral(5.0, 15.0) == pytest.approx(0.05)


def test_bang_bang_degenerate_cases():
    assert ControlSchedule.bang_bang(0.0, 0.01, 5.0).levels == (0.0,)
    assert ControlSchedule.bang_bang(5.0, 0.01, 5.0).levels == (0.01,)


def test_schedule_validation():
    with pytest.raises(ValidationError):
        ControlSchedule((0.0, 5.0, 5.0), (0.0, 0.0))
    with pytest.raises(ValidationError):
        ControlSchedule((0.0, 5.0), (0.0, 0.0))


def test_solver_config_validation():
    with pytest.raises(StepSizeInvalid):
        SolverConfig(dt=0.0)
    with pytest.raises(ValidationError):
        SolverConfig(method="euler")
    n, dt = SolverConfig(dt=0.3).grid(1.0)
    assert n == 3 and dt == pytest.approx(1 / 3)
    assert SolverConfig().grid(400.0) == (12000, 400.0 / 12000)


# vector field ----------------------------------------------------------------

def test_vector_field_examples(ref_params):
    ds, di = vector_field(EpidemicState(0.5, 0.1), 0.0, ref_params)
    assert ds == pytest.approx(-0.009, abs=1e-15)
    assert di == pytest.approx(0.002, abs=1e-15)
    ds, di = vector_field(EpidemicState(0.3, 0.0), 0.01, ref_params)
    assert (ds, di) == (pytest.approx(-0.003), 0.0)
    assert vector_field(EpidemicState(ref_params.sigma, 0.004), 0.0, ref_params)[1] == pytest.approx(0.0, abs=1e-18)


# simulation ------------------------------------------------------------------

def test_uncontrolled_epidemic_decays(ref_params):
    traj = simulate(REFERENCE_X0, ControlSchedule.constant(0.0, 400.0), ref_params)
    assert traj.i[-1] < traj.max_i
    assert traj.s[-1] < ref_params.sigma
    assert traj.times[0] == 0.0
    assert np.allclose(np.diff(traj.times), traj.dt)


def test_disease_free_axis(ref_params):
    u = ControlSchedule((0.0, 100.0, 400.0), (0.01, 0.004))
    traj = simulate(EpidemicState(0.2, 0.0), u, ref_params)
    assert np.all(traj.i == 0.0)
    exact = 0.2 * np.exp(-np.array([u.integral(0.0, t) for t in traj.times]))
    assert np.max(np.abs(traj.s - exact)) < 1e-12


def test_terminal_state_matches_scipy(ref_params):
    for v in (0.0, ref_params.v_max):
        traj = simulate(REFERENCE_X0, ControlSchedule.constant(v, 400.0), ref_params)
        ref = reference_solution(REFERENCE_X0, v, ref_params, 400.0)
        assert abs(traj.s[-1] - ref.y[0, -1]) < 1e-9
        assert abs(traj.i[-1] - ref.y[1, -1]) < 1e-9


def test_herd_time_matches_event_oracle(ref_params):
    def crossing(t, y):
        return y[0] - ref_params.sigma

    crossing.terminal = True
    ref = reference_solution(REFERENCE_X0, ref_params.v_max, ref_params, 400.0, events=crossing).t_events[0][0]
    tol = SolverConfig().event_tolerance(400.0)
    for dt in (400.0 / 12000, 0.01):
        traj = simulate(REFERENCE_X0, ControlSchedule.constant(ref_params.v_max, 400.0), ref_params, SolverConfig(dt=dt))
        assert abs(traj.herd_time - ref) <= 10 * tol + 1e-7
        assert traj.herd_state[0] <= ref_params.sigma


def test_herd_time_bound(ref_params):
    expected = (0.7 - 0.07 / 0.18) / (0.07 * 0.001)
    assert herd_time_bound(REFERENCE_X0, ref_params) == pytest.approx(expected)
    assert herd_time_bound(EpidemicState(0.2, 0.01), ref_params) == 0.0
    traj = simulate(REFERENCE_X0, ControlSchedule.constant(0.0, 400.0), ref_params, SolverConfig(dt=1e-3))
    assert traj.herd_time <= expected
    with pytest.raises(DomainError):
        herd_time_bound(EpidemicState(0.7, 0.0), ref_params)
    with pytest.raises(DomainError):
        herd_time_bound(REFERENCE_X0, ref_params.replace(gamma=0.0))


def test_simulate_errors(ref_params):
    with pytest.raises(HorizonInvalid):
        simulate(REFERENCE_X0, ControlSchedule.constant(0.0, 100.0), ref_params)
    with pytest.raises(ValidationError):
        simulate(REFERENCE_X0, ControlSchedule.constant(0.5, 400.0), ref_params)


def test_contact_recorded_at_tangency(ref_params):
    # starting on the top of the safe set with no control touches i_max exactly once
    traj = simulate(EpidemicState(ref_params.sigma, ref_params.i_max), ControlSchedule.constant(0.0, 400.0), ref_params)
    assert len(traj.contact_times) == 1
    assert traj.contact_times[0] == pytest.approx(0.0)


@pytest.mark.parametrize("method,factor", [("rk4", 8.0), ("implicit_midpoint", 1.8)])
def test_convergence_order(ref_params, method, factor):
    p = ref_params.replace(horizon_T=100.0)
    u = ControlSchedule.constant(ref_params.v_max, 100.0)
    ref = reference_solution(REFERENCE_X0, ref_params.v_max, p, 100.0)
    ref_end = np.array([ref.y[0, -1], ref.y[1, -1]])
    errs = []
    for dt in (1.0, 0.5):
        traj = simulate(REFERENCE_X0, u, p, SolverConfig(method=method, dt=dt))
        errs.append(np.max(np.abs(np.array([traj.s[-1], traj.i[-1]]) - ref_end)))
    assert errs[0] / errs[1] >= factor


def test_implicit_midpoint_on_disease_free_axis():
    # linear decay: one step is the Cayley map (1 - vh/2) / (1 + vh/2)
    s, i = implicit_midpoint_step(0.5, 0.0, 0.01, 1.0, 0.18, 0.07)
    assert i == 0.0
    assert s == pytest.approx(0.5 * (1 - 0.005) / (1 + 0.005), rel=1e-12)


def test_rk4_step_works_on_arrays():
    s = np.array([0.7, 0.5])
    i = np.array([0.001, 0.01])
    out = rk4_step(s, i, 0.01, 0.1, 0.18, 0.07)
    for k in range(2):
        assert out[0][k] == rk4_step(s[k], i[k], 0.01, 0.1, 0.18, 0.07)[0]


def test_state_at_nodes_and_between(ref_params):
    traj = simulate(REFERENCE_X0, ControlSchedule.bang_bang(20.0, ref_params.v_max, 400.0), ref_params)
    assert state_at(traj, traj.times[300], ref_params).s == traj.s[300]
    mid = state_at(traj, 0.5 * (traj.times[300] + traj.times[301]), ref_params)
    assert min(traj.s[300], traj.s[301]) <= mid.s <= max(traj.s[300], traj.s[301])


DT = 400.0 / 12000
ALIGNED = [0.0, 12.345, 49.0, 1470 * DT, np.nextafter(1470 * DT, 0), 399.99, 400.0, 500.0]


@pytest.mark.parametrize("jit", [True, False])
def test_batch_matches_simulate_bitwise(ref_params, monkeypatch, jit):
    from sir_icu import _kernels

    if not jit:
        monkeypatch.setattr(_kernels, "JIT", False)
    p = ref_params.replace(lambda_i=1.0)
    integral, peak = simulate_bang_bang_batch(REFERENCE_X0, ALIGNED, p)
    for k, t in enumerate(ALIGNED):
        traj = simulate(REFERENCE_X0, ControlSchedule.bang_bang(t, p.v_max, 400.0), p)
        assert integral[k] == trapezoid(traj.i, traj.dt)
        assert peak[k] == traj.max_i
        single = simulate_bang_bang_batch(REFERENCE_X0, [t], p)
        assert single[0][0] == integral[k] and single[1][0] == peak[k]


@settings(max_examples=25)
@given(k=st.integers(1, 11999), shift=st.sampled_from([-1, 0, 1]))
def test_batch_matches_simulate_near_nodes(ref_params, k, shift):
    t = float(k * DT)
    if shift:
        t = float(np.nextafter(t, np.inf if shift > 0 else 0.0))
    p = ref_params.replace(lambda_i=1.0)
    integral, peak = simulate_bang_bang_batch(REFERENCE_X0, [t, t], p)
    traj = simulate(REFERENCE_X0, ControlSchedule.bang_bang(t, p.v_max, 400.0), p)
    assert integral[0] == trapezoid(traj.i, traj.dt)
    assert peak[0] == traj.max_i


def test_simplex_diagnostic_warns():
    # a deliberately huge step leaves the simplex; the run must warn, not clamp
    p = EpidemicParams(beta=5.0, gamma=0.0, v_max=1.0, i_max=1.0, horizon_T=10.0)
    with pytest.warns(SimplexViolation):
        simulate(EpidemicState(0.5, 0.5), ControlSchedule.constant(1.0, 10.0), p, SolverConfig(dt=5.0))


# conserved quantity and cost --------------------------------------------------

def test_conserved_quantity_identity(ref_params):
    assert conserved_quantity(REFERENCE_X0, REFERENCE_X0, 0.01, ref_params) == 0.0
    with pytest.raises(DomainError):
        conserved_quantity(EpidemicState(0.5, 0.0), REFERENCE_X0, 0.0, ref_params)


def test_conserved_along_constant_controls(ref_params):
    for v in (0.0, ref_params.v_max):
        traj = simulate(REFERENCE_X0, ControlSchedule.constant(v, 400.0), ref_params, SolverConfig(dt=1e-3))
        assert np.max(np.abs(conserved_residuals(traj, v, ref_params))) <= 1e-6
        k = len(traj.times) // 3
        assert abs(conserved_quantity(traj.state_at(k), REFERENCE_X0, v, ref_params)) <= 1e-6


def test_running_cost_examples(ref_params):
    zero = simulate(REFERENCE_X0, ControlSchedule.constant(0.0, 400.0), ref_params)
    assert running_cost(zero, ref_params) == 0.0
    bb = simulate(REFERENCE_X0, ControlSchedule.bang_bang(123.4, ref_params.v_max, 400.0), ref_params)
    assert running_cost(bb, ref_params) == pytest.approx(ref_params.v_max * 123.4, rel=1e-14)
    both = ref_params.replace(lambda_i=1.0)
    fine = simulate(REFERENCE_X0, ControlSchedule.constant(0.0, 400.0), both, SolverConfig(dt=1e-3))
    ref = reference_solution(REFERENCE_X0, 0.0, both, 400.0)
    dense = solve_ivp(
        lambda t, y: [-0.18 * y[0] * y[1], 0.18 * y[0] * y[1] - 0.07 * y[1], y[1]],
        (0, 400), [0.7, 0.001, 0.0], method="DOP853", rtol=1e-12, atol=1e-15,
    )
    assert ref.success
    assert running_cost(fine, both) == pytest.approx(dense.y[2, -1], rel=1e-8)


def test_trapezoid_matches_numpy():
    vals = np.linspace(0, 1, 101) ** 2
    assert trapezoid(vals, 0.01) == pytest.approx(np.trapezoid(vals, dx=0.01) if hasattr(np, "trapezoid") else np.trapz(vals, dx=0.01))


# properties --------------------------------------------------------------------

states = st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0)).filter(lambda x: x[0] + x[1] <= 1.0)
schedules = st.lists(st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0)), min_size=1, max_size=6)


def _schedule_from(draw, horizon, v_max):
    cuts = sorted({round(c * horizon, 6) for c, _ in draw} - {0.0, horizon})
    bps = (0.0, *cuts, horizon)
    levels = tuple(v_max * lv for _, lv in draw)[: len(bps) - 1]
    levels = levels + (levels[-1],) * (len(bps) - 1 - len(levels))
    return ControlSchedule(bps, levels)


@settings(max_examples=1000)
@given(x=states, raw=schedules)
def test_forward_invariance_and_monotone_s(ref_params, x, raw):
    p = ref_params.replace(horizon_T=100.0)
    u = _schedule_from(raw, 100.0, p.v_max)
    with warnings.catch_warnings():
        warnings.simplefilter("error", SimplexViolation)
        traj = simulate(EpidemicState(*x), u, p, SolverConfig(dt=0.5))
    assert np.all(traj.s >= -1e-9) and np.all(traj.i >= -1e-9)
    assert np.all(traj.s + traj.i <= 1 + 1e-9)
    assert np.all(np.diff(traj.s) <= 0.0)
    # a control below 1e-12 moves s by less than one ulp over a step
    active = (traj.i[:-1] > 1e-12) | (traj.controls > 1e-12)
    active &= traj.s[:-1] > 1e-12
    assert np.all(np.diff(traj.s)[active] < 0.0)


@given(s0=st.floats(0.45, 0.9), logi=st.floats(-8, -3))
def test_decay_for_long_horizons(ref_params, s0, logi):
    x = EpidemicState(s0, 10 ** logi)
    traj = simulate(x, ControlSchedule.constant(0.0, 400.0), ref_params, SolverConfig(dt=0.1))
    peak = int(np.argmax(traj.i))
    if traj.herd_time is not None and traj.herd_time < 300:
        assert traj.i[-1] < traj.i[peak]
        assert traj.s[-1] < ref_params.sigma
