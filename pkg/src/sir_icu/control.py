"""Optimal single-switch vaccination policies.

Optimal controls are ``v_max`` up to a switching time and 0 afterwards, so the
problem reduces to a one-dimensional search over that time. The cost is not
known to be unimodal, hence a global grid scan followed by golden-section
refinement of the best bracket.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import (
    STEPPERS,
    ControlSchedule,
    EpidemicParams,
    EpidemicState,
    SolverConfig,
    Trajectory,
    find_contacts,
    locate_event,
    running_cost,
    simulate,
    simulate_bang_bang_batch,
    state_at,
    _diagnose_simplex,
)
from .errors import HorizonTooShort, Infeasible, OutsideViable
from .viability import RegionLabel, classify, gamma_bar, reach_time_A

DEFAULT_GRID = 2048
TIE_TOL = 1e-12
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class BangBangPolicy:
    t_star: float
    level: float

    def schedule(self, horizon: float) -> ControlSchedule:
        return ControlSchedule.bang_bang(self.t_star, self.level, horizon)


@dataclass
class OptimizationResult:
    policy: BangBangPolicy
    cost: float
    trajectory: Trajectory
    feasible: bool
    t_A: float
    switch_state: EpidemicState
    region_at_switch: RegionLabel
    herd_time: Optional[float] = None
    grid_minima: list = field(default_factory=list)

    @property
    def t_star(self) -> float:
        return self.policy.t_star

    def summary(self) -> dict:
        herd = None if self.herd_time is None else float(self.herd_time)
        return {
            "t_star": float(self.t_star),
            "cost": float(self.cost),
            "feasible": bool(self.feasible),
            "t_A": float(self.t_A),
            "s_at_switch": float(self.switch_state.s),
            "i_at_switch": float(self.switch_state.i),
            "region_at_switch": self.region_at_switch.value,
            "herd_time": herd,
            "max_i": float(self.trajectory.max_i),
            "grid_minima": [float(t) for t in self.grid_minima],
        }


def evaluate_policy(
    t_star: float, x0: EpidemicState, p: EpidemicParams, cfg: SolverConfig = SolverConfig()
) -> tuple[float, bool, Trajectory]:
    """Cost, feasibility flag and trajectory of the ``v_max``-then-0 policy."""
    traj = simulate(x0, ControlSchedule.bang_bang(t_star, p.v_max, p.horizon_T), p, cfg)
    cost = running_cost(traj, p)
    feasible = traj.max_i <= p.i_max + cfg.contact_tol
    return cost, feasible, traj


def grid_costs(t_stars, x0: EpidemicState, p: EpidemicParams, cfg: SolverConfig = SolverConfig()):
    """Costs of many switching times, ``inf`` where the state constraint is violated."""
    t_stars = np.asarray(t_stars, dtype=float)
    integral_i, peak = simulate_bang_bang_batch(x0, t_stars, p, cfg)
    control = p.v_max * np.minimum(np.maximum(t_stars, 0.0), p.horizon_T)
    cost = p.lambda_v * control + (p.lambda_i * integral_i if p.lambda_i else 0.0)
    return np.where(peak <= p.i_max + cfg.contact_tol, cost, np.inf)


def check_horizon(x0: EpidemicState, p: EpidemicParams, cfg: SolverConfig = SolverConfig()) -> None:
    """Numerical check that both extreme constant controls cross the herd threshold before T."""
    for level in (0.0, p.v_max):
        traj = simulate(x0, ControlSchedule.constant(level, p.horizon_T), p, cfg)
        if traj.herd_time is None or not traj.s[-1] < p.sigma:
            raise HorizonTooShort(
                f"with v={level} the herd threshold is not crossed before T={p.horizon_T}"
            )


def golden_section(f, lo: float, hi: float, tol: float, max_iter: int = 200):
    """Minimise ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _local_minima(ts: np.ndarray, costs: np.ndarray, best: float) -> list:
    finite = np.isfinite(costs)
    out = []
    tol = 1e-9 * max(1.0, abs(best))
    for k in range(len(ts)):
        if not finite[k]:
            continue
        left = costs[k - 1] if k > 0 else np.inf
        right = costs[k + 1] if k + 1 < len(ts) else np.inf
        if costs[k] <= left and costs[k] <= right and costs[k] <= best + tol:
            out.append(float(ts[k]))
    return out


def optimize_switching_time(
    x0: EpidemicState,
    p: EpidemicParams,
    cfg: SolverConfig = SolverConfig(),
    grid_n: int = DEFAULT_GRID,
) -> OptimizationResult:
    """Best switching time of the ``v_max``-then-0 policy.

    Scans ``grid_n`` uniformly spaced switching times on ``[t_A, T]`` (earlier
    switches leave the state outside A and are infeasible), then refines the
    best bracket by golden section to ``1e-6 * T``.
    """
    label = classify(x0, p)
    if not label.in_B:
        raise Infeasible(f"initial state is {label.value}; no feasible control exists")
    check_horizon(x0, p, cfg)
    T = p.horizon_T
    t_A = reach_time_A(x0, p, cfg)
    minima: list = []

    if p.lambda_v == 0:
        t_star = T
    else:
        ts = np.linspace(t_A, T, max(int(grid_n), 2))
        costs = grid_costs(ts, x0, p, cfg)
        if not np.any(np.isfinite(costs)):
            raise Infeasible("no feasible switching time on the grid")
        best = float(np.min(costs))
        k = int(np.flatnonzero(costs <= best + TIE_TOL)[0])
        t_star, j_star = float(ts[k]), float(costs[k])
        minima = _local_minima(ts, costs, best)

        lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
        cost_of = lambda t: _scalar_cost(t, x0, p, cfg)
        t_ref, j_ref = golden_section(cost_of, float(lo), float(hi), 1e-6 * T)
        if j_ref < j_star - TIE_TOL or (abs(j_ref - j_star) <= TIE_TOL and t_ref < t_star):
            t_star = t_ref

    cost, feasible, traj = evaluate_policy(t_star, x0, p, cfg)
    switch_state = state_at(traj, t_star, p)
    return OptimizationResult(
        policy=BangBangPolicy(t_star, p.v_max),
        cost=cost,
        trajectory=traj,
        feasible=feasible,
        t_A=t_A,
        switch_state=switch_state,
        region_at_switch=classify(switch_state, p),
        herd_time=traj.herd_time,
        grid_minima=minima,
    )


def _scalar_cost(t: float, x0, p, cfg) -> float:
    return float(grid_costs([t], x0, p, cfg)[0])


def feedback_control(x: EpidemicState, p: EpidemicParams) -> float:
    """``v_max`` in B minus A, 0 in A."""
    label = classify(x, p)
    if label.in_A:
        return 0.0
    if label is RegionLabel.BminusA:
        return p.v_max
    raise OutsideViable(f"state is {label.value}; feedback law undefined outside B")


def simulate_feedback(x0: EpidemicState, p: EpidemicParams, cfg: SolverConfig = SolverConfig()) -> Trajectory:
    """Closed-loop run of the feedback law.

    The switch into A is event-located inside the step where it happens. A
    is forward invariant, so once inside the control stays 0.
    """
    level = feedback_control(x0, p)
    n, dt = cfg.grid(p.horizon_T)
    step = STEPPERS[cfg.method]
    tol = cfg.event_tolerance(p.horizon_T)
    beta, gamma, sigma = p.beta, p.gamma, p.sigma

    def stepper(s_, i_, v_, h_):
        return step(s_, i_, v_, h_, beta, gamma)

    def in_A(s_, i_):
        return i_ <= gamma_bar(max(s_, 0.0), p)

    s_out = np.empty(n + 1)
    i_out = np.empty(n + 1)
    v_out = np.empty(n)
    s, i = x0.s, x0.i
    s_out[0], i_out[0] = s, i
    switch_time = 0.0 if level == 0.0 else None
    herd_time = 0.0 if s <= sigma else None
    herd_state = (s, i) if herd_time is not None else None

    for k in range(n):
        t_a = k * dt
        v_out[k] = level
        pieces = [(dt, level)]
        if level > 0:
            s_try, i_try = stepper(s, i, level, dt)
            if in_A(s_try, i_try):
                tau = locate_event(stepper, s, i, level, dt, in_A, tol)
                switch_time = t_a + tau
                pieces = [(tau, level), (dt - tau, 0.0)]
                level = 0.0
        t_sub = t_a
        for h, v in pieces:
            s_new, i_new = stepper(s, i, v, h)
            if herd_time is None and s_new <= sigma:
                tau = locate_event(stepper, s, i, v, h, lambda a, b: a <= sigma, tol)
                herd_time = t_sub + tau
                herd_state = tuple(float(z) for z in stepper(s, i, v, tau))
            s, i = s_new, i_new
            t_sub += h
        s_out[k + 1], i_out[k + 1] = s, i

    schedule = ControlSchedule.bang_bang(
        switch_time if switch_time is not None else p.horizon_T, p.v_max, p.horizon_T
    )
    traj = Trajectory(
        times=np.arange(n + 1) * dt,
        s=s_out,
        i=i_out,
        controls=v_out,
        schedule=schedule,
        dt=dt,
        herd_time=herd_time,
        herd_state=herd_state,
        method=cfg.method,
    )
    traj.contact_times = find_contacts(traj, p, cfg.contact_tol)
    _diagnose_simplex(s_out, i_out)
    return traj


def switch_time_of(traj: Trajectory) -> float:
    """Switching time encoded in a bang-bang trajectory's schedule."""
    sched = traj.schedule
    if len(sched.levels) == 1:
        return sched.breakpoints[-1] if sched.levels[0] > 0 else 0.0
    return sched.breakpoints[1]
