"""Numerical check of the first-order necessary conditions on a bang-bang candidate.

Costates solve, backward from ``p_s(T) = p_i(T) = 0`` (normal case ``p0 = 1``)::

    p_s' = -beta i (p_i - p_s) + v p_s
    p_i' = -lambda_i + gamma p_i - beta s (p_i - p_s) - dmu

where the constraint multiplier ``dmu`` is at most one atom ``a * delta(t0)``
placed where the trajectory touches ``i = i_max``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .control import OptimizationResult, evaluate_policy, switch_time_of
from .dynamics import EpidemicParams, SolverConfig, Trajectory, state_at
from .errors import MultipleContacts, NoRoot, ValidationError

SIGN_TOL = 1e-8
HERD_MATCH_TOL = 1e-4


@dataclass
class AdjointTrajectory:
    times: np.ndarray
    p_s: np.ndarray
    p_i: np.ndarray
    atom_time: Optional[float] = None
    atom_mass: float = 0.0
    p0: int = 1

    @property
    def eta(self) -> np.ndarray:
        return self.p_i - self.p_s


@dataclass
class VerificationReport:
    phi_sign_ok: bool
    phi_zero_at_switch: float
    hamiltonian_dev: float
    complementarity_ok: bool
    transversality_ok: bool
    eta_positive_ok: bool

    def to_dict(self) -> dict:
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v)) for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def passed(self, hamiltonian_tol: float) -> bool:
        return (
            self.phi_sign_ok
            and self.complementarity_ok
            and self.transversality_ok
            and self.hamiltonian_dev <= hamiltonian_tol
        )


def _joint_rhs(s, i, ps, pi, v, beta, gamma, lam_i):
    eta = pi - ps
    bsi = beta * s * i
    return (
        -bsi - v * s,
        bsi - gamma * i,
        -beta * i * eta + v * ps,
        -lam_i + gamma * pi - beta * s * eta,
    )


def _joint_rk4(z, v, h, beta, gamma, lam_i):
    def add(a, k, c):
        return tuple(x + c * y for x, y in zip(a, k))

    k1 = _joint_rhs(*z, v, beta, gamma, lam_i)
    k2 = _joint_rhs(*add(z, k1, 0.5 * h), v, beta, gamma, lam_i)
    k3 = _joint_rhs(*add(z, k2, 0.5 * h), v, beta, gamma, lam_i)
    k4 = _joint_rhs(*add(z, k3, h), v, beta, gamma, lam_i)
    return tuple(
        x + h / 6.0 * (a + 2.0 * b + 2.0 * c + d) for x, a, b, c, d in zip(z, k1, k2, k3, k4)
    )


def _step_back(traj, p, k, ps, pi, atom_time, atom_mass, stop=None):
    """Costates at ``times[k]`` (or at ``stop`` inside step ``k``) from those at ``times[k+1]``.

    The primal state is re-integrated backward from the stored node together
    with the costates; pieces are split at control breakpoints, at the atom and
    at ``stop``. Crossing the atom backward adds its mass to ``p_i``.
    """
    t_a, t_b = float(traj.times[k]), float(traj.times[k + 1])
    width = t_b - t_a
    cuts = {0.0, width}
    for b in traj.schedule.breakpoints[1:-1]:
        if t_a < b < t_b:
            cuts.add(b - t_a)
    atom_off = None
    if atom_time is not None and t_a <= atom_time < t_b:
        atom_off = atom_time - t_a
        cuts.add(atom_off)
    stop_off = None
    if stop is not None:
        stop_off = min(max(stop - t_a, 0.0), width)
        cuts = {c for c in cuts if c >= stop_off} | {stop_off}
    offsets = sorted(cuts, reverse=True)
    z = (float(traj.s[k + 1]), float(traj.i[k + 1]), ps, pi)
    for hi, lo in zip(offsets, offsets[1:]):
        v = traj.schedule.value(t_a + lo)
        z = _joint_rk4(z, v, -(hi - lo), p.beta, p.gamma, p.lambda_i)
        if lo == atom_off:
            z = (z[0], z[1], z[2], z[3] + atom_mass)
    return z[2], z[3]


def solve_adjoint(
    traj: Trajectory,
    p: EpidemicParams,
    atom_mass: float = 0.0,
    cfg: SolverConfig = SolverConfig(),
) -> AdjointTrajectory:
    """Backward costates on the primal grid, with an optional atom at the contact time."""
    if len(traj.contact_times) > 1:
        raise MultipleContacts(f"{len(traj.contact_times)} separate contacts with i = i_max")
    if atom_mass < 0:
        raise ValidationError("atom mass must be nonnegative")
    atom_time = None
    if atom_mass > 0:
        if not traj.contact_times:
            raise ValidationError("an atom needs a contact with i = i_max")
        atom_time = float(traj.contact_times[0])
    n = len(traj.times) - 1
    p_s = np.zeros(n + 1)
    p_i = np.zeros(n + 1)
    ps, pi = 0.0, 0.0
    for k in range(n - 1, -1, -1):
        ps, pi = _step_back(traj, p, k, ps, pi, atom_time, atom_mass)
        p_s[k], p_i[k] = ps, pi
    return AdjointTrajectory(traj.times, p_s, p_i, atom_time, float(atom_mass), 1)


def costate_at(adj: AdjointTrajectory, traj: Trajectory, p: EpidemicParams, t: float) -> tuple[float, float]:
    """Costates at an arbitrary time (left-continuous at the atom)."""
    k = int(math.floor(t / traj.dt))
    n = len(traj.times) - 1
    if k >= n:
        return float(adj.p_s[-1]), float(adj.p_i[-1])
    return _step_back(
        traj, p, k, float(adj.p_s[k + 1]), float(adj.p_i[k + 1]), adj.atom_time, adj.atom_mass, stop=t
    )


def switching_function(adj: AdjointTrajectory, traj: Trajectory, p: EpidemicParams) -> np.ndarray:
    return adj.p0 * p.lambda_v - adj.p_s * traj.s


def hamiltonian(adj: AdjointTrajectory, traj: Trajectory, p: EpidemicParams) -> np.ndarray:
    phi = switching_function(adj, traj, p)
    v = traj.node_controls()
    return (
        adj.p0 * p.lambda_i * traj.i
        + phi * v
        + p.beta * adj.eta * traj.s * traj.i
        - p.gamma * adj.p_i * traj.i
    )


def _state_at_contact(traj: Trajectory, t0: float) -> tuple[float, float]:
    if traj.herd_time is not None and t0 == traj.herd_time and traj.herd_state is not None:
        return traj.herd_state
    k = int(np.argmin(np.abs(traj.times - t0)))
    return float(traj.s[k]), float(traj.i[k])


def _phi_at(traj, p, t_star, atom_mass, cfg) -> float:
    adj = solve_adjoint(traj, p, atom_mass, cfg)
    ps, _ = costate_at(adj, traj, p, t_star)
    s_star = _primal_at(traj, p, t_star)
    return p.lambda_v - ps * s_star


def _primal_at(traj: Trajectory, p: EpidemicParams, t: float) -> float:
    return state_at(traj, t, p).s


def estimate_atom(
    traj: Trajectory,
    p: EpidemicParams,
    cfg: SolverConfig = SolverConfig(),
    t_star: Optional[float] = None,
) -> float:
    """Atom mass that makes the switching function vanish at the switching time.

    The costates are affine in the atom mass, so two backward solves give the
    switching function for every mass; the root is then bracketed by doubling
    and bisected.
    """
    contacts = traj.contact_times
    if not contacts:
        return 0.0
    if len(contacts) > 1:
        raise MultipleContacts(f"{len(contacts)} separate contacts with i = i_max")
    s0, _ = _state_at_contact(traj, contacts[0])
    if abs(s0 - p.sigma) > HERD_MATCH_TOL:
        raise NoRoot(f"contact at s={s0:.6g}, away from the herd threshold {p.sigma:.6g}")
    if t_star is None:
        t_star = switch_time_of(traj)
    if not 0.0 < t_star < traj.horizon:
        raise NoRoot("the closure phi(t_star) = 0 needs an interior switching time")

    phi0 = _phi_at(traj, p, t_star, 0.0, cfg)
    phi1 = _phi_at(traj, p, t_star, 1.0, cfg)
    slope = phi1 - phi0
    phi = lambda a: phi0 + a * slope

    if phi0 == 0.0:
        return 0.0
    a_hi = 1.0
    for _ in range(200):
        if phi(a_hi) * phi0 <= 0:
            break
        a_hi *= 2.0
    else:
        raise NoRoot("switching function keeps its sign for every atom mass tried")
    lo, hi = 0.0, a_hi
    tol = 1e-12 * max(1.0, p.lambda_v)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        val = phi(mid)
        if abs(val) <= tol or hi - lo <= 1e-15 * hi:
            return mid
        if val * phi0 > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def verify_candidate(
    result: OptimizationResult, p: EpidemicParams, cfg: SolverConfig = SolverConfig()
) -> VerificationReport:
    """Assemble residuals of the necessary conditions; never raises on a failed check."""
    t_star = result.t_star
    x0 = result.trajectory.initial_state
    _, _, traj = evaluate_policy(t_star, x0, p, cfg)
    T = traj.horizon

    if len(traj.contact_times) > 1:
        return VerificationReport(False, math.inf, math.inf, False, False, False)
    atom = 0.0
    if traj.contact_times:
        try:
            atom = estimate_atom(traj, p, cfg, t_star)
        except NoRoot:
            atom = 0.0
    adj = solve_adjoint(traj, p, atom, cfg)

    phi = switching_function(adj, traj, p)
    v = traj.node_controls()
    neg, pos = phi < -SIGN_TOL, phi > SIGN_TOL
    phi_sign_ok = bool(np.all(v[neg] == p.v_max) and np.all(v[pos] == 0.0))

    phi_switch = 0.0
    if 0.0 < t_star < T:
        ps, _ = costate_at(adj, traj, p, t_star)
        phi_switch = abs(p.lambda_v - ps * _primal_at(traj, p, t_star))

    H = hamiltonian(adj, traj, p)
    h_dev = float(np.max(np.abs(H - p.lambda_i * traj.i[-1])))

    complementarity_ok = True
    if adj.atom_mass > 0:
        _, i0 = _state_at_contact(traj, adj.atom_time)
        complementarity_ok = abs(i0 - p.i_max) <= cfg.contact_tol
    transversality_ok = bool(adj.p_s[-1] == 0.0 and adj.p_i[-1] == 0.0 and adj.atom_time != T)

    before = traj.times < t_star
    eta_positive_ok = bool(np.all(adj.eta[before] > -SIGN_TOL))

    return VerificationReport(
        phi_sign_ok=phi_sign_ok,
        phi_zero_at_switch=float(phi_switch),
        hamiltonian_dev=h_dev,
        complementarity_ok=bool(complementarity_ok),
        transversality_ok=transversality_ok,
        eta_positive_ok=eta_positive_ok,
    )
