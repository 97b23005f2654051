"""Controlled SIR dynamics on the simplex, fixed-step integration and costs.

The state is ``(s, i)`` with ``s' = -beta*s*i - v*s`` and ``i' = beta*s*i - gamma*i``.
Steppers are written with plain arithmetic so the same code runs on Python
floats (single trajectories) and on numpy arrays (a batch of policies, one per
lane), with bit-identical results lane by lane.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import (
    DomainError,
    HorizonInvalid,
    SimplexViolation,
    StepSizeInvalid,
    ValidationError,
)

DEFAULT_STEPS = 12000
SIMPLEX_DIAGNOSTIC = 1e-7
MIDPOINT_MAX_ITER = 50
MIDPOINT_TOL = 1e-12


@dataclass(frozen=True)
class EpidemicParams:
    """Model and cost constants of the ICU-constrained vaccination problem."""

    beta: float
    gamma: float
    v_max: float
    i_max: float
    lambda_v: float = 1.0
    lambda_i: float = 0.0
    horizon_T: float = 400.0

    def __post_init__(self):
        for name in ("beta", "gamma", "v_max", "i_max", "lambda_v", "lambda_i", "horizon_T"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or math.isnan(value):
                raise ValidationError(f"{name} must be a real number, got {value!r}")
        if not self.beta > 0 or math.isinf(self.beta):
            raise ValidationError(f"beta > 0 violated (beta={self.beta})")
        if not self.gamma >= 0 or math.isinf(self.gamma):
            raise ValidationError(f"gamma >= 0 violated (gamma={self.gamma})")
        if not self.v_max >= 0 or math.isinf(self.v_max):
            raise ValidationError(f"v_max >= 0 violated (v_max={self.v_max})")
        if not 0 < self.i_max <= 1:
            raise ValidationError(f"i_max in (0,1] violated (i_max={self.i_max})")
        if self.lambda_v < 0 or self.lambda_i < 0:
            raise ValidationError("lambda_v >= 0 and lambda_i >= 0 violated")
        if self.lambda_v == 0 and self.lambda_i == 0:
            raise ValidationError("(lambda_v, lambda_i) != (0, 0) violated")
        if not self.horizon_T > 0:
            raise ValidationError(f"horizon_T > 0 violated (T={self.horizon_T})")

    @property
    def sigma(self) -> float:
        """Herd-immunity threshold gamma/beta."""
        return self.gamma / self.beta

    def replace(self, **changes) -> "EpidemicParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class EpidemicState:
    s: float
    i: float

    def __post_init__(self):
        if math.isnan(self.s) or math.isnan(self.i):
            raise ValidationError("state coordinates must not be NaN")
        if self.s < 0 or self.i < 0 or self.s + self.i > 1:
            raise ValidationError(
                f"state ({self.s}, {self.i}) outside the simplex s, i >= 0, s + i <= 1"
            )

    def as_tuple(self) -> tuple[float, float]:
        return (self.s, self.i)


def reference_params(lambda_v: float = 1.0, lambda_i: float = 0.0, horizon_T: float = 400.0) -> EpidemicParams:
    """Parameters of the reference numerical scenarios (beta=0.18, gamma=0.07, ...)."""
    return EpidemicParams(
        beta=0.18,
        gamma=0.07,
        v_max=0.01,
        i_max=0.005,
        lambda_v=lambda_v,
        lambda_i=lambda_i,
        horizon_T=horizon_T,
    )


REFERENCE_X0 = EpidemicState(0.7, 0.001)


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant control on right-open intervals ``[b_k, b_{k+1})``.

    The last interval is closed on the right, so ``value(breakpoints[-1])``
    returns the last level.
    """

    breakpoints: tuple
    levels: tuple

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        lvls = tuple(float(v) for v in self.levels)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "levels", lvls)
        if len(bps) < 2 or len(lvls) != len(bps) - 1:
            raise ValidationError("need len(levels) == len(breakpoints) - 1 >= 1")
        if any(b1 <= b0 for b0, b1 in zip(bps, bps[1:])):
            raise ValidationError("breakpoints must be strictly increasing")
        if any(v < 0 or math.isnan(v) for v in lvls):
            raise ValidationError("control levels must be nonnegative")

    @classmethod
    def constant(cls, level: float, horizon: float) -> "ControlSchedule":
        return cls((0.0, horizon), (level,))

    @classmethod
    def bang_bang(cls, t_star: float, level: float, horizon: float) -> "ControlSchedule":
        """``level`` on ``[0, t_star)`` and 0 afterwards."""
        if t_star <= 0:
            return cls.constant(0.0, horizon)
        if t_star >= horizon:
            return cls.constant(level, horizon)
        return cls((0.0, t_star, horizon), (level, 0.0))

    def covers(self, horizon: float) -> bool:
        return self.breakpoints[0] <= 0 and self.breakpoints[-1] >= horizon

    def _segment(self, t: float) -> int:
        k = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return min(max(k, 0), len(self.levels) - 1)

    def value(self, t: float) -> float:
        return self.levels[self._segment(t)]

    def integral(self, a: float, b: float) -> float:
        """Exact integral of the control over ``[a, b]``."""
        total = 0.0
        for lo, hi, v in zip(self.breakpoints, self.breakpoints[1:], self.levels):
            lo, hi = max(lo, a), min(hi, b)
            if hi > lo:
                total += v * (hi - lo)
        return total

    @property
    def max_level(self) -> float:
        return max(self.levels)


@dataclass(frozen=True)
class SolverConfig:
    """Integrator settings. ``dt=None`` means ``T / 12000``; ``event_tol=None`` means ``1e-9 * T``."""

    method: str = "rk4"
    dt: Optional[float] = None
    event_tol: Optional[float] = None
    contact_tol: float = 1e-9

    def __post_init__(self):
        if self.method not in STEPPERS:
            raise ValidationError(f"method must be one of {sorted(STEPPERS)}, got {self.method!r}")
        if self.dt is not None and not self.dt > 0:
            raise StepSizeInvalid(f"dt must be positive, got {self.dt}")
        if self.event_tol is not None and not self.event_tol > 0:
            raise ValidationError("event_tol must be positive")
        if not self.contact_tol > 0:
            raise ValidationError("contact_tol must be positive")

    def grid(self, horizon: float) -> tuple[int, float]:
        """Number of steps and the effective step so the grid ends exactly at ``horizon``."""
        if not math.isfinite(horizon):
            raise HorizonInvalid("a finite horizon is required for simulation")
        if self.dt is None:
            return DEFAULT_STEPS, horizon / DEFAULT_STEPS
        n = max(1, int(round(horizon / self.dt)))
        return n, horizon / n

    def event_tolerance(self, horizon: float) -> float:
        return self.event_tol if self.event_tol is not None else 1e-9 * horizon

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class Trajectory:
    """Solution on a uniform grid.

    ``controls[k]`` is the control right after ``times[k]``; when a schedule
    breakpoint falls inside a step the step is split there, and ``schedule``
    keeps the exact control.
    """

    times: np.ndarray
    s: np.ndarray
    i: np.ndarray
    controls: np.ndarray
    schedule: ControlSchedule
    dt: float
    herd_time: Optional[float] = None
    herd_state: Optional[tuple] = None
    contact_times: list = field(default_factory=list)
    method: str = "rk4"

    @property
    def states(self) -> np.ndarray:
        return np.column_stack([self.s, self.i])

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def max_i(self) -> float:
        return float(np.max(self.i))

    @property
    def initial_state(self) -> EpidemicState:
        return EpidemicState(float(self.s[0]), float(self.i[0]))

    def node_controls(self) -> np.ndarray:
        """Control per node (right limits; the final node repeats the last step)."""
        return np.append(self.controls, self.controls[-1] if len(self.controls) else 0.0)

    def state_at(self, k: int) -> EpidemicState:
        return EpidemicState(float(self.s[k]), float(self.i[k]))


def state_at(traj: Trajectory, t: float, p: EpidemicParams) -> EpidemicState:
    """State at an arbitrary time, by a partial step from the node below."""
    k = min(int(math.floor(t / traj.dt)), len(traj.times) - 1)
    s, i = float(traj.s[k]), float(traj.i[k])
    if k < len(traj.times) - 1:
        for h, v in _substeps(traj.schedule, float(traj.times[k]), t - float(traj.times[k])):
            if h > 0:
                s, i = STEPPERS[traj.method](s, i, v, h, p.beta, p.gamma)
    return EpidemicState(max(s, 0.0), max(i, 0.0))


def vector_field(x: EpidemicState, v: float, p: EpidemicParams) -> tuple[float, float]:
    return _rhs(x.s, x.i, v, p.beta, p.gamma)


def _rhs(s, i, v, beta, gamma):
    bsi = beta * s * i
    return -bsi - v * s, bsi - gamma * i


def rk4_step(s, i, v, h, beta, gamma):
    k1s, k1i = _rhs(s, i, v, beta, gamma)
    k2s, k2i = _rhs(s + 0.5 * h * k1s, i + 0.5 * h * k1i, v, beta, gamma)
    k3s, k3i = _rhs(s + 0.5 * h * k2s, i + 0.5 * h * k2i, v, beta, gamma)
    k4s, k4i = _rhs(s + h * k3s, i + h * k3i, v, beta, gamma)
    return (
        s + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s),
        i + h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i),
    )


def implicit_midpoint_step(s, i, v, h, beta, gamma):
    """One implicit midpoint step solved by fixed-point iteration."""
    ds, di = _rhs(s, i, v, beta, gamma)
    s1, i1 = s + h * ds, i + h * di
    for _ in range(MIDPOINT_MAX_ITER):
        ds, di = _rhs(0.5 * (s + s1), 0.5 * (i + i1), v, beta, gamma)
        s2, i2 = s + h * ds, i + h * di
        change = np.max(np.abs(s2 - s1)) + np.max(np.abs(i2 - i1))
        s1, i1 = s2, i2
        if change <= MIDPOINT_TOL:
            break
    return s1, i1


STEPPERS: dict[str, Callable] = {"rk4": rk4_step, "implicit_midpoint": implicit_midpoint_step}


def locate_event(step, s, i, v, h, inside, tol):
    """Smallest sub-step ``tau`` in ``(0, h]`` with ``inside(step(tau))``, to ``tol``.

    Assumes the state at ``tau = 0`` is outside and at ``tau = h`` inside; the
    returned end of the bracket is always on the inside.
    """
    lo, hi = 0.0, h
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if inside(*step(s, i, v, mid)):
            hi = mid
        else:
            lo = mid
    return hi


def _substeps(schedule: ControlSchedule, t_a: float, dt: float):
    """(length, level) pieces of the step starting at ``t_a``, split at breakpoints."""
    t_b = t_a + dt
    offsets = [b - t_a for b in schedule.breakpoints[1:-1] if t_a < b < t_b]
    if not offsets:
        return [(dt, schedule.value(t_a))]
    pieces = []
    prev = 0.0
    for off in offsets:
        pieces.append((off - prev, schedule.value(t_a + prev)))
        prev = off
    pieces.append((dt - prev, schedule.value(t_a + prev)))
    return pieces


def _step_pieces(u: ControlSchedule, n: int, dt: float):
    """Flattened ``(length, level)`` pieces of every step, as :func:`_substeps` would produce."""
    t_a = np.arange(n) * dt
    bps = np.asarray(u.breakpoints)
    levels = np.asarray(u.levels)
    seg = np.clip(np.searchsorted(bps, t_a, side="right") - 1, 0, len(levels) - 1)
    v_steps = levels[seg]
    split = {}
    for b in u.breakpoints[1:-1]:
        k0 = int(math.floor(b / dt))
        for k in (k0 - 1, k0, k0 + 1):
            if 0 <= k < n and k not in split:
                ta = float(t_a[k])
                if ta < b < ta + dt:
                    split[k] = _substeps(u, ta, dt)
    counts = np.ones(n, dtype=np.int64)
    for k, pieces in split.items():
        counts[k] = len(pieces)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    piece_h = np.full(int(counts.sum()), dt)
    piece_v = np.repeat(v_steps, counts)
    for k, pieces in split.items():
        for j, (h, v) in enumerate(pieces):
            piece_h[starts[k] + j] = h
            piece_v[starts[k] + j] = v
    return counts, piece_h, piece_v, v_steps


def _check_inputs(x0: EpidemicState, u: ControlSchedule, p: EpidemicParams):
    if not math.isfinite(p.horizon_T):
        raise HorizonInvalid("simulation needs a finite horizon")
    if not u.covers(p.horizon_T):
        raise HorizonInvalid(
            f"schedule covers [{u.breakpoints[0]}, {u.breakpoints[-1]}], not [0, {p.horizon_T}]"
        )
    if u.max_level > p.v_max * (1 + 1e-12):
        raise ValidationError(f"control level {u.max_level} exceeds v_max={p.v_max}")


def simulate(x0: EpidemicState, u: ControlSchedule, p: EpidemicParams, cfg: SolverConfig = SolverConfig()) -> Trajectory:
    """Integrate the controlled system on ``[0, T]``.

    Records the first herd crossing ``s <= gamma/beta`` (bisection to the event
    tolerance) and the contact times with ``i >= i_max - contact_tol``.
    """
    _check_inputs(x0, u, p)
    n, dt = cfg.grid(p.horizon_T)
    step = STEPPERS[cfg.method]
    tol = cfg.event_tolerance(p.horizon_T)
    beta, gamma, sigma = p.beta, p.gamma, p.sigma

    s_out = np.empty(n + 1)
    i_out = np.empty(n + 1)
    v_out = np.empty(n)
    s, i = float(x0.s), float(x0.i)
    s_out[0], i_out[0] = s, i
    herd_time = 0.0 if s <= sigma else None
    herd_state = (s, i) if herd_time is not None else None

    def stepper(s_, i_, v_, h_):
        return step(s_, i_, v_, h_, beta, gamma)

    if cfg.method == "rk4":
        counts, piece_h, piece_v, v_steps = _step_pieces(u, n, dt)
        v_out[:] = v_steps
        s_out, i_out, hp, h_t, h_s, h_i = _kernels.integrate_pieces(
            s, i, n, dt, counts, piece_h, piece_v, beta, gamma, sigma, herd_time is not None
        )
        if hp >= 0:
            v, h = float(piece_v[hp]), float(piece_h[hp])
            tau = locate_event(stepper, h_s, h_i, v, h, lambda s_, i_: s_ <= sigma, tol)
            herd_time = h_t + tau
            herd_state = tuple(float(z) for z in stepper(h_s, h_i, v, tau))
    else:
        for k in range(n):
            t_a = k * dt
            t_sub = t_a
            v_out[k] = u.value(t_a)
            for h, v in _substeps(u, t_a, dt):
                s_new, i_new = stepper(s, i, v, h)
                if herd_time is None and s_new <= sigma:
                    tau = locate_event(stepper, s, i, v, h, lambda s_, i_: s_ <= sigma, tol)
                    herd_time = t_sub + tau
                    herd_state = tuple(float(z) for z in stepper(s, i, v, tau))
                s, i = s_new, i_new
                t_sub += h
            s_out[k + 1], i_out[k + 1] = s, i

    times = np.arange(n + 1) * dt
    traj = Trajectory(
        times=times,
        s=s_out,
        i=i_out,
        controls=v_out,
        schedule=u,
        dt=dt,
        herd_time=herd_time,
        herd_state=herd_state,
        method=cfg.method,
    )
    traj.contact_times = find_contacts(traj, p, cfg.contact_tol)
    _diagnose_simplex(s_out, i_out)
    return traj


def find_contacts(traj: Trajectory, p: EpidemicParams, contact_tol: float) -> list:
    """One time per maximal run of nodes with ``i >= i_max - contact_tol``.

    The peak of ``i`` sits at the herd crossing, so a run that brackets the
    herd time reports the herd time; other runs report their highest node.
    """
    level = p.i_max - contact_tol
    near = traj.i >= level
    herd = traj.herd_time
    herd_hit = traj.herd_state is not None and traj.herd_state[1] >= level
    runs = []
    k, n = 0, len(near)
    while k < n:
        if near[k]:
            j = k
            while j + 1 < n and near[j + 1]:
                j += 1
            runs.append((k, j))
            k = j + 1
        else:
            k += 1
    contacts = []
    herd_used = False
    for a, b in runs:
        lo, hi = traj.times[max(a - 1, 0)], traj.times[min(b + 1, n - 1)]
        if herd_hit and herd is not None and lo <= herd <= hi:
            contacts.append(float(herd))
            herd_used = True
        else:
            contacts.append(float(traj.times[a + int(np.argmax(traj.i[a : b + 1]))]))
    if herd_hit and not herd_used:
        contacts.append(float(herd))
        contacts.sort()
    return contacts


def _diagnose_simplex(s: np.ndarray, i: np.ndarray):
    worst = max(-float(np.min(s)), -float(np.min(i)), float(np.max(s + i)) - 1.0)
    if worst > SIMPLEX_DIAGNOSTIC:
        warnings.warn(f"trajectory leaves the simplex by {worst:.3e}", SimplexViolation, stacklevel=3)


def simulate_bang_bang_batch(
    x0: EpidemicState,
    t_stars: Sequence[float],
    p: EpidemicParams,
    cfg: SolverConfig = SolverConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Integral of ``i`` and maximum node value of ``i`` for many switching times at once.

    Lane ``k`` runs the policy ``v_max`` on ``[0, t_stars[k])`` then 0; each
    lane reproduces the node values of :func:`simulate` for the same policy.
    """
    T = p.horizon_T
    n, dt = cfg.grid(T)
    step = STEPPERS[cfg.method]
    beta, gamma, v_max = p.beta, p.gamma, p.v_max
    t_star = np.asarray(t_stars, dtype=float)
    if cfg.method == "rk4" and _kernels.JIT:
        flat = np.ascontiguousarray(t_star.ravel())
        integral, top = _kernels.bang_bang_lanes(float(x0.s), float(x0.i), flat, T, n, dt, beta, gamma, v_max)
        return integral.reshape(t_star.shape), top.reshape(t_star.shape)
    if t_star.size == 1:
        # same arithmetic on Python floats, much cheaper than one-lane arrays
        integral, top = _bang_bang_lane(x0, float(t_star.ravel()[0]), T, n, dt, step, beta, gamma, v_max)
        return np.full(t_star.shape, integral), np.full(t_star.shape, top)
    t_star = np.where(t_star >= T, np.inf, t_star)
    s = np.full(t_star.shape, float(x0.s))
    i = np.full(t_star.shape, float(x0.i))
    trap = np.zeros_like(s)
    peak = i.copy()
    for k in range(n):
        t_a = k * dt
        inside = (t_star > t_a) & (t_star < t_a + dt)
        h1 = np.where(t_star <= t_a, 0.0, np.where(inside, t_star - t_a, dt))
        h2 = dt - h1
        i_prev = i
        if np.any(h1 > 0):
            s, i = step(s, i, v_max, h1, beta, gamma)
        if np.any(h2 > 0):
            s, i = step(s, i, 0.0, h2, beta, gamma)
        trap = trap + (i_prev + i)
        peak = np.maximum(peak, i)
    return 0.5 * dt * trap, peak


_split_step = getattr(_kernels.split_step, "py_func", _kernels.split_step)


def _bang_bang_lane(x0, t_star, T, n, dt, step, beta, gamma, v_max):
    if t_star >= T:
        t_star = math.inf
    s, i = float(x0.s), float(x0.i)
    trap = 0.0
    peak = i
    for k in range(n):
        h1, h2 = _split_step(t_star, k * dt, dt)
        i_prev = i
        if h1 > 0:
            s, i = step(s, i, v_max, h1, beta, gamma)
        if h2 > 0:
            s, i = step(s, i, 0.0, h2, beta, gamma)
        trap = trap + (i_prev + i)
        peak = max(peak, i)
    return 0.5 * dt * trap, peak


def trapezoid(values: np.ndarray, dt: float) -> float:
    """Uniform-grid trapezoid rule, accumulated node pair by node pair."""
    return float(_kernels.pairwise_trapezoid(np.ascontiguousarray(values, dtype=float), float(dt)))


def running_cost(traj: Trajectory, p: EpidemicParams) -> float:
    """Total cost ``int lambda_v v + lambda_i i dt``.

    The trapezoid rule runs over the grid refined at the control breakpoints,
    which makes the control part exact for piecewise-constant controls.
    """
    control_part = traj.schedule.integral(0.0, traj.horizon)
    infection_part = trapezoid(traj.i, traj.dt) if p.lambda_i else 0.0
    return p.lambda_v * control_part + p.lambda_i * infection_part


def conserved_quantity(x: EpidemicState, x0: EpidemicState, v0: float, p: EpidemicParams) -> float:
    """Level-set residual of the constant-control first integral.

    Zero along any trajectory through ``x0`` driven by the constant control ``v0``.
    """
    if min(x.s, x.i, x0.s, x0.i) <= 0:
        raise DomainError("conserved quantity needs s, i, s0, i0 > 0")
    return (
        (x.s - x0.s) + (x.i - x0.i)
        + (v0 / p.beta) * math.log(x.i / x0.i)
        - p.sigma * math.log(x.s / x0.s)
    )


def conserved_residuals(traj: Trajectory, v0: float, p: EpidemicParams) -> np.ndarray:
    """:func:`conserved_quantity` at every node, relative to the initial node."""
    s, i = traj.s, traj.i
    if min(float(np.min(s)), float(np.min(i))) <= 0:
        raise DomainError("conserved quantity needs s, i > 0 at every node")
    s0, i0 = s[0], i[0]
    return (s - s0) + (i - i0) + (v0 / p.beta) * np.log(i / i0) - p.sigma * np.log(s / s0)


def herd_time_bound(x0: EpidemicState, p: EpidemicParams) -> float:
    """Upper bound ``(s0 - gamma/beta)^+ / (gamma i0)`` on the herd-crossing time."""
    if x0.i <= 0:
        raise DomainError("herd time bound needs i0 > 0")
    if p.gamma == 0:
        raise DomainError("herd time bound needs gamma > 0")
    return max(x0.s - p.sigma, 0.0) / (p.gamma * x0.i)
