"""Safe set A, viable set B and the closed-form switching point.

``A = {i <= gamma_bar(s)}`` is the set from which doing nothing keeps
``i <= i_max`` forever; ``B = {i <= gamma_star(s)}`` is the set from which some
control does. Both boundaries are level sets of the constant-control first
integral through the tangency point ``(gamma/beta, i_max)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .dynamics import (
    STEPPERS,
    EpidemicParams,
    EpidemicState,
    SolverConfig,
    locate_event,
)
from .errors import DomainError, NeverReached, NoViableLevel, NotInViableBand, OutsideViable, ValidationError

BOUNDARY_TOL = 1e-9
GAMMA_STAR_TOL = 1e-12
GAMMA_STAR_FLOOR = 1e-16
CURVE_POINTS = 4096


class RegionLabel(str, enum.Enum):
    InteriorA = "InteriorA"
    BoundaryA = "BoundaryA"
    BminusA = "BminusA"
    OutsideB_insideC = "OutsideB_insideC"
    OutsideC = "OutsideC"

    @property
    def in_A(self) -> bool:
        return self in (RegionLabel.InteriorA, RegionLabel.BoundaryA)

    @property
    def in_B(self) -> bool:
        return self.in_A or self is RegionLabel.BminusA


@dataclass(frozen=True)
class SwitchingPoint:
    s_star: float
    i_star: float


def gamma_bar(s: float, p: EpidemicParams) -> float:
    """Upper boundary of the safe set; negative values mean A is empty above ``s``."""
    if s < 0:
        raise DomainError("gamma_bar needs s >= 0")
    sigma = p.sigma
    if s <= sigma:
        return p.i_max
    return sigma + p.i_max - s + sigma * math.log(s / sigma)


def eq_phi_residual(s: float, i: float, p: EpidemicParams) -> float:
    """Level-set function of the ``v = v_max`` trajectory through ``(gamma/beta, i_max)``."""
    sigma = p.sigma
    return (
        s + i - sigma - p.i_max
        + (p.v_max / p.beta) * math.log(i / p.i_max)
        - sigma * math.log(s / sigma)
    )


def gamma_star(s: float, p: EpidemicParams) -> float:
    """Upper boundary of the viable set, by bisection of the level-set equation in ``i``."""
    if s <= 0:
        raise DomainError("gamma_star needs s > 0")
    if s <= p.sigma:
        return p.i_max
    if p.v_max == 0:
        # without vaccination B = A
        level = gamma_bar(s, p)
        if level <= 0:
            raise NoViableLevel(f"no viable infection level at s={s} with v_max=0")
        return level
    f = lambda i: eq_phi_residual(s, i, p)
    lo = GAMMA_STAR_FLOOR
    while f(lo) > 0 and lo > 1e-300:
        lo *= 1e-16
    if f(lo) > 0:
        raise NoViableLevel(f"level-set equation has no root in (0, i_max] at s={s}")
    hi = p.i_max
    if f(hi) <= GAMMA_STAR_TOL:
        return hi
    root = optimize.bisect(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000)
    return float(root)


def classify(x: EpidemicState, p: EpidemicParams) -> RegionLabel:
    s, i = x.s, x.i
    if i > p.i_max:
        return RegionLabel.OutsideC
    g = gamma_bar(s, p)
    if abs(i - g) <= BOUNDARY_TOL or (i == p.i_max and s <= p.sigma):
        return RegionLabel.BoundaryA
    if i < g:
        return RegionLabel.InteriorA
    if i <= gamma_star(s, p):
        return RegionLabel.BminusA
    return RegionLabel.OutsideB_insideC


# Lambert W ------------------------------------------------------------------

_INV_E = math.exp(-1.0)


def lambert_w(branch: str, x: float) -> float:
    """Real Lambert W on the principal (``"principal"``) or lower (``"minus_one"``) branch.

    Halley iteration from a branch-point series or asymptotic initial guess.
    """
    if branch not in ("principal", "minus_one"):
        raise DomainError(f"unknown branch {branch!r}")
    x = float(x)
    if math.isnan(x) or x < -_INV_E:
        raise DomainError(f"Lambert W undefined for x={x} < -1/e")
    if branch == "minus_one" and x >= 0:
        raise DomainError("the minus_one branch needs -1/e <= x < 0")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf

    # distance to the branch point in the natural variable p = sqrt(2 (e x + 1))
    p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
    sign = 1.0 if branch == "principal" else -1.0
    if p < 1e-8:
        return -1.0 + sign * p - p * p / 3.0
    if p < 0.5:
        q = sign * p
        w = -1.0 + q - q * q / 3.0 + 11.0 / 72.0 * q ** 3
    elif branch == "principal":
        if x < 3.0:
            w = math.log1p(x) * (1.0 - math.log1p(math.log1p(x)) / (2.0 + math.log1p(x)))
        else:
            l1 = math.log(x)
            l2 = math.log(l1)
            w = l1 - l2 + l2 / l1
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1

    for _ in range(40):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= 1e-16 * (1.0 + abs(w)):
            break
    return w


def switching_point(x0: EpidemicState, p: EpidemicParams) -> SwitchingPoint:
    """Where the ``v = v_max`` trajectory from ``x0`` meets the boundary of A.

    The infection level follows from the first integral alone; the susceptible
    level inverts ``s - sigma*log(s) = const`` on the branch ``s >= gamma/beta``.
    """
    if p.v_max <= 0:
        raise ValidationError("switching_point needs v_max > 0")
    label = classify(x0, p)
    if label is RegionLabel.BoundaryA:
        return SwitchingPoint(x0.s, x0.i)
    if label is not RegionLabel.BminusA:
        raise NotInViableBand(f"initial state is {label.value}, not in B minus A")
    sigma = p.sigma
    exponent = (p.beta / p.v_max) * (
        x0.s - sigma + x0.i - p.i_max - sigma * math.log(x0.s / sigma)
    )
    i_star = x0.i * math.exp(exponent)
    arg = -math.exp(-(1.0 + (p.beta / p.gamma) * (p.i_max - i_star)))
    s_star = -sigma * lambert_w("minus_one", max(arg, -_INV_E))
    return SwitchingPoint(s_star, i_star)


def _in_A(s: float, i: float, p: EpidemicParams) -> bool:
    return i <= gamma_bar(max(s, 0.0), p)


def reach_time_A(x0: EpidemicState, p: EpidemicParams, cfg: SolverConfig = SolverConfig()) -> float:
    """First time the ``v = v_max`` trajectory enters A.

    The crossing of the graph of ``gamma_bar`` is bracketed between nodes and
    bisected; the returned time is the inside end of the bracket, so the state
    there lies in A (never above the curve).
    """
    label = classify(x0, p)
    if label.in_A:
        return 0.0
    if not label.in_B:
        raise OutsideViable(f"initial state is {label.value}, outside B")
    n, dt = cfg.grid(p.horizon_T)
    step = STEPPERS[cfg.method]
    tol = cfg.event_tolerance(p.horizon_T)
    beta, gamma, v = p.beta, p.gamma, p.v_max

    def stepper(s_, i_, v_, h_):
        return step(s_, i_, v_, h_, beta, gamma)

    inside = lambda s_, i_: _in_A(s_, i_, p)
    s, i = x0.s, x0.i
    for k in range(n):
        s_new, i_new = stepper(s, i, v, dt)
        if inside(s_new, i_new):
            return k * dt + locate_event(stepper, s, i, v, dt, inside, tol)
        s, i = s_new, i_new
    raise NeverReached(f"A not reached before T={p.horizon_T}")


def sample_curves(p: EpidemicParams, n: int = CURVE_POINTS) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(s, gamma_bar(s), gamma_star(s))`` on a log-uniform grid over ``[gamma/beta, 1]``."""
    s_grid = np.geomspace(p.sigma, 1.0, n)
    s_grid[0] = p.sigma
    g = np.array([gamma_bar(s, p) for s in s_grid])
    gs = np.array([gamma_star(s, p) for s in s_grid])
    return s_grid, g, gs
