"""Scenario studies: the four reference weightings, ratio sweeps and horizon sweeps."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .control import OptimizationResult, optimize_switching_time
from .dynamics import REFERENCE_X0, EpidemicParams, EpidemicState, SolverConfig, Trajectory, reference_params
from .errors import ValidationError
from .pontryagin import VerificationReport, verify_candidate
from .viability import RegionLabel, sample_curves, switching_point

DEFAULT_HORIZONS = (400.0, 800.0, 1600.0, 3200.0)
DEFAULT_RATIOS = (0.0, 0.05, 0.1, 0.15, 0.17, 0.2, 0.5, 1.0)
MATCH_TOL = 1e-5  # relative to T
THREADS_ENV = "SIR_ICU_THREADS"


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    params: EpidemicParams
    x0: EpidemicState
    lambda_ratio: float
    horizons: tuple = (400.0,)

    def __post_init__(self):
        if not self.name:
            raise ValidationError("scenario name must be nonempty")
        hs = tuple(float(h) for h in self.horizons)
        if not hs or any(h <= 0 or not math.isfinite(h) for h in hs):
            raise ValidationError("horizons must be positive and finite")
        if any(b <= a for a, b in zip(hs, hs[1:])):
            raise ValidationError("horizons must be strictly increasing")
        object.__setattr__(self, "horizons", hs)

    @classmethod
    def from_params(cls, name: str, p: EpidemicParams, x0: EpidemicState, horizons=None) -> "ScenarioSpec":
        ratio = p.lambda_i / p.lambda_v if p.lambda_v > 0 else math.inf
        return cls(name, p, x0, ratio, tuple(horizons) if horizons else (p.horizon_T,))

    def with_ratio(self, ratio: float) -> EpidemicParams:
        """Parameters with ``lambda_i = ratio * lambda_v``."""
        return self.params.replace(lambda_i=ratio * self.params.lambda_v)


@dataclass
class SweepRow:
    key: float
    t_star: float
    cost: float
    s_at_switch: float
    region_at_switch: str
    herd_time: Optional[float]
    delta_t_star: Optional[float] = None

    @classmethod
    def from_result(cls, key: float, r: OptimizationResult) -> "SweepRow":
        return cls(
            key=float(key),
            t_star=float(r.t_star),
            cost=float(r.cost),
            s_at_switch=float(r.switch_state.s),
            region_at_switch=r.region_at_switch.value,
            herd_time=None if r.herd_time is None else float(r.herd_time),
        )

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ScenarioResult:
    name: str
    params: EpidemicParams
    result: OptimizationResult
    report: VerificationReport
    curves: tuple
    checks: dict = field(default_factory=dict)

    @property
    def trajectory(self) -> Trajectory:
        return self.result.trajectory

    def summary(self) -> dict:
        return {
            "name": self.name,
            "lambda_v": self.params.lambda_v,
            "lambda_i": self.params.lambda_i,
            **self.result.summary(),
            "verification": self.report.to_dict(),
            "checks": {k: bool(v) for k, v in self.checks.items()},
        }


# parallel map --------------------------------------------------------------

def worker_count(n_tasks: int) -> int:
    """Workers to use for ``n_tasks`` independent jobs; ``SIR_ICU_THREADS=0`` forces sequential."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(raw)
        except ValueError as exc:
            raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
        if cap < 0:
            raise ValidationError(f"{THREADS_ENV} must be >= 0")
    return max(0, min(cap, n_tasks))


def ordered_map(fn: Callable, items: Sequence) -> list:
    """``[fn(x) for x in items]``, possibly in worker processes; order is preserved."""
    items = list(items)
    workers = worker_count(len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# reference scenarios -------------------------------------------------------

REFERENCE_SCENARIOS = (("a", 0.0), ("a_prime", 0.1), ("b", 0.17), ("c", 1.0))


def reference_spec(name: str = "reference", lambda_ratio: float = 0.0, horizons=(400.0,)) -> ScenarioSpec:
    p = reference_params(lambda_v=1.0, lambda_i=lambda_ratio, horizon_T=horizons[0])
    return ScenarioSpec(name, p, REFERENCE_X0, lambda_ratio, tuple(horizons))


def _run_one(args) -> ScenarioResult:
    name, p, x0, cfg, verify_cfg = args
    res = optimize_switching_time(x0, p, cfg)
    report = verify_candidate(res, p, verify_cfg or cfg)
    return ScenarioResult(name, p, res, report, sample_curves(p))


def run_reference_scenarios(
    cfg: SolverConfig = SolverConfig(),
    verify_cfg: Optional[SolverConfig] = None,
    x0: EpidemicState = REFERENCE_X0,
    base: Optional[EpidemicParams] = None,
) -> dict:
    """Optimise, verify and check the reference orderings for each weighting.

    Each scenario uses ``base`` (the reference parameters by default) with
    ``lambda_i = ratio * lambda_v``. Returns ``{name: ScenarioResult}`` keyed
    ``a``, ``a_prime``, ``b``, ``c``.
    """
    base = base if base is not None else reference_params()
    if base.lambda_v <= 0:
        raise ValidationError("the reference weightings need lambda_v > 0")
    jobs = [
        (name, base.replace(lambda_i=ratio * base.lambda_v), x0, cfg, verify_cfg)
        for name, ratio in REFERENCE_SCENARIOS
    ]
    out = {r.name: r for r in ordered_map(_run_one, jobs)}
    T = base.horizon_T
    a, ap, c = out["a"], out["a_prime"], out["c"]

    closed = switching_point(x0, a.params)
    sw = a.result.switch_state
    a.checks.update(
        on_boundary_A=a.result.region_at_switch is RegionLabel.BoundaryA,
        before_herd=a.result.herd_time is not None and a.result.t_star < a.result.herd_time,
        matches_reach_time=abs(a.result.t_star - a.result.t_A) <= MATCH_TOL * T,
        matches_closed_form=abs(sw.s - closed.s_star) <= 1e-5 and abs(sw.i - closed.i_star) <= 1e-5,
    )
    ap.checks["same_as_a"] = abs(ap.result.t_star - a.result.t_star) <= MATCH_TOL * T
    c.checks["after_herd"] = c.result.herd_time is not None and c.result.t_star > c.result.herd_time
    for r in out.values():
        r.checks["feasible"] = r.result.trajectory.max_i <= r.params.i_max + 1e-9
        r.checks["s_at_switch_ge_sigma"] = (
            r.params.lambda_i > r.params.beta * r.params.lambda_v
            or r.result.switch_state.s >= r.params.sigma - 1e-6
        )
    return out


run_paper_scenarios = run_reference_scenarios


# sweeps ---------------------------------------------------------------------

def _optimize_row(args) -> SweepRow:
    key, x0, p, cfg = args
    return SweepRow.from_result(key, optimize_switching_time(x0, p, cfg))


def sweep_lambda(ratios: Sequence[float], base: ScenarioSpec, cfg: SolverConfig = SolverConfig()) -> list:
    """One optimisation per ratio ``lambda_i / lambda_v``; rows sorted by ratio.

    ``delta_t_star`` is measured against ratio 0, which is computed even when
    it is not among ``ratios``.
    """
    ratios = sorted(float(r) for r in ratios)
    if any(r < 0 or not math.isfinite(r) for r in ratios):
        raise ValidationError("ratios must be finite and nonnegative")
    keys = ratios if ratios and ratios[0] == 0.0 else [0.0] + ratios
    jobs = [(r, base.x0, base.with_ratio(r), cfg) for r in keys]
    rows = ordered_map(_optimize_row, jobs)
    baseline = rows[0].t_star
    for row in rows:
        row.delta_t_star = row.t_star - baseline
    return rows if keys is ratios else rows[1:]


def coincidence_threshold(rows: Sequence[SweepRow], horizon: float, rel_tol: float = MATCH_TOL) -> float:
    """Largest tested ratio whose switching time matches ratio 0 within ``rel_tol * T``.

    An empirical lower bracket for the ratio below which the running infection
    cost does not move the optimum.
    """
    matched = [r.key for r in rows if r.delta_t_star is not None and abs(r.delta_t_star) <= rel_tol * horizon]
    return max(matched) if matched else math.nan


def sweep_horizon(spec: ScenarioSpec, cfg: SolverConfig = SolverConfig()) -> list:
    """Optimal switching time for each horizon in ``spec.horizons``.

    All horizons share one step size (the default grid of the shortest one
    unless ``cfg.dt`` is set), so the grids are nested and differences between
    horizons are not polluted by changing discretisation.
    """
    dt = cfg.dt if cfg.dt is not None else cfg.grid(spec.horizons[0])[1]
    fixed = cfg.replace(dt=dt)
    jobs = [(T, spec.x0, spec.params.replace(horizon_T=T), fixed) for T in spec.horizons]
    rows = ordered_map(_optimize_row, jobs)
    prev = None
    for row in rows:
        row.delta_t_star = None if prev is None else row.t_star - prev
        prev = row.t_star
    return rows


def successive_differences(rows: Sequence[SweepRow]) -> list:
    """``|t_star[k+1] - t_star[k]|`` along a horizon sweep."""
    ts = [r.t_star for r in rows]
    return [abs(b - a) for a, b in zip(ts, ts[1:])]


def differences_non_increasing(diffs: Sequence[float], slack: float) -> bool:
    """Cauchy-type diagnostic: each difference at most the previous one plus ``slack``."""
    return all(b <= a + slack for a, b in zip(diffs, diffs[1:]))


def curves_table(p: EpidemicParams) -> np.ndarray:
    s, g, gs = sample_curves(p)
    return np.column_stack([s, g, gs])
