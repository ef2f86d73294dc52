"""Lane-change planning loops.

:func:`plan` alternates swarm refinement of the steering sequence with cubic
smoothing of the result until a safe, lane-aligned trajectory is found.
:func:`mc_modify_plan` is the sampling baseline that only shifts the
longitudinal target of the initial plan.  Both return rollouts of explicit
control sequences and judge safety through the same :func:`assess`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import pso
from .cost import CostBreakdown, CostWeights, Reference, evaluate, lane_violation
from .geometry import Road, SafetySpec, min_clearance
from .kinematics import DEFAULT_DT, Trajectory, VehicleGeometry, VehicleState, rollout
from .prediction import Predictor, predict_horizon
from .smoothing import lane_change_cubic, regenerate_reference, smooth


class PlanningError(ValueError):
    pass


@dataclass
class PlanRequest:
    ego: VehicleState
    target: tuple[float, float, float]  # (x*, y*, psi*)
    observations: np.ndarray  # (n_obs, n_veh, 2), oldest first
    road: Road = field(default_factory=Road)
    target_lane: int = 0
    ego_geom: VehicleGeometry = field(default_factory=VehicleGeometry)
    other_geoms: object = field(default_factory=VehicleGeometry)
    horizon: int = 30
    dt: float = DEFAULT_DT
    safety: SafetySpec = field(default_factory=SafetySpec)
    delta_max: float = 0.5

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=float)
        if self.observations.ndim != 3 or self.observations.shape[-1] != 2:
            raise PlanningError("observations must have shape (n_obs, n_veh, 2)")

    @property
    def y_c(self) -> float:
        return self.road.center(self.target_lane)


@dataclass(frozen=True)
class PlanConfig:
    max_rounds: int = 5
    time_budget_ms: float | None = 200.0  # hard stop at twice this
    merge_tolerance: float = 0.2
    refine_until_converged: bool = False
    convergence: float = 0.01
    seed: int | None = None


@dataclass
class Assessment:
    clearance: float
    clearance_step: int
    predictions: np.ndarray
    aligned: bool
    lane_ok: bool
    controls_ok: bool

    def feasible(self, safety: SafetySpec) -> bool:
        return self.clearance >= safety.epsilon and self.aligned and self.lane_ok and self.controls_ok


@dataclass
class PlanResult:
    trajectory: Trajectory | None
    reference: Reference | None
    feasible: bool
    rounds: int
    wall_time: float
    min_clearance: float
    steps_to_merge: int
    predictions: np.ndarray | None = None
    breakdown: CostBreakdown | None = None
    method: str = "pso"
    modifications: int = 0
    trace: list[dict] = field(default_factory=list)
    round_costs: list[float] = field(default_factory=list)
    diagnostic: str = ""

    def summary(self) -> dict:
        """JSON-ready scalar fields."""
        return {
            "method": self.method,
            "feasible": self.feasible,
            "rounds": self.rounds,
            "modifications": self.modifications,
            "wall_time_s": self.wall_time,
            "min_clearance_m": None if math.isinf(self.min_clearance) else self.min_clearance,
            "steps_to_merge": self.steps_to_merge,
            "cost": None if self.breakdown is None else self.breakdown.to_dict(),
            "round_costs": self.round_costs,
            "diagnostic": self.diagnostic,
        }


def steps_to_merge(traj: Trajectory, y_c: float, tolerance: float = 0.2) -> int:
    """First index from which the trajectory stays within ``tolerance`` of ``y_c``.

    Returns the horizon (last index) when the final state is still outside.
    """
    off = np.abs(np.asarray(traj.y) - y_c) > tolerance
    if not off.any():
        return 0
    last_off = int(np.flatnonzero(off)[-1])
    return min(last_off + 1, len(traj) - 1)


def _constant_speed_source(request: PlanRequest) -> Trajectory:
    n = request.horizon + 1
    e = request.ego
    return Trajectory(np.full(n, e.x), np.full(n, e.y), np.full(n, e.v), np.full(n, e.psi), request.dt)


def plan_to_target(request: PlanRequest, target_x: float) -> Reference:
    """Constant-speed reference with a zero-slope cubic lateral profile to ``target_x``."""
    e = request.ego
    if target_x <= e.x:
        raise PlanningError(f"target x={target_x:.2f} is not ahead of the ego at x={e.x:.2f}")
    curve = lane_change_cubic(e.x, e.y, target_x, request.target[1])
    return regenerate_reference(curve, _constant_speed_source(request), request.horizon, request.dt,
                                request.ego_geom, request.road, request.target_lane, e.psi,
                                request.delta_max)


def initial_plan(request: PlanRequest) -> Reference:
    """The traffic-agnostic plan every search starts from."""
    return plan_to_target(request, request.target[0])


def track(request: PlanRequest, reference: Reference) -> Trajectory:
    """Roll out the controls that track ``reference``."""
    return rollout(request.ego, reference.delta, reference.accel, request.ego_geom, request.dt)


def predict_for(request: PlanRequest, predictor: Predictor, plan: Trajectory | None) -> np.ndarray:
    """Predicted positions for steps ``1..N`` given an ego plan."""
    return predict_horizon(predictor, request.observations, request.horizon, plan)


def assess(request: PlanRequest, predictor: Predictor, traj: Trajectory,
           tolerance: float = 0.2) -> Assessment:
    """Safety, lane and alignment check of a full ego trajectory.

    Surrounding vehicles are predicted with ``traj`` as the ego plan, so an
    interactive predictor reacts to exactly the trajectory being judged.
    """
    preds = predict_for(request, predictor, traj)
    ahead = traj.segment(1)
    if preds.shape[1]:
        cl = min_clearance(ahead, preds, request.ego_geom, request.other_geoms)
        clearance, cstep = cl.distance, cl.step + 1
    else:
        clearance, cstep = math.inf, -1
    aligned = abs(float(traj.y[-1]) - request.y_c) <= tolerance
    ref_like = Reference(traj.x, traj.y, traj.v, traj.psi, np.zeros(len(traj) - 1),
                         np.zeros(len(traj) - 1), request.y_c,
                         request.road.lane_bounds(request.target_lane), request.road.bounds,
                         request.dt)
    lane_ok = not lane_violation(traj.y[1:], ref_like)
    controls_ok = traj.steering is None or bool(
        np.all(np.abs(traj.steering) <= request.delta_max + 1e-12))
    return Assessment(clearance, cstep, preds, aligned, lane_ok, controls_ok)


@dataclass
class _Candidate:
    trajectory: Trajectory
    reference: Reference
    assessment: Assessment
    breakdown: CostBreakdown
    feasible: bool


def _candidate(request, predictor, traj, reference, yardstick, weights, tolerance):
    a = assess(request, predictor, traj, tolerance)
    bd = evaluate(traj, yardstick, a.predictions, request.ego_geom, request.other_geoms,
                  request.safety, weights)
    return _Candidate(traj, reference, a, bd, a.feasible(request.safety))


def _better(a: _Candidate | None, b: _Candidate) -> bool:
    """Is ``b`` preferable to incumbent ``a``?"""
    if a is None:
        return True
    if a.feasible != b.feasible:
        return b.feasible
    return b.breakdown.total < a.breakdown.total


def _result(best: _Candidate | None, request, method, rounds, t0, **extra) -> PlanResult:
    wall = time.perf_counter() - t0
    if best is None:
        return PlanResult(None, None, False, rounds, wall, -math.inf, request.horizon,
                          method=method, **extra)
    return PlanResult(best.trajectory, best.reference, best.feasible, rounds, wall,
                      best.assessment.clearance,
                      steps_to_merge(best.trajectory, request.y_c, extra.pop("tolerance", 0.2)),
                      best.assessment.predictions, best.breakdown, method, **extra)


def plan(request: PlanRequest, predictor: Predictor, swarm: pso.SwarmConfig = pso.SwarmConfig(),
         weights: CostWeights = CostWeights(), config: PlanConfig = PlanConfig()) -> PlanResult:
    """Swarm refinement and cubic smoothing, repeated until a feasible plan appears.

    Every round yields two candidates: the swarm's best rollout and the
    rollout tracking its smoothed cubic.  Candidates, together with the
    tracked initial plan, are ranked feasible-first and then by cost against
    the initial reference; the best one seen is returned.
    """
    t0 = time.perf_counter()
    cap = None if config.time_budget_ms is None else 2 * config.time_budget_ms / 1000.0
    tol = config.merge_tolerance
    rng = np.random.default_rng(config.seed if config.seed is not None else swarm.seed)

    reference = initial_plan(request)
    yardstick = reference
    start = track(request, reference)
    best = _candidate(request, predictor, start, reference, yardstick, weights, tol)
    predictions = best.assessment.predictions
    trace: list[dict] = []
    round_costs: list[float] = []
    rounds = 0
    diagnostic = ""

    def predict(plan_traj):
        return predict_for(request, predictor, plan_traj)

    while rounds < config.max_rounds:
        elapsed = time.perf_counter() - t0
        if cap is not None and elapsed >= cap:
            diagnostic = "time cap reached"
            break
        rounds += 1
        previous = best.breakdown.total
        problem = pso.Problem(request.ego, reference, predictions, request.ego_geom,
                              request.other_geoms, request.safety, weights,
                              predict if predictor.interactive else None)
        budget_ms = None if cap is None else (cap - elapsed) * 1000.0
        cfg = replace(swarm, time_budget_ms=budget_ms, delta_max=request.delta_max)
        result = pso.run(problem, cfg, rng)
        for row in result.trace:
            trace.append({"round": rounds, **row})
        if result.trajectory is None:
            diagnostic = result.diagnostic or "swarm produced no trajectory"
            break

        raw = _candidate(request, predictor, result.trajectory, reference, yardstick, weights, tol)
        new_ref, curve = smooth(result.trajectory, request.horizon, request.dt, request.ego_geom,
                                request.road, request.target_lane, tol, request.ego.psi,
                                request.delta_max)
        smoothed = _candidate(request, predictor, track(request, new_ref), new_ref, yardstick,
                              weights, tol)
        for cand in (raw, smoothed):
            if _better(best, cand):
                best = cand
        round_costs.append(best.breakdown.total)

        if best.feasible:
            if not config.refine_until_converged:
                break
            if previous - best.breakdown.total < config.convergence * abs(previous):
                break
        reference = new_ref
        predictions = smoothed.assessment.predictions

    return _result(best, request, "pso", rounds, t0, trace=trace, round_costs=round_costs,
                   diagnostic=diagnostic, tolerance=tol)


def mc_modify_plan(request: PlanRequest, predictor: Predictor, max_mods: int = 12,
                   margin: float = 15.0, seed: int | None = None,
                   weights: CostWeights = CostWeights(), tolerance: float = 0.2) -> PlanResult:
    """Shift the longitudinal target at random until the initial-style plan is safe.

    Modification 0 is the unmodified target; up to ``max_mods`` further
    targets are drawn uniformly within ``margin`` metres of it.  Targets that
    are not ahead of the ego count as failed modifications.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    x_star = request.target[0]
    yardstick = initial_plan(request)
    best = None
    mods = 0
    for k in range(max_mods + 1):
        shift = 0.0 if k == 0 else float(rng.uniform(-margin, margin))
        mods = k
        try:
            ref = plan_to_target(request, x_star + shift)
        except PlanningError:
            continue
        cand = _candidate(request, predictor, track(request, ref), ref, yardstick, weights, tolerance)
        if _better(best, cand):
            best = cand
        if cand.feasible:
            break
    if best is not None and not best.feasible:
        # Never hand out an unsafe trajectory; keep the clearance for diagnosis.
        return PlanResult(None, None, False, 1, time.perf_counter() - t0,
                          best.assessment.clearance, request.horizon, method="mc",
                          modifications=mods, diagnostic="no safe target found")
    return _result(best, request, "mc", 1, t0, modifications=mods, tolerance=tolerance)
