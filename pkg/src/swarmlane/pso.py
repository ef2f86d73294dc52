"""Particle swarm search over steering-angle sequences.

Each particle is a full steering sequence over the planning horizon.  The
swarm follows the standard inertia-weight velocity rule with a linearly
decreasing inertia, clamps positions to the steering limit, rolls every
candidate through the bicycle model and scores it with
:func:`swarmlane.cost.evaluate`.  Particles are updated one after another
and the global best is refreshed as soon as any particle improves on it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cost import CostBreakdown, CostError, CostWeights, Reference, evaluate
from .geometry import SafetySpec
from .kinematics import PropagationError, Trajectory, VehicleGeometry, VehicleState, rollout


@dataclass(frozen=True)
class SwarmConfig:
    n_particles: int = 2
    max_iter: int = 40
    w_start: float = 0.9
    w_end: float = 0.4
    c1: float = 2.0
    c2: float = 2.0
    init_position_range: float = 0.15
    init_velocity_range: float = 0.05
    collision_boost: float = 2.0
    seed: int | None = None
    time_budget_ms: float | None = None
    random_per_dimension: bool = False
    predict_every: int = 1  # 0 disables re-querying inside the swarm
    predict_per_particle: bool = False  # condition every evaluation on its own rollout
    delta_max: float = 0.5

    def __post_init__(self):
        if self.n_particles < 1 or self.max_iter < 1:
            raise ValueError("need at least one particle and one iteration")
        if not 0 < self.w_end <= self.w_start:
            raise ValueError("inertia must satisfy 0 < w_end <= w_start")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("acceleration coefficients must be non-negative")
        if self.collision_boost < 1:
            raise ValueError("collision_boost must be >= 1")

    def inertia(self, iteration: int) -> float:
        """Inertia for 1-based ``iteration``, linear from w_start to w_end."""
        if self.max_iter == 1:
            return self.w_start
        frac = (iteration - 1) / (self.max_iter - 1)
        return self.w_start - (self.w_start - self.w_end) * frac


@dataclass
class Problem:
    """Everything needed to score one steering sequence."""

    initial: VehicleState
    reference: Reference
    predictions: np.ndarray
    ego_geom: VehicleGeometry
    other_geoms: object
    safety: SafetySpec = field(default_factory=SafetySpec)
    weights: CostWeights = field(default_factory=CostWeights)
    predict: Callable[[Trajectory], np.ndarray] | None = None  # ego plan -> predictions
    per_particle: bool = False

    def score(self, steering) -> tuple[float, CostBreakdown | None, Trajectory | None]:
        try:
            traj = rollout(self.initial, steering, self.reference.accel, self.ego_geom,
                           self.reference.dt)
            preds = self.predictions
            if self.per_particle and self.predict is not None:
                preds = self.predict(traj)
            bd = evaluate(traj, self.reference, preds, self.ego_geom, self.other_geoms,
                          self.safety, self.weights, steering)
        except (PropagationError, CostError):
            return math.inf, None, None
        return bd.total, bd, traj


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_cost: float = math.inf
    cost: float = math.inf
    breakdown: CostBreakdown | None = None
    trajectory: Trajectory | None = None
    best_breakdown: CostBreakdown | None = None
    best_trajectory: Trajectory | None = None

    @property
    def collided(self) -> bool:
        return self.breakdown is None or self.breakdown.collision


@dataclass
class Swarm:
    particles: list[Particle]
    rng: np.random.Generator
    gbest_position: np.ndarray | None = None
    gbest_cost: float = math.inf
    gbest_breakdown: CostBreakdown | None = None
    gbest_trajectory: Trajectory | None = None
    gbest_predictions: np.ndarray | None = None
    iteration: int = 0


@dataclass
class SwarmResult:
    steering: np.ndarray
    trajectory: Trajectory | None
    breakdown: CostBreakdown | None
    iterations: int
    wall_time: float
    feasible: bool
    predictions: np.ndarray | None
    trace: list[dict] = field(default_factory=list)
    diagnostic: str = ""

    @property
    def cost(self) -> float:
        return math.inf if self.breakdown is None else self.breakdown.total


def initialize_swarm(reference: Reference, config: SwarmConfig,
                     rng: np.random.Generator | None = None) -> Swarm:
    """Uniform positions around the reference steering, small random velocities."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = reference.horizon
    particles = []
    for _ in range(config.n_particles):
        r = config.init_position_range
        pos = np.clip(reference.delta + rng.uniform(-r, r, n), -config.delta_max, config.delta_max)
        vel = rng.uniform(-config.init_velocity_range, config.init_velocity_range, n)
        particles.append(Particle(pos, vel, pos.copy()))
    return Swarm(particles, rng)


def evaluate_initial(swarm: Swarm, problem: Problem) -> Swarm:
    """Score the initial positions and pick the first global best."""
    for p in swarm.particles:
        p.cost, p.breakdown, p.trajectory = problem.score(p.position)
        p.best_cost, p.best_breakdown, p.best_trajectory = p.cost, p.breakdown, p.trajectory
        if p.best_cost < swarm.gbest_cost or swarm.gbest_position is None:
            _take_global(swarm, p, problem)
    return swarm


def _take_global(swarm: Swarm, p: Particle, problem: Problem):
    swarm.gbest_position = p.best_position.copy()
    swarm.gbest_cost = p.best_cost
    swarm.gbest_breakdown = p.best_breakdown
    swarm.gbest_trajectory = p.best_trajectory
    if problem.per_particle and problem.predict is not None and p.best_trajectory is not None:
        swarm.gbest_predictions = problem.predict(p.best_trajectory)
    else:
        swarm.gbest_predictions = problem.predictions


def update_velocity(particle: Particle, global_best: np.ndarray, inertia: float,
                    config: SwarmConfig, rng: np.random.Generator) -> np.ndarray:
    shape = particle.position.shape if config.random_per_dimension else ()
    r1 = rng.uniform(0.0, 1.0, shape)
    r2 = rng.uniform(0.0, 1.0, shape)
    v = (inertia * particle.velocity
         + config.c1 * r1 * (particle.best_position - particle.position)
         + config.c2 * r2 * (global_best - particle.position))
    if particle.collided:
        v = v * config.collision_boost
    return v


def step_swarm(swarm: Swarm, problem: Problem, config: SwarmConfig) -> Swarm:
    """One iteration over all particles, in index order."""
    swarm.iteration += 1
    w = config.inertia(swarm.iteration)
    for p in swarm.particles:
        p.velocity = update_velocity(p, swarm.gbest_position, w, config, swarm.rng)
        p.position = np.clip(p.position + p.velocity, -config.delta_max, config.delta_max)
        p.cost, p.breakdown, p.trajectory = problem.score(p.position)
        if p.cost < p.best_cost:
            p.best_position = p.position.copy()
            p.best_cost, p.best_breakdown, p.best_trajectory = p.cost, p.breakdown, p.trajectory
            if p.best_cost < swarm.gbest_cost:
                _take_global(swarm, p, problem)
    return swarm


def _trace_row(swarm: Swarm, inertia: float | None) -> dict:
    return {"iteration": swarm.iteration,
            "costs": [p.cost for p in swarm.particles],
            "gbest": swarm.gbest_cost,
            "inertia": inertia}


def run(problem: Problem, config: SwarmConfig, rng: np.random.Generator | None = None,
        record_trace: bool = True) -> SwarmResult:
    """Iterate until ``max_iter`` or the time budget runs out."""
    t0 = time.perf_counter()
    budget = None if config.time_budget_ms is None else config.time_budget_ms / 1000.0
    problem.per_particle = config.predict_per_particle
    swarm = initialize_swarm(problem.reference, config, rng)
    evaluate_initial(swarm, problem)
    trace = [_trace_row(swarm, None)] if record_trace else []

    while swarm.iteration < config.max_iter:
        if budget is not None and time.perf_counter() - t0 >= budget:
            break
        if (problem.predict is not None and config.predict_every > 0 and not problem.per_particle
                and swarm.iteration % config.predict_every == 0
                and swarm.gbest_trajectory is not None):
            problem.predictions = problem.predict(swarm.gbest_trajectory)
        step_swarm(swarm, problem, config)
        if record_trace:
            trace.append(_trace_row(swarm, config.inertia(swarm.iteration)))

    elapsed = time.perf_counter() - t0
    bd = swarm.gbest_breakdown
    diagnostic = ""
    if swarm.iteration == 0:
        diagnostic = "time budget exhausted before the first iteration"
    elif bd is None:
        diagnostic = "no particle could be evaluated"
    feasible = bool(swarm.iteration > 0 and bd is not None and not bd.collision
                    and not bd.lane_violation)
    return SwarmResult(swarm.gbest_position, swarm.gbest_trajectory, bd, swarm.iteration, elapsed,
                       feasible, swarm.gbest_predictions, trace, diagnostic)
