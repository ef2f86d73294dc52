"""Predictors of surrounding-vehicle positions.

Every predictor maps an observation array of shape ``(n_obs, n_veh, 2)``
(oldest row first) to a prediction array of shape ``(n_pred, n_veh, 2)``
whose row ``t`` is the position ``t + 1`` steps after the last
observation.  The optional ``ego_plan`` trajectory starts at the time of the
last observation, so ``ego_plan`` state ``t + 1`` is simultaneous with
prediction row ``t``.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import Road
from .kinematics import DEFAULT_DT, Trajectory, VehicleGeometry

N_OBS = 8
N_PRED = 12


class PredictionError(ValueError):
    pass


def check_observations(obs, min_steps: int = 1) -> np.ndarray:
    obs = np.asarray(obs, dtype=float)
    if obs.ndim != 3 or obs.shape[-1] != 2:
        raise PredictionError(f"observations must have shape (n_obs, n_veh, 2), got {obs.shape}")
    if obs.shape[0] < min_steps:
        raise PredictionError(f"need at least {min_steps} observed steps, got {obs.shape[0]}")
    if not np.all(np.isfinite(obs)):
        raise PredictionError("observations contain non-finite values")
    return obs


class Predictor(ABC):
    """Functional interface ``observations -> predicted positions``."""

    n_pred: int = N_PRED
    dt: float = DEFAULT_DT
    interactive: bool = False

    @abstractmethod
    def predict(self, obs, ego_plan: Trajectory | None = None) -> np.ndarray:
        ...

    def __call__(self, obs, ego_plan=None):
        return self.predict(obs, ego_plan)


class ConstantVelocityPredictor(Predictor):
    """Straight-line extrapolation of the last observed displacement."""

    def __init__(self, n_pred: int = N_PRED, dt: float = DEFAULT_DT):
        self.n_pred = n_pred
        self.dt = dt

    def predict(self, obs, ego_plan=None):
        obs = check_observations(obs, min_steps=2)
        step = obs[-1] - obs[-2]
        k = np.arange(1, self.n_pred + 1, dtype=float)[:, None, None]
        return obs[-1][None] + k * step[None]


class CallablePredictor(Predictor):
    """Adapter for an external model, e.g. a trained network.

    ``fn(obs)`` or ``fn(obs, ego_plan)`` (when ``interactive``) must return
    an array shaped ``(n_pred, n_veh, 2)``.
    """

    def __init__(self, fn: Callable, n_pred: int = N_PRED, dt: float = DEFAULT_DT,
                 interactive: bool = False):
        self.fn = fn
        self.n_pred = n_pred
        self.dt = dt
        self.interactive = interactive

    def predict(self, obs, ego_plan=None):
        obs = check_observations(obs)
        out = self.fn(obs, ego_plan) if self.interactive else self.fn(obs)
        out = np.asarray(out, dtype=float)
        if out.shape != (self.n_pred, obs.shape[1], 2):
            raise PredictionError(f"wrapped model returned shape {out.shape}, "
                                  f"expected {(self.n_pred, obs.shape[1], 2)}")
        return out


@dataclass(frozen=True)
class IDMParams:
    v_desired: float = 15.0
    time_headway: float = 1.0
    min_gap: float = 2.0
    a_max: float = 1.5
    b_comfort: float = 2.0
    exponent: float = 4.0

    def acceleration(self, v: float, gap: float | None = None, v_lead: float | None = None) -> float:
        free = 1.0 - (v / self.v_desired) ** self.exponent
        if gap is None:
            return self.a_max * free
        s_star = self.min_gap + max(
            0.0, v * self.time_headway + v * (v - v_lead) / (2.0 * math.sqrt(self.a_max * self.b_comfort)))
        gap = max(gap, 1e-3)
        return self.a_max * (free - (s_star / gap) ** 2)


@dataclass(frozen=True)
class MOBILParams:
    politeness: float = 0.3
    threshold: float = 0.1
    b_safe: float = 3.0
    enabled: bool = True


def idm_step(x: float, v: float, a: float, dt: float) -> tuple[float, float]:
    """Semi-implicit Euler with non-negative speed."""
    v_new = max(0.0, v + a * dt)
    return x + v_new * dt, v_new


@dataclass
class _Car:
    x: float
    y: float
    v: float
    lane: int
    half_length: float
    is_ego: bool = False
    lanes: frozenset = frozenset()  # lanes the ego body reaches into


class IDMMobilPredictor(Predictor):
    """Car-following and lane-change rollout of the observed vehicles.

    Surrounding vehicles follow IDM behind their current leader and decide
    lane changes with MOBIL.  The ego plan takes part as a non-reactive road
    user: it becomes a leader (and a potential new follower) of vehicles in
    any lane its body reaches into.
    """

    interactive = True

    def __init__(self, road: Road, idm: IDMParams = IDMParams(), mobil: MOBILParams = MOBILParams(),
                 n_pred: int = N_PRED, dt: float = DEFAULT_DT,
                 geoms: Sequence[VehicleGeometry] | VehicleGeometry = VehicleGeometry(),
                 ego_geom: VehicleGeometry = VehicleGeometry(),
                 lateral_speed: float = 1.5):
        self.road = road
        self.idm = idm
        self.mobil = mobil
        self.n_pred = n_pred
        self.dt = dt
        self.geoms = geoms
        self.ego_geom = ego_geom
        self.lateral_speed = lateral_speed

    def _geom(self, j: int) -> VehicleGeometry:
        if isinstance(self.geoms, VehicleGeometry):
            return self.geoms
        return self.geoms[j]

    def _ego_lanes(self, y: float) -> frozenset[int]:
        reach = self.road.lane_width / 2 + self.ego_geom.half_width
        return frozenset(i for i in range(self.road.n_lanes) if abs(y - self.road.center(i)) < reach)

    def _ego_at(self, plan: Trajectory, k: int) -> tuple[float, float, float]:
        n = len(plan)
        if k < n:
            return float(plan.x[k]), float(plan.y[k]), float(plan.v[k])
        # past the end of the plan: continue at the last velocity
        if n >= 2:
            vx = (plan.x[-1] - plan.x[-2]) / plan.dt
            vy = (plan.y[-1] - plan.y[-2]) / plan.dt
        else:
            vx, vy = float(plan.v[-1]), 0.0
        extra = (k - n + 1) * plan.dt
        return float(plan.x[-1] + vx * extra), float(plan.y[-1] + vy * extra), float(plan.v[-1])

    def initial_cars(self, obs) -> list[_Car]:
        obs = check_observations(obs, min_steps=2)
        cars = []
        for j in range(obs.shape[1]):
            x, y = obs[-1, j]
            lane = self.road.lane_of(y)
            if lane is None:
                raise PredictionError(f"vehicle {j} at y={y:.3f} is not in any lane")
            v = max(0.0, (obs[-1, j, 0] - obs[-2, j, 0]) / self.dt)
            cars.append(_Car(float(x), float(y), v, lane, self._geom(j).half_length))
        return cars

    def _neighbours(self, cars: list[_Car], me: _Car, lane: int, ego: _Car | None):
        """Closest leader and follower of ``me`` within ``lane``."""
        lead = follow = None
        pool = [c for c in cars if c is not me and c.lane == lane]
        if ego is not None and lane in ego.lanes:
            pool.append(ego)
        for c in pool:
            if c.x >= me.x:
                if lead is None or c.x < lead.x:
                    lead = c
            elif follow is None or c.x > follow.x:
                follow = c
        return lead, follow

    def _accel(self, follower: _Car, leader: _Car | None) -> float:
        if leader is None:
            return self.idm.acceleration(follower.v)
        gap = leader.x - follower.x - leader.half_length - follower.half_length
        return self.idm.acceleration(follower.v, gap, leader.v)

    def _mobil_target(self, cars, me: _Car, ego) -> int | None:
        if abs(me.y - self.road.center(me.lane)) > 0.1:
            return None  # still completing a manoeuvre
        old_lead, old_follow = self._neighbours(cars, me, me.lane, ego)
        a_me = self._accel(me, old_lead)
        best, best_gain = None, self.mobil.threshold
        for lane in (me.lane - 1, me.lane + 1):
            if not 0 <= lane < self.road.n_lanes:
                continue
            new_lead, new_follow = self._neighbours(cars, me, lane, ego)
            if new_lead is not None and new_lead.x - me.x < new_lead.half_length + me.half_length:
                continue
            if new_follow is not None:
                if me.x - new_follow.x < new_follow.half_length + me.half_length:
                    continue
                a_nf_after = self._accel(new_follow, me)
                if a_nf_after < -self.mobil.b_safe:
                    continue
                d_new = 0.0 if new_follow.is_ego else a_nf_after - self._accel(new_follow, new_lead)
            else:
                d_new = 0.0
            d_old = 0.0
            if old_follow is not None and not old_follow.is_ego:
                d_old = self._accel(old_follow, old_lead) - self._accel(old_follow, me)
            gain = self._accel(me, new_lead) - a_me + self.mobil.politeness * (d_new + d_old)
            if gain > best_gain:
                best, best_gain = lane, gain
        return best

    def predict(self, obs, ego_plan: Trajectory | None = None):
        cars = self.initial_cars(obs)
        dt = self.dt
        centers = [self.road.center(i) for i in range(self.road.n_lanes)]
        out = np.empty((self.n_pred, len(cars), 2))
        for t in range(self.n_pred):
            ego = None
            if ego_plan is not None:
                ex, ey, ev = self._ego_at(ego_plan, t)
                ego = _Car(ex, ey, ev, -1, self.ego_geom.half_length, True, self._ego_lanes(ey))
            if self.mobil.enabled:
                targets = [self._mobil_target(cars, c, ego) for c in cars]
            else:
                targets = [None] * len(cars)
            accels = [self._accel(c, self._neighbours(cars, c, c.lane, ego)[0]) for c in cars]
            for c, a, lane in zip(cars, accels, targets):
                if lane is not None:
                    c.lane = lane
                c.x, c.v = idm_step(c.x, c.v, a, dt)
                dy = centers[c.lane] - c.y
                c.y += math.copysign(min(abs(dy), self.lateral_speed * dt), dy)
            if cars:
                out[t] = [(c.x, c.y) for c in cars]
        return out


def predict_horizon(predictor: Predictor, obs, horizon: int,
                    ego_plan: Trajectory | None = None) -> np.ndarray:
    """Chain predictor calls until ``horizon`` future rows are available.

    Each call sees the most recent ``n_obs`` rows (observed or already
    predicted) and the ego plan shifted to the same time origin.
    """
    obs = check_observations(obs)
    n_obs = obs.shape[0]
    history = obs
    chunks = []
    done = 0
    while done < horizon:
        plan = None
        if ego_plan is not None and predictor.interactive:
            plan = ego_plan.segment(min(done, len(ego_plan) - 1))
        chunk = np.asarray(predictor.predict(history[-n_obs:], plan), dtype=float)
        if chunk.shape[1:] != obs.shape[1:] or len(chunk) == 0:
            raise PredictionError(f"predictor returned shape {chunk.shape}")
        chunks.append(chunk)
        done += len(chunk)
        history = np.concatenate([history, chunk], axis=0)
    return np.concatenate(chunks, axis=0)[:horizon]


def interactive_gap_response(without_ego, with_ego) -> np.ndarray:
    """Per-vehicle displacement caused by conditioning on the ego plan."""
    a = np.asarray(without_ego, dtype=float)
    b = np.asarray(with_ego, dtype=float)
    if a.shape != b.shape:
        raise PredictionError(f"prediction shapes differ: {a.shape} vs {b.shape}")
    return b - a


@dataclass
class PredictorSpec:
    """Predictor selection as read from a scenario file."""

    kind: str = "idm"  # "idm" | "cv"
    idm: IDMParams = field(default_factory=IDMParams)
    mobil: MOBILParams = field(default_factory=MOBILParams)
    n_pred: int = N_PRED
    lateral_speed: float = 1.5

    def build(self, road: Road, dt: float, geoms, ego_geom: VehicleGeometry) -> Predictor:
        if self.kind == "cv":
            return ConstantVelocityPredictor(self.n_pred, dt)
        if self.kind == "idm":
            return IDMMobilPredictor(road, self.idm, self.mobil, self.n_pred, dt, geoms, ego_geom,
                                     self.lateral_speed)
        raise ValueError(f"unknown predictor kind {self.kind!r}")
