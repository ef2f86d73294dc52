"""Fitness of a rolled-out ego trajectory.

Seven terms are summed: reference tracking, heading tracking, collision
penalty, acceleration and jerk smoothness, steering effort and lane
alignment.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import Road, SafetySpec, clearance_series, estimate_headings
from .kinematics import Trajectory, VehicleGeometry, slip_angle, steering_for_slip

TERMS = ("f_ref", "f_head", "f_col", "f_a", "f_j", "f_s", "f_la")


class CostError(ValueError):
    pass


@dataclass(frozen=True)
class CostWeights:
    w_ref: float = 1.0
    w_head: float = 10.0
    w_col: float = 1.0
    w_a: float = 0.1
    w_j: float = 0.05
    w_s: float = 1.0
    w_la: float = 50.0
    collision_penalty: float = 1e6
    lane_violation_penalty: float = 1e4
    head_cost: str = "squared"  # or "signed"

    def __post_init__(self):
        for name in ("w_ref", "w_head", "w_col", "w_a", "w_j", "w_s", "w_la",
                     "collision_penalty", "lane_violation_penalty"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.head_cost not in ("squared", "signed"):
            raise ValueError("head_cost must be 'squared' or 'signed'")


@dataclass
class CostBreakdown:
    f_ref: float
    f_head: float
    f_col: float
    f_a: float
    f_j: float
    f_s: float
    f_la: float
    min_clearance: float = math.inf
    lane_violation: bool = False
    total: float = field(init=False)

    def __post_init__(self):
        self.total = (self.f_ref + self.f_head + self.f_col + self.f_a + self.f_j
                      + self.f_s + self.f_la)

    @property
    def collision(self) -> bool:
        return self.f_col > 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Reference:
    """Reference waypoints for steps ``0..N`` and the controls that track them.

    Index 0 is the ego's current position.  ``delta`` and ``accel`` have
    ``N`` entries, one per transition.
    """

    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    psi: np.ndarray
    delta: np.ndarray
    accel: np.ndarray
    y_c: float
    target_bounds: tuple[float, float]
    road_bounds: tuple[float, float]
    dt: float

    def __post_init__(self):
        n = len(self.x)
        if not (len(self.y) == len(self.v) == len(self.psi) == n):
            raise CostError("reference waypoint arrays must share one length")
        if len(self.delta) != n - 1 or len(self.accel) != n - 1:
            raise CostError("reference controls must have one entry per transition")
        lo, hi = self.target_bounds
        if not lo <= self.y_c <= hi:
            raise CostError("lane centre must lie within the target lane")

    @property
    def horizon(self) -> int:
        return len(self.x) - 1

    def as_trajectory(self) -> Trajectory:
        return Trajectory(self.x, self.y, self.v, self.psi, self.dt)

    @classmethod
    def from_waypoints(cls, x, y, v, dt, geom: VehicleGeometry, road: Road, target_lane: int,
                       psi0: float | None = None, delta_max: float = 0.5) -> "Reference":
        accel, psi, delta = reference_controls_from_waypoints(x, y, v, dt, geom, psi0, delta_max)
        return cls(np.asarray(x, float), np.asarray(y, float), np.asarray(v, float), psi, delta,
                   accel, road.center(target_lane), road.lane_bounds(target_lane), road.bounds, dt)


def reference_controls_from_waypoints(x, y, v, dt, geom: VehicleGeometry, psi0: float | None = None,
                                      delta_max: float = 0.5):
    """Acceleration, heading and steering sequences implied by waypoints.

    Headings are finite-difference directions of travel.  Steering is found
    by inverting the bicycle model step by step: the slip angle is whatever
    turns the current vehicle heading onto the next travel direction.
    Returns ``(accel[N], psi[N+1], delta[N])``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    if len(x) < 3:
        raise CostError("need at least three waypoints")
    if not (len(y) == len(v) == len(x)):
        raise CostError("waypoint arrays must share one length")
    psi_bar = estimate_headings(np.column_stack([x, y]))
    accel = np.diff(v) / dt
    beta_max = abs(slip_angle(delta_max, geom))
    heading = psi_bar[0] if psi0 is None else float(psi0)
    delta = np.empty(len(x) - 1)
    for k in range(len(x) - 1):
        beta = math.remainder(psi_bar[k] - heading, 2 * math.pi)
        beta = min(max(beta, -beta_max), beta_max)
        delta[k] = steering_for_slip(beta, geom)
        heading = dt * v[k] / geom.l_r * math.sin(beta) + heading
    return accel, psi_bar, delta


def second_difference_cost(p: np.ndarray, dt: float) -> float:
    d2 = (p[2:] - 2 * p[1:-1] + p[:-2]) / dt ** 2
    return float(np.dot(d2, d2))


def third_difference_cost(p: np.ndarray, dt: float) -> float:
    d3 = (-p[3:] + 3 * p[2:-1] - 3 * p[1:-2] + p[:-3]) / dt ** 3
    return float(np.dot(d3, d3))


def lane_violation(y: np.ndarray, reference: Reference, margin: float = 0.0) -> bool:
    """A trajectory point outside the road, or past the far edge of the target lane.

    ``margin`` shrinks the allowed band on both checks (0 tests the centre points).
    """
    lo, hi = reference.road_bounds
    if np.any(y - margin < lo) or np.any(y + margin > hi):
        return True
    t_lo, t_hi = reference.target_bounds
    if reference.y[0] >= reference.y_c:
        return bool(np.any(y - margin < t_lo))
    return bool(np.any(y + margin > t_hi))


def evaluate(traj: Trajectory, reference: Reference, predictions, ego_geom: VehicleGeometry,
             other_geoms, spec: SafetySpec, weights: CostWeights = CostWeights(),
             steering=None) -> CostBreakdown:
    """Score a rollout (states ``0..N``) against a reference of horizon ``N``.

    Only states ``1..N`` are scored.  Row ``t`` of ``predictions`` is
    simultaneous with state ``t + 1``.
    """
    n = reference.horizon
    if len(traj) != n + 1:
        raise CostError(f"trajectory has {len(traj)} states, expected {n + 1}")
    steering = traj.steering if steering is None else np.asarray(steering, dtype=float)
    if steering is None or len(steering) != n:
        raise CostError("steering sequence must have one entry per step")
    if not traj.is_finite():
        raise CostError("trajectory contains non-finite values")

    x, y, psi = traj.x[1:], traj.y[1:], traj.psi[1:]
    dt = reference.dt
    ex = x - reference.x[1:]
    ey = y - reference.y[1:]
    f_ref = weights.w_ref * float(np.dot(ex, ex) + np.dot(ey, ey))
    dpsi = psi - reference.psi[1:]
    if weights.head_cost == "squared":
        f_head = weights.w_head * float(np.dot(dpsi, dpsi))
    else:
        f_head = weights.w_head * float(np.sum(dpsi))
    f_a = weights.w_a * (second_difference_cost(x, dt) + second_difference_cost(y, dt))
    f_j = weights.w_j * (third_difference_cost(x, dt) + third_difference_cost(y, dt))
    f_s = weights.w_s * float(np.dot(steering, steering))
    violated = lane_violation(y, reference)
    f_la = weights.w_la * abs(float(y[-1]) - reference.y_c)
    if violated:
        f_la += weights.lane_violation_penalty

    pred = np.asarray(predictions, dtype=float)
    if pred.size and pred.shape[1] > 0:
        clearance = float(clearance_series(x, y, psi, pred, ego_geom, other_geoms).min())
    else:
        clearance = math.inf
    f_col = weights.w_col * weights.collision_penalty if clearance < spec.epsilon else 0.0
    return CostBreakdown(f_ref, f_head, f_col, f_a, f_j, f_s, f_la, clearance, violated)
