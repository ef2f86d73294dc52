"""Discrete-time kinematic bicycle model.

The slip angle used during a step is computed from the steering angle
applied during that same step, then position, heading and speed are
advanced from the previous-step values.  Speed is clamped at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DT = 0.1


class PropagationError(ValueError):
    """Raised when a rollout is fed non-finite states or controls."""


@dataclass(frozen=True)
class VehicleState:
    x: float  # longitudinal position (m)
    y: float  # lateral position (m)
    psi: float  # inertial heading (rad)
    v: float  # speed (m/s)
    beta: float = 0.0  # slip angle of the last applied step (rad)

    def as_tuple(self):
        return (self.x, self.y, self.psi, self.v, self.beta)

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in self.as_tuple())


@dataclass(frozen=True)
class VehicleGeometry:
    """Axle distances and body half-dimensions (m)."""

    l_f: float = 1.25
    l_r: float = 1.25
    half_length: float = 2.5
    half_width: float = 1.0

    def __post_init__(self):
        if min(self.l_f, self.l_r, self.half_length, self.half_width) <= 0:
            raise ValueError("vehicle geometry values must be strictly positive")
        if self.half_length <= self.half_width:
            raise ValueError("half_length must exceed half_width")

    @property
    def wheelbase(self) -> float:
        return self.l_f + self.l_r


@dataclass(frozen=True)
class ControlBounds:
    delta_max: float = 0.5
    a_max: float = 3.0


@dataclass(frozen=True)
class ControlInput:
    delta: float  # steering angle (rad)
    a: float = 0.0  # acceleration (m/s^2)

    def within(self, bounds: ControlBounds) -> bool:
        return abs(self.delta) <= bounds.delta_max and abs(self.a) <= bounds.a_max


@dataclass
class Trajectory:
    """Time-indexed states sampled every ``dt`` seconds.

    ``steering`` and ``accel`` hold the controls that produced the
    trajectory (one per transition, so ``len(x) - 1`` entries) when it came
    from a rollout; both are ``None`` for purely geometric waypoints.
    """

    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    psi: np.ndarray
    dt: float = DEFAULT_DT
    steering: np.ndarray | None = None
    accel: np.ndarray | None = None
    beta: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.psi = np.asarray(self.psi, dtype=float)
        n = len(self.x)
        if not (len(self.y) == len(self.v) == len(self.psi) == n):
            raise ValueError("trajectory arrays must share one length")

    def __len__(self):
        return len(self.x)

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.x)) * self.dt

    def state(self, k: int) -> VehicleState:
        beta = 0.0 if self.beta is None else float(self.beta[k])
        return VehicleState(float(self.x[k]), float(self.y[k]), float(self.psi[k]),
                            float(self.v[k]), beta)

    def segment(self, start: int, stop: int | None = None) -> "Trajectory":
        """States ``start:stop`` (controls are dropped)."""
        sl = slice(start, stop)
        beta = None if self.beta is None else self.beta[sl]
        return Trajectory(self.x[sl], self.y[sl], self.v[sl], self.psi[sl], self.dt, beta=beta)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))
                    and np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.psi)))


def slip_angle(delta: float, geom: VehicleGeometry) -> float:
    return math.atan(geom.l_r / (geom.l_f + geom.l_r) * math.tan(delta))


def steering_for_slip(beta: float, geom: VehicleGeometry) -> float:
    """Invert :func:`slip_angle`."""
    return math.atan((geom.l_f + geom.l_r) / geom.l_r * math.tan(beta))


def step(state: VehicleState, control: ControlInput, geom: VehicleGeometry,
         dt: float = DEFAULT_DT) -> VehicleState:
    """Advance ``state`` by one time step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not state.is_finite() or not (math.isfinite(control.delta) and math.isfinite(control.a)):
        raise PropagationError(f"non-finite state or control: {state}, {control}")
    beta = slip_angle(control.delta, geom)
    course = state.psi + beta
    x = dt * state.v * math.cos(course) + state.x
    y = dt * state.v * math.sin(course) + state.y
    psi = dt * state.v / geom.l_r * math.sin(beta) + state.psi
    v = max(0.0, dt * control.a + state.v)
    return VehicleState(x, y, psi, v, beta)


def rollout(initial: VehicleState, steering, accel, geom: VehicleGeometry,
            dt: float = DEFAULT_DT) -> Trajectory:
    """Propagate a steering/acceleration sequence from ``initial``.

    ``accel`` may be a scalar (held constant) or a sequence matching
    ``steering``.  Returns ``len(steering) + 1`` states, the first being
    ``initial``.
    """
    steering = np.asarray(steering, dtype=float)
    n = len(steering)
    if n == 0:
        raise ValueError("control sequence must be non-empty")
    accel = np.broadcast_to(np.asarray(accel, dtype=float), (n,))
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not initial.is_finite():
        raise PropagationError(f"non-finite initial state: {initial}")
    if not (np.all(np.isfinite(steering)) and np.all(np.isfinite(accel))):
        raise PropagationError("non-finite control sequence")

    xs = [initial.x]
    ys = [initial.y]
    psis = [initial.psi]
    vs = [initial.v]
    betas = [initial.beta]
    x, y, psi, v = initial.x, initial.y, initial.psi, initial.v
    ratio = geom.l_r / (geom.l_f + geom.l_r)
    l_r = geom.l_r
    steer_list = steering.tolist()
    accel_list = accel.tolist()
    # Same arithmetic as step(), inlined: rollouts dominate planner runtime.
    for k in range(n):
        beta = math.atan(ratio * math.tan(steer_list[k]))
        course = psi + beta
        x = dt * v * math.cos(course) + x
        y = dt * v * math.sin(course) + y
        psi = dt * v / l_r * math.sin(beta) + psi
        v = max(0.0, dt * accel_list[k] + v)
        xs.append(x)
        ys.append(y)
        psis.append(psi)
        vs.append(v)
        betas.append(beta)
    return Trajectory(np.array(xs), np.array(ys), np.array(vs), np.array(psis), dt,
                      steering=steering.copy(), accel=np.array(accel, dtype=float),
                      beta=np.array(betas))
