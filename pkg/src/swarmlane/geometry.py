"""Three-circle vehicle footprints and inter-vehicle clearance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .kinematics import Trajectory, VehicleGeometry

CIRCLE_OFFSETS = (-1.0, 0.0, 1.0)


@dataclass(frozen=True)
class Footprint:
    """A vehicle body approximated by three equal circles along its heading."""

    x: float
    y: float
    heading: float
    offset: float  # D = half_length - half_width
    radius: float  # half_width

    def __post_init__(self):
        if self.offset < 0:
            raise ValueError("circle offset must be non-negative")

    @classmethod
    def of(cls, x, y, heading, geom: VehicleGeometry) -> "Footprint":
        return cls(float(x), float(y), float(heading),
                   geom.half_length - geom.half_width, geom.half_width)

    def circle_centers(self) -> np.ndarray:
        p = np.asarray(CIRCLE_OFFSETS)
        return np.column_stack([self.x + p * self.offset * np.cos(self.heading),
                                self.y + p * self.offset * np.sin(self.heading)])


@dataclass(frozen=True)
class SafetySpec:
    epsilon: float = 2.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("safety buffer must be non-negative")


@dataclass(frozen=True)
class Road:
    """Straight parallel lanes along +x; lane 0 is the bottom lane."""

    lane_width: float = 3.5
    n_lanes: int = 2
    y_min: float = -1.75  # lower edge of lane 0

    def center(self, lane: int) -> float:
        if not 0 <= lane < self.n_lanes:
            raise ValueError(f"no lane {lane} on a {self.n_lanes}-lane road")
        return self.y_min + (lane + 0.5) * self.lane_width

    def lane_bounds(self, lane: int) -> tuple[float, float]:
        c = self.center(lane)
        return c - self.lane_width / 2, c + self.lane_width / 2

    @property
    def bounds(self) -> tuple[float, float]:
        return self.y_min, self.y_min + self.n_lanes * self.lane_width

    def lane_of(self, y: float) -> int | None:
        """Index of the lane containing ``y``, or None when off the road."""
        lo, hi = self.bounds
        if not lo <= y <= hi:
            return None
        return min(int((y - lo) // self.lane_width), self.n_lanes - 1)


class Clearance(NamedTuple):
    distance: float
    step: int  # index into the ego trajectory, -1 when there is nothing to check
    vehicle: int


def pairwise_distance(ego: Footprint, other: Footprint) -> float:
    """Smallest circle-to-circle gap between two footprints (negative on overlap)."""
    ce, se = math.cos(ego.heading), math.sin(ego.heading)
    co, so = math.cos(other.heading), math.sin(other.heading)
    best = math.inf
    for p in CIRCLE_OFFSETS:
        ax = ego.x + p * ego.offset * ce
        ay = ego.y + p * ego.offset * se
        for q in CIRCLE_OFFSETS:
            dx = ax - (other.x + q * other.offset * co)
            dy = ay - (other.y + q * other.offset * so)
            best = min(best, math.sqrt(dx * dx + dy * dy))
    return best - (ego.radius + other.radius)


def is_safe(clearance: float, spec: SafetySpec) -> bool:
    return clearance >= spec.epsilon


def estimate_headings(points, fallback: float = 0.0) -> np.ndarray:
    """Headings from forward differences of consecutive positions.

    The last point repeats the previous heading.  Coincident neighbours keep
    the heading before them (``fallback`` at the very start).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    if len(pts) < 2:
        raise ValueError("need at least two points to estimate headings")
    d = np.diff(pts, axis=0)
    raw = np.arctan2(d[:, 1], d[:, 0])
    moving = np.hypot(d[:, 0], d[:, 1]) > 1e-12
    if moving.all():
        return np.append(raw, raw[-1])
    out = np.empty(len(pts))
    prev = fallback
    for i in range(len(d)):
        if moving[i]:
            prev = raw[i]
        out[i] = prev
    out[-1] = out[-2]
    return out


def _headings_per_vehicle(pred: np.ndarray) -> np.ndarray:
    # pred: (T, M, 2) -> (T, M)
    if len(pred) < 2:
        return np.zeros(pred.shape[:2])
    return np.column_stack([estimate_headings(pred[:, j, :]) for j in range(pred.shape[1])])


def pad_predictions(pred: np.ndarray, length: int) -> np.ndarray:
    """Truncate, or extend by holding the last predicted position."""
    pred = np.asarray(pred, dtype=float)
    if len(pred) >= length:
        return pred[:length]
    if len(pred) == 0:
        raise ValueError("cannot pad an empty prediction")
    tail = np.repeat(pred[-1:], length - len(pred), axis=0)
    return np.concatenate([pred, tail], axis=0)


def clearance_series(x, y, psi, predictions, ego_geom: VehicleGeometry,
                     other_geoms: Sequence[VehicleGeometry] | VehicleGeometry,
                     other_headings=None) -> np.ndarray:
    """Three-circle clearance for every (step, vehicle), shape ``(T, M)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    psi = np.asarray(psi, dtype=float)
    T = len(x)
    pred = pad_predictions(predictions, T)
    M = pred.shape[1]
    if isinstance(other_geoms, VehicleGeometry):
        other_geoms = [other_geoms] * M
    if len(other_geoms) != M:
        raise ValueError("one geometry per predicted vehicle is required")
    if other_headings is None:
        hdg = _headings_per_vehicle(pred)
    else:
        hdg = pad_predictions(np.asarray(other_headings, dtype=float)[..., None], T)[..., 0]

    p = np.asarray(CIRCLE_OFFSETS)
    d_ego = ego_geom.half_length - ego_geom.half_width
    ex = x[:, None] + p[None, :] * d_ego * np.cos(psi)[:, None]  # (T, 3)
    ey = y[:, None] + p[None, :] * d_ego * np.sin(psi)[:, None]
    d_oth = np.array([g.half_length - g.half_width for g in other_geoms])  # (M,)
    r_oth = np.array([g.half_width for g in other_geoms])
    ox = pred[:, :, 0, None] + p * (d_oth[:, None] * np.cos(hdg)[..., None])  # (T, M, 3)
    oy = pred[:, :, 1, None] + p * (d_oth[:, None] * np.sin(hdg)[..., None])
    dx = ex[:, None, :, None] - ox[:, :, None, :]  # (T, M, 3, 3)
    dy = ey[:, None, :, None] - oy[:, :, None, :]
    centre = np.sqrt(dx * dx + dy * dy).min(axis=(2, 3))
    return centre - (ego_geom.half_width + r_oth)[None, :]


def min_clearance(ego: Trajectory, predictions, ego_geom: VehicleGeometry,
                  other_geoms: Sequence[VehicleGeometry] | VehicleGeometry,
                  other_headings=None) -> Clearance:
    """Minimum clearance between an ego trajectory and predicted vehicles.

    Row ``t`` of ``predictions`` (shape ``(T, M, 2)``) is compared with state
    ``t`` of ``ego``.  Shorter predictions are padded by holding their last
    position.  Ego headings come from the trajectory itself.
    """
    if len(ego) == 0:
        raise ValueError("ego trajectory is empty")
    pred = np.asarray(predictions, dtype=float)
    if pred.ndim != 3 or pred.shape[-1] != 2:
        raise ValueError("predictions must have shape (T, M, 2)")
    if pred.shape[1] == 0:
        return Clearance(float("inf"), -1, -1)
    series = clearance_series(ego.x, ego.y, ego.psi, pred, ego_geom, other_geoms,
                              other_headings)
    flat = int(np.argmin(series))
    t, j = divmod(flat, series.shape[1])
    return Clearance(float(series[t, j]), t, j)
