"""Cubic lateral profiles fitted through trajectory anchors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cost import Reference
from .geometry import Road
from .kinematics import Trajectory, VehicleGeometry


class SmoothingError(ValueError):
    pass


@dataclass(frozen=True)
class CubicCurve:
    """``kappa(l) = b3 l^3 + b2 l^2 + b1 l + b0`` on ``[l_start, l_end]``.

    Internally the polynomial is held in the normalised parameter
    ``u = (l - l_start) / (l_end - l_start)`` for conditioning.  Outside the
    domain the curve is extended flat at its endpoint values.
    """

    unit_coeffs: tuple[float, float, float, float]  # ascending powers of u
    l_start: float
    l_end: float
    residuals: tuple[float, ...] = ()

    @property
    def span(self) -> float:
        return self.l_end - self.l_start

    @property
    def coefficients(self) -> np.ndarray:
        """``(b0, b1, b2, b3)`` in the raw parameter ``l``."""
        c = np.polynomial.Polynomial(self.unit_coeffs)
        shift = np.polynomial.Polynomial([-self.l_start / self.span, 1.0 / self.span])
        raw = c(shift).coef
        return np.pad(raw, (0, 4 - len(raw)))

    def _u(self, l):
        return (np.clip(np.asarray(l, dtype=float), self.l_start, self.l_end) - self.l_start) / self.span

    def __call__(self, l):
        u = self._u(l)
        c0, c1, c2, c3 = self.unit_coeffs
        return c0 + u * (c1 + u * (c2 + u * c3))

    def slope(self, l):
        """d kappa / d l, zero outside the domain."""
        l = np.asarray(l, dtype=float)
        u = self._u(l)
        _, c1, c2, c3 = self.unit_coeffs
        d = (c1 + u * (2 * c2 + u * 3 * c3)) / self.span
        inside = (l >= self.l_start) & (l <= self.l_end)
        return np.where(inside, d, 0.0)


def _basis(u):
    u = np.asarray(u, dtype=float)
    return np.stack([np.ones_like(u), u, u * u, u ** 3], axis=-1)


def _dbasis(u):
    u = np.asarray(u, dtype=float)
    return np.stack([np.zeros_like(u), np.ones_like(u), 2 * u, 3 * u * u], axis=-1)


def fit_cubic(anchors, terminal_heading: float = 0.0, initial_heading: float | None = None) -> CubicCurve:
    """Cubic through the first and last anchors with a fixed terminal slope.

    Interior anchors are matched in the least-squares sense (equality
    constrained).  ``initial_heading`` adds a start-slope constraint, which
    leaves no freedom for interior anchors.
    """
    pts = np.asarray(anchors, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise SmoothingError("anchors must have shape (k, 2) with k >= 2")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(np.diff(x) <= 0):
        raise SmoothingError("anchor x-coordinates must be strictly increasing")
    x0, xf = x[0], x[-1]
    span = xf - x0
    u = (x - x0) / span

    rows = [_basis(0.0), _basis(1.0), _dbasis(1.0) / span]
    rhs = [y[0], y[-1], math.tan(terminal_heading)]
    if initial_heading is not None:
        rows.append(_dbasis(0.0) / span)
        rhs.append(math.tan(initial_heading))
    C = np.array(rows)
    d = np.array(rhs)
    interior = u[1:-1]
    n_free = 4 - len(C)
    if n_free > 0 and len(interior) < n_free:
        raise SmoothingError("not enough anchors to determine the cubic")

    if n_free == 0:
        coeffs = np.linalg.solve(C, d)
    else:
        A = _basis(interior)
        b = y[1:-1]
        kkt = np.zeros((4 + len(C), 4 + len(C)))
        kkt[:4, :4] = 2 * A.T @ A
        kkt[:4, 4:] = C.T
        kkt[4:, :4] = C
        sol = np.linalg.solve(kkt, np.concatenate([2 * A.T @ b, d]))
        coeffs = sol[:4]
    # Re-impose the equality constraints exactly (removes KKT round-off).
    coeffs = coeffs + np.linalg.lstsq(C, d - C @ coeffs, rcond=None)[0]
    res = tuple(float(r) for r in (_basis(interior) @ coeffs - y[1:-1]))
    return CubicCurve(tuple(float(c) for c in coeffs), float(x0), float(xf), res)


def lane_change_cubic(x0: float, y0: float, xf: float, yf: float) -> CubicCurve:
    """Cubic with zero slope at both ends, the classic smooth lane change."""
    return fit_cubic([(x0, y0), (xf, yf)], 0.0, initial_heading=0.0)


def select_waypoints(traj: Trajectory) -> np.ndarray:
    """Indices of up to four anchor points on ``traj``.

    Always the first and last point, plus the interior point with the
    largest lateral rate and the midpoint of the longer remaining side.  A
    trajectory without lateral motion gets two evenly spaced interior
    anchors.
    """
    n = len(traj)
    if n < 4:
        raise SmoothingError("need at least four points to select anchors")
    if np.any(np.diff(traj.x) <= 0):
        raise SmoothingError("trajectory is not monotone in x")
    last = n - 1
    if n == 4:
        return np.arange(4)
    rate = np.abs(traj.y[2:] - traj.y[:-2])  # central difference at 1..n-2
    if rate.max() <= 1e-9:
        return np.array([0, round(last / 3), round(2 * last / 3), last])
    m = 1 + int(np.argmax(rate))
    c = m // 2 if m >= last - m else (m + last) // 2
    if c in (0, m, last):
        c = round(last / 3) if m != round(last / 3) else round(2 * last / 3)
    return np.array(sorted({0, m, c, last}))


def regenerate_reference(curve: CubicCurve, speed_source: Trajectory, n: int, dt: float,
                         geom: VehicleGeometry, road: Road, target_lane: int,
                         psi0: float | None = None, delta_max: float = 0.5) -> Reference:
    """Walk along ``curve`` at the source speeds to rebuild ``n + 1`` waypoints."""
    if len(speed_source) < n + 1:
        raise SmoothingError("speed profile is shorter than the horizon")
    v = np.array(speed_source.v[: n + 1], dtype=float)
    xs = np.empty(n + 1)
    xs[0] = speed_source.x[0]
    for k in range(n):
        heading = math.atan(float(curve.slope(xs[k])))
        xs[k + 1] = xs[k] + v[k] * dt * math.cos(heading)
    ys = np.asarray(curve(xs), dtype=float)
    ys[0] = speed_source.y[0]
    ref = Reference.from_waypoints(xs, ys, v, dt, geom, road, target_lane, psi0, delta_max)
    ref.psi = np.arctan(curve.slope(xs))
    return ref


def max_second_difference(y) -> float:
    """Largest step-to-step change of the lateral increment."""
    y = np.asarray(y, dtype=float)
    return float(np.max(np.abs(np.diff(y, 2)))) if len(y) >= 3 else 0.0


def _fit_segment(traj: Trajectory, end: int, y_c: float) -> CubicCurve:
    seg = traj.segment(0, end + 1)
    anchors = seg.positions[select_waypoints(seg)].copy()
    anchors[-1, 1] = y_c  # the manoeuvre ends on the lane centre
    return fit_cubic(anchors, 0.0)


def smooth(traj: Trajectory, n: int, dt: float, geom: VehicleGeometry, road: Road,
           target_lane: int, tolerance: float = 0.2, psi0: float | None = None,
           delta_max: float = 0.5):
    """Fit the lane-change part of ``traj`` and rebuild a reference from it.

    The fitted segment ends where the trajectory first enters the
    target-lane tolerance band (or at its last point if it never does), and
    the final anchor is moved onto the lane centre; beyond that the
    reference runs straight.  When that fit would bend harder than ``traj``
    itself (larger maximum second difference of the lateral position), the
    segment is lengthened one point at a time until it no longer does.
    Returns ``(reference, curve)``; ``curve`` is None when ``traj`` doubles
    back in x and could not be smoothed, in which case the reference
    follows ``traj`` itself.
    """
    y_c = road.center(target_lane)
    last = len(traj) - 1
    inside = np.flatnonzero(np.abs(traj.y - y_c) <= tolerance)
    start = int(inside[0]) if len(inside) else last
    start = min(max(start, 3), last)
    rough = max_second_difference(traj.y[: n + 1])
    try:
        curve = _fit_segment(traj, start, y_c)
        ref = regenerate_reference(curve, traj, n, dt, geom, road, target_lane, psi0, delta_max)
        end = start
        while end < last and max_second_difference(ref.y) > rough:
            end += 1
            # cheap screen on the source abscissae before a full rebuild
            trial = _fit_segment(traj, end, y_c)
            if end < last and max_second_difference(trial(traj.x[: n + 1])) > rough:
                continue
            curve = trial
            ref = regenerate_reference(curve, traj, n, dt, geom, road, target_lane, psi0, delta_max)
    except SmoothingError:
        ref = Reference.from_waypoints(traj.x[: n + 1], traj.y[: n + 1], traj.v[: n + 1], dt, geom,
                                       road, target_lane, psi0, delta_max)
        return ref, None
    return ref, curve
