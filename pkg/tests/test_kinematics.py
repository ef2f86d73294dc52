import math

import numpy as np
import pytest

from oracles import bicycle_step
from swarmlane.kinematics import (ControlBounds, ControlInput, PropagationError, Trajectory,
                                  VehicleGeometry, VehicleState, rollout, slip_angle, step,
                                  steering_for_slip)

GEOM = VehicleGeometry()


def test_zero_control_is_straight_line():
    s = step(VehicleState(0, 0, 0, 10), ControlInput(0.0, 0.0), GEOM, 0.1)
    assert (s.x, s.y, s.psi, s.v) == (1.0, 0.0, 0.0, 10.0)


def test_frozen_single_step():
    # values from the complex-arithmetic oracle
    s = step(VehicleState(0, 0, 0, 10), ControlInput(0.1, 1.0), GEOM, 0.1)
    assert s.x == pytest.approx(0.9987439895098162, abs=1e-12)
    assert s.y == pytest.approx(0.05010432534239102, abs=1e-12)
    assert s.psi == pytest.approx(0.040083460273912824, abs=1e-12)
    assert s.v == pytest.approx(10.1, abs=1e-12)


def test_speed_never_negative():
    s = step(VehicleState(0, 0, 0, 0.1), ControlInput(0.0, -3.0), GEOM, 0.1)
    assert s.v == 0.0


def test_oracle_1000_random_pairs():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        x, y = rng.uniform(-100, 100, 2)
        psi = rng.uniform(-math.pi, math.pi)
        v = rng.uniform(0, 30)
        delta = rng.uniform(-0.5, 0.5)
        a = rng.uniform(-3, 3)
        l_f, l_r = rng.uniform(0.8, 2.0, 2)
        geom = VehicleGeometry(l_f, l_r, 2.5, 1.0)
        got = step(VehicleState(x, y, psi, v), ControlInput(delta, a), geom, 0.1)
        want = bicycle_step(x, y, psi, v, delta, a, l_f, l_r, 0.1)
        worst = max(worst, max(abs(g - w) for g, w in zip((got.x, got.y, got.psi, got.v), want)))
    assert worst <= 1e-12


def test_rollout_matches_repeated_step():
    rng = np.random.default_rng(3)
    steer = rng.uniform(-0.5, 0.5, 30)
    acc = rng.uniform(-3, 3, 30)
    tr = rollout(VehicleState(1, 2, 0.3, 8), steer, acc, GEOM, 0.1)
    s = VehicleState(1, 2, 0.3, 8)
    for k in range(30):
        s = step(s, ControlInput(steer[k], acc[k]), GEOM, 0.1)
        assert (tr.x[k + 1], tr.y[k + 1], tr.psi[k + 1], tr.v[k + 1]) == (s.x, s.y, s.psi, s.v)
    assert len(tr) == 31 and tr.steering.shape == (30,)


def test_rollout_scalar_accel_broadcast():
    tr = rollout(VehicleState(0, 0, 0, 10), np.zeros(5), 1.0, GEOM, 0.1)
    assert np.allclose(tr.v, 10 + 0.1 * np.arange(6))


def test_non_finite_input_raises():
    with pytest.raises(PropagationError):
        step(VehicleState(0, math.nan, 0, 10), ControlInput(0.0), GEOM)
    with pytest.raises(PropagationError):
        rollout(VehicleState(0, 0, 0, 10), [0.0, math.inf], 0.0, GEOM)


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        rollout(VehicleState(0, 0, 0, 10), [], 0.0, GEOM)


def test_slip_inverse_roundtrip():
    for d in np.linspace(-0.5, 0.5, 21):
        assert steering_for_slip(slip_angle(d, GEOM), GEOM) == pytest.approx(d, abs=1e-14)


def test_geometry_validation():
    with pytest.raises(ValueError):
        VehicleGeometry(1.25, 1.25, 1.0, 1.0)
    with pytest.raises(ValueError):
        VehicleGeometry(0.0, 1.25, 2.5, 1.0)
    assert GEOM.wheelbase == 2.5


def test_control_bounds():
    b = ControlBounds(0.5, 3.0)
    assert ControlInput(0.5, -3.0).within(b)
    assert not ControlInput(0.51, 0.0).within(b)


def test_trajectory_segment_and_state():
    tr = rollout(VehicleState(0, 0, 0, 10), np.full(10, 0.05), 0.0, GEOM, 0.1)
    seg = tr.segment(3)
    assert len(seg) == 8 and seg.x[0] == tr.x[3]
    assert tr.state(4).x == tr.x[4]
    assert np.allclose(tr.times, 0.1 * np.arange(11))
    assert tr.positions.shape == (11, 2)
