import numpy as np
import pytest

from oracles import idm_follow_rk4
from swarmlane.geometry import Road
from swarmlane.kinematics import Trajectory
from swarmlane.prediction import (N_PRED, CallablePredictor, ConstantVelocityPredictor, IDMMobilPredictor,
                                  IDMParams, MOBILParams, PredictionError, PredictorSpec,
                                  interactive_gap_response, predict_horizon)

DT = 0.1


def history(x0, y, v, n_obs=8):
    """Constant-speed observation rows ending at x0, one column per vehicle."""
    x0, y, v = (np.atleast_1d(np.asarray(a, float)) for a in (x0, y, v))
    k = np.arange(-(n_obs - 1), 1)[:, None] * DT
    return np.stack([x0 + k * v, np.broadcast_to(y, (n_obs, len(y)))], axis=-1)


def straight_plan(x0, y, v, n=31):
    x = x0 + v * DT * np.arange(n)
    return Trajectory(x, np.full(n, float(y)), np.full(n, float(v)), np.zeros(n), DT)


def test_cv_linear_extrapolation():
    obs = np.array([[[0.0, 0.0]], [[1.0, 0.0]]])
    out = ConstantVelocityPredictor().predict(obs)
    assert out.shape == (N_PRED, 1, 2)
    assert np.array_equal(out[:, 0, 0], np.arange(2, N_PRED + 2, dtype=float))
    assert np.all(out[:, 0, 1] == 0)


def test_cv_stationary_and_curved():
    obs = np.zeros((8, 2, 2))
    assert np.all(ConstantVelocityPredictor().predict(obs) == 0)
    # curved history: the tangent of the final displacement continues
    t = np.linspace(0, 1, 8)
    curved = np.stack([t, t ** 2], axis=-1)[:, None, :]
    out = ConstantVelocityPredictor(n_pred=3).predict(curved)
    step = curved[-1, 0] - curved[-2, 0]
    assert np.allclose(out[:, 0], curved[-1, 0] + np.arange(1, 4)[:, None] * step)


def test_cv_ignores_ego_plan():
    obs = history([0.0, 20.0], [0.0, 0.0], [10.0, 12.0])
    p = ConstantVelocityPredictor()
    assert np.array_equal(p.predict(obs), p.predict(obs, straight_plan(10.0, 0.0, 10.0)))


def test_observation_errors():
    with pytest.raises(PredictionError):
        ConstantVelocityPredictor().predict(np.zeros((1, 1, 2)))
    with pytest.raises(PredictionError):
        ConstantVelocityPredictor().predict(np.zeros((4, 2)))
    bad = np.zeros((3, 1, 2))
    bad[1, 0, 0] = np.nan
    with pytest.raises(PredictionError):
        ConstantVelocityPredictor().predict(bad)


def test_idm_off_road_vehicle_is_rejected():
    with pytest.raises(PredictionError):
        IDMMobilPredictor(Road()).predict(history(0.0, 20.0, 10.0))


def test_idm_free_flow_is_constant_speed():
    p = IDMMobilPredictor(Road(), IDMParams(v_desired=15.0))
    out = p.predict(history(0.0, 0.0, 15.0))
    assert np.allclose(out[:, 0, 0], 15.0 * DT * np.arange(1, N_PRED + 1), atol=1e-9)
    assert np.all(out[:, 0, 1] == 0.0)


def test_idm_follower_matches_fine_step_oracle():
    idm = IDMParams(v_desired=15.0)
    p = IDMMobilPredictor(Road(n_lanes=1), idm, MOBILParams(enabled=False))
    obs = history([0.0, 25.0], [0.0, 0.0], [17.0, 15.0])
    out = predict_horizon(p, obs, 30)
    params = (idm.v_desired, idm.time_headway, idm.min_gap, idm.a_max, idm.b_comfort)
    for t in range(2, 31):
        _, vf, _ = idm_follow_rk4(0.0, 17.0, 25.0, 15.0, 5.0, params, t * DT)
        v_pred = (out[t - 1, 0, 0] - out[t - 2, 0, 0]) / DT
        assert v_pred == pytest.approx(vf, rel=0.01)
    # the leader is at free flow and keeps its speed
    assert np.allclose(np.diff(out[:, 1, 0]), 1.5)


def test_ego_cut_in_slows_follower():
    p = IDMMobilPredictor(Road(), IDMParams(v_desired=12.0))
    obs = history(0.0, 0.0, 12.0)
    plan = straight_plan(8.0, 0.0, 10.0)
    alone = p.predict(obs)
    with_ego = p.predict(obs, plan)
    delta = interactive_gap_response(alone, with_ego)
    assert np.all(delta[1:, 0, 0] < 0)
    v_alone = np.diff(alone[:, 0, 0])
    v_ego = np.diff(with_ego[:, 0, 0])
    assert np.all(v_ego < v_alone)


def test_far_ego_has_no_effect():
    p = IDMMobilPredictor(Road(), IDMParams(v_desired=12.0))
    obs = history(0.0, 0.0, 12.0)
    delta = interactive_gap_response(p.predict(obs), p.predict(obs, straight_plan(-300.0, 3.5, 10.0)))
    assert np.max(np.abs(delta)) <= 1e-9
    cv = ConstantVelocityPredictor()
    assert np.all(interactive_gap_response(cv.predict(obs), cv.predict(obs, straight_plan(5, 0, 10))) == 0)


def test_gap_response_shape_mismatch():
    with pytest.raises(PredictionError):
        interactive_gap_response(np.zeros((12, 1, 2)), np.zeros((12, 2, 2)))


def test_predict_horizon_chains_calls():
    p = ConstantVelocityPredictor()
    obs = history([0.0], [0.0], [10.0])
    out = predict_horizon(p, obs, 30)
    assert out.shape == (30, 1, 2)
    assert np.allclose(out[:, 0, 0], np.arange(1, 31))
    assert predict_horizon(p, obs, 5).shape == (5, 1, 2)


def test_callable_adapter():
    def model(obs):
        return np.repeat(obs[-1:], 12, axis=0)
    out = CallablePredictor(model).predict(history([1.0, 2.0], [0.0, 3.5], [0.0, 0.0]))
    assert out.shape == (12, 2, 2)
    with pytest.raises(PredictionError):
        CallablePredictor(lambda o: np.zeros((3, 1, 2))).predict(history(0.0, 0.0, 1.0))


def test_spec_builds_predictors():
    assert isinstance(PredictorSpec("cv").build(Road(), DT, None, None), ConstantVelocityPredictor)
    assert PredictorSpec().build(Road(), DT, [], None).interactive
    with pytest.raises(ValueError):
        PredictorSpec("sgan").build(Road(), DT, None, None)


def test_idm_speeds_and_gaps_stay_safe(nominal):
    """Corpus check over realized nominal scenarios."""
    predictor = nominal.build_predictor()
    for seed in range(20):
        scn = nominal.realize(seed)
        out = predict_horizon(predictor, scn.observations(), 30)
        speeds = np.diff(out[:, :, 0], axis=0)
        assert np.all(speeds >= 0)
        for t in range(out.shape[0]):
            for lane_y in (0.0, 3.5):
                xs = np.sort(out[t, np.abs(out[t, :, 1] - lane_y) < 0.5, 0])
                assert np.all(np.diff(xs) > 5.0)
