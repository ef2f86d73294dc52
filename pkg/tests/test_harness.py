import dataclasses
import json
import math

import numpy as np
import pytest

from swarmlane import harness
from swarmlane.geometry import min_clearance
from swarmlane.harness import ConfigError, ExperimentReport
from swarmlane.kinematics import Trajectory

NOMINAL_TEXT = (harness.PACKAGE_CONFIGS / "nominal.toml").read_text()


def test_nominal_config(nominal):
    assert nominal.traffic.n_vehicles == 3 and nominal.n_others == 2  # the ego is one of three
    assert nominal.road.n_lanes == 2 and nominal.road.lane_width == 3.5
    assert nominal.epsilon == 2.0 and nominal.horizon == 30 and nominal.dt == 0.1
    assert nominal.predictor.kind == "idm" and nominal.swarm.n_particles == 2


def test_seeded_realization_is_repeatable(nominal):
    a, b = nominal.realize(7), nominal.realize(7)
    assert a.others_x == b.others_x
    assert nominal.realize(8).others_x != a.others_x
    xs = np.array(a.others_x)
    assert np.all(np.diff(xs) >= 17.0)
    assert np.all((xs >= -10) & (xs <= 20))


def test_narrow_spawn_band_raises(nominal):
    tight = dataclasses.replace(nominal, traffic=dataclasses.replace(
        nominal.traffic, spawn_min=-5.0, spawn_max=5.0, max_attempts=50))
    with pytest.raises(ConfigError, match="after 50 attempts"):
        tight.realize(0)


def test_observations_and_request(nominal):
    scn = nominal.realize(3)
    obs = scn.observations()
    assert obs.shape == (8, 2, 2)
    assert np.allclose(np.diff(obs[:, :, 0], axis=0), 1.2)
    req = scn.request()
    assert (req.ego.x, req.ego.y, req.ego.v) == (0.0, 3.5, 10.0)
    assert req.target == (20.0, 0.0, 0.0)


def _write(tmp_path, text, name="bad.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_config_error_reports_line(tmp_path):
    text = NOMINAL_TEXT.replace("n_particles = 2", "n_particles = 2\nparticle_count = 4")
    p = _write(tmp_path, text)
    line = text.splitlines().index("particle_count = 4") + 1
    with pytest.raises(ConfigError, match=rf"bad.toml:{line}: .*particle_count"):
        harness.build_scenario(p)
    bad_lane = _write(tmp_path, NOMINAL_TEXT.replace("target_lane = 0", "target_lane = 5"), "lane.toml")
    with pytest.raises(ConfigError, match="lane index 5"):
        harness.build_scenario(bad_lane)
    broken = _write(tmp_path, "[road\nlane_width = 3", "broken.toml")
    with pytest.raises(ConfigError, match="broken.toml"):
        harness.build_scenario(broken)
    with pytest.raises(ConfigError, match="not found"):
        harness.build_scenario("no-such-scenario")


def test_config_dir_from_environment(tmp_path, monkeypatch):
    _write(tmp_path, NOMINAL_TEXT.replace("speed = 12.0", "speed = 11.0"), "custom.toml")
    monkeypatch.setenv(harness.CONFIG_ENV, str(tmp_path))
    assert harness.build_scenario("custom").traffic.speed == 11.0
    assert harness.resolve_config("nominal") == harness.PACKAGE_CONFIGS / "nominal.toml"


def test_dict_config_and_overrides():
    scn = harness.build_scenario({"traffic": {"n_vehicles": 1}, "swarm": {"n_particles": 3}}, seed=5)
    assert scn.others_x == () and scn.swarm.n_particles == 3
    with pytest.raises(ConfigError):
        harness.build_scenario({"bogus": {}})


def test_trial_seeds_are_fixed():
    s = harness.trial_seeds(2024, 5)
    assert s == harness.trial_seeds(2024, 5) and len(set(s)) == 5
    assert harness.trial_seeds(2024, 3) == s[:3]


def test_batch_determinism_and_single_trial(nominal):
    one = harness.run_batch(nominal, "mc", trials=1)
    assert len(one.records) == 1
    a = harness.run_batch(nominal, "mc", trials=6)
    b = harness.run_batch(nominal, "mc", trials=6)
    strip = lambda r: [dataclasses.replace(x, wall_time=0.0, success=x.feasible) for x in r.records]
    assert strip(a) == strip(b)
    assert a.particles == 0 and a.method == "mc"


def test_sweep_shares_seeds(nominal):
    reps = harness.particle_sweep(nominal, [1, 2], trials=2, budget_ms=1e9)
    assert list(reps) == [1, 2]
    assert [r.seed for r in reps[1].records] == [r.seed for r in reps[2].records]
    assert reps[2].records[0].particles == 2


def test_failed_trial_is_recorded(nominal):
    tight = dataclasses.replace(nominal, traffic=dataclasses.replace(
        nominal.traffic, spawn_min=-5.0, spawn_max=5.0, max_attempts=5))
    rep = harness.run_batch(tight, "mc", trials=2)
    assert all(r.error.startswith("ConfigError") and not r.success for r in rep.records)
    assert rep.success_rate == 0.0


def test_empty_report_exports(tmp_path):
    rep = ExperimentReport("pso", 2, 200.0)
    data = json.loads(harness.export_report(rep, tmp_path / "r.json").read_text())
    assert data["records"] == [] and data["aggregates"]["trials"] == 0
    assert data["aggregates"]["mean_min_clearance_m"] is None


def test_export_run_files_roundtrip(nominal, tmp_path):
    scn = nominal.realize(4)
    res = harness.run_plan(scn)
    paths = harness.export_run(res, tmp_path / "a", scn.dt)
    assert sorted(p.name for p in paths.values()) == ["predictions.csv", "report.json",
                                                       "trace.jsonl", "trajectory.csv"]
    assert paths["trajectory"].read_text().splitlines()[0] == "t,x,y,v,psi,delta"
    assert paths["predictions"].read_text().splitlines()[0] == "t,vehicle,x,y"
    again = harness.export_run(res, tmp_path / "b", scn.dt)
    for k in paths:
        assert paths[k].read_bytes() == again[k].read_bytes()
    # clearance recomputed from the files equals the reported one
    cols = harness.load_trajectory_csv(paths["trajectory"])
    traj = Trajectory(cols["x"][1:], cols["y"][1:], cols["v"][1:], cols["psi"][1:], scn.dt)
    preds = harness.load_predictions_csv(paths["predictions"])
    cl = min_clearance(traj, preds, scn.vehicle, scn.vehicle)
    assert cl.distance == res.min_clearance
    report = json.loads(paths["report"].read_text())
    assert report["min_clearance_m"] == res.min_clearance
    trace = [json.loads(l) for l in paths["trace"].read_text().splitlines()]
    assert {"iteration", "costs", "gbest", "round"} <= set(trace[0])


def test_export_to_unwritable_path(nominal, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    res = harness.run_plan(nominal.realize(1), "mc")
    with pytest.raises(OSError, match="cannot create"):
        harness.export_run(res, blocker / "sub")


def test_success_needs_budget(nominal):
    rec = harness.run_trial(nominal, 11, "mc", None, None, budget_ms=0.0)
    assert not rec.success
    rec = harness.run_trial(nominal, 11, "mc", None, None, budget_ms=1e9)
    assert rec.success == rec.feasible
    assert math.isfinite(rec.wall_time)
