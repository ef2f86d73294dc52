"""Scenario files, batch experiments and result export."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import pso
from .cost import CostWeights
from .geometry import Footprint, Road, SafetySpec, pairwise_distance
from .kinematics import VehicleGeometry, VehicleState
from .planner import (PlanConfig, PlanRequest, PlanResult, assess, initial_plan, mc_modify_plan,
                      plan, track)
from .prediction import IDMParams, MOBILParams, PredictorSpec

CONFIG_ENV = "SWARMLANE_CONFIG_DIR"
PACKAGE_CONFIGS = Path(__file__).parent / "configs"
METHODS = ("pso", "mc")


class ConfigError(ValueError):
    """Bad scenario file; ``where`` names the offending section and key when known."""

    def __init__(self, message: str, where: tuple[str, str | None] | None = None):
        super().__init__(message)
        self.where = where


@dataclass(frozen=True)
class EgoSetup:
    lane: int = 1
    target_lane: int = 0
    x: float = 0.0
    speed: float = 10.0
    merge_distance: float = 20.0
    delta_max: float = 0.5


@dataclass(frozen=True)
class TrafficSetup:
    n_vehicles: int = 3  # including the ego
    lane: int = 0
    speed: float = 12.0
    spawn_min: float = -10.0
    spawn_max: float = 20.0
    min_gap: float = 12.0  # bumper-to-bumper between spawned vehicles
    max_attempts: int = 1000
    require_blocked: bool = False  # keep only draws where the initial plan is unsafe


@dataclass(frozen=True)
class MCSetup:
    max_mods: int = 12
    margin: float = 15.0


@dataclass(frozen=True)
class BatchSetup:
    trials: int = 50
    master_seed: int = 2024
    success_budget_ms: float = 200.0


@dataclass
class Scenario:
    road: Road = field(default_factory=Road)
    vehicle: VehicleGeometry = field(default_factory=VehicleGeometry)
    ego: EgoSetup = field(default_factory=EgoSetup)
    traffic: TrafficSetup = field(default_factory=TrafficSetup)
    predictor: PredictorSpec = field(default_factory=PredictorSpec)
    swarm: pso.SwarmConfig = field(default_factory=pso.SwarmConfig)
    weights: CostWeights = field(default_factory=CostWeights)
    planner: PlanConfig = field(default_factory=PlanConfig)
    mc: MCSetup = field(default_factory=MCSetup)
    batch: BatchSetup = field(default_factory=BatchSetup)
    dt: float = 0.1
    horizon: int = 30
    n_obs: int = 8
    epsilon: float = 2.0
    seed: int = 0
    others_x: tuple[float, ...] = ()  # filled by realize()

    @property
    def n_others(self) -> int:
        return self.traffic.n_vehicles - 1

    def realize(self, seed: int | None = None) -> "Scenario":
        """Draw other-vehicle positions; rejection-sample until nothing overlaps."""
        seed = self.seed if seed is None else seed
        rng = np.random.default_rng(seed)
        t = self.traffic
        for _ in range(t.max_attempts):
            xs = np.sort(rng.uniform(t.spawn_min, t.spawn_max, self.n_others))
            if not self._spawn_ok(xs):
                continue
            scn = dataclasses.replace(self, seed=seed, others_x=tuple(float(x) for x in xs))
            if not t.require_blocked or scn.initial_blocked():
                return scn
        raise ConfigError(f"could not place {self.n_others} vehicles in "
                          f"[{t.spawn_min}, {t.spawn_max}] after {t.max_attempts} attempts")

    def _spawn_ok(self, xs) -> bool:
        if len(xs) > 1 and np.min(np.diff(xs)) < 2 * self.vehicle.half_length + self.traffic.min_gap:
            return False
        ego = Footprint.of(self.ego.x, self.road.center(self.ego.lane), 0.0, self.vehicle)
        y = self.road.center(self.traffic.lane)
        return all(pairwise_distance(ego, Footprint.of(x, y, 0.0, self.vehicle)) >= self.epsilon
                   for x in xs)

    def initial_blocked(self) -> bool:
        """Does the traffic-agnostic initial plan violate the safety buffer?"""
        request = self.request()
        traj = track(request, initial_plan(request))
        return assess(request, self.build_predictor(), traj).clearance < self.epsilon

    def observations(self) -> np.ndarray:
        """Constant-speed history of the other vehicles, oldest row first."""
        y = self.road.center(self.traffic.lane)
        rows = []
        for k in range(self.n_obs):
            back = (self.n_obs - 1 - k) * self.traffic.speed * self.dt
            rows.append([(x - back, y) for x in self.others_x])
        return np.array(rows, dtype=float).reshape(self.n_obs, len(self.others_x), 2)

    def request(self) -> PlanRequest:
        e = self.ego
        y0 = self.road.center(e.lane)
        return PlanRequest(
            ego=VehicleState(e.x, y0, 0.0, e.speed),
            target=(e.x + e.merge_distance, self.road.center(e.target_lane), 0.0),
            observations=self.observations(), road=self.road, target_lane=e.target_lane,
            ego_geom=self.vehicle, other_geoms=self.vehicle, horizon=self.horizon, dt=self.dt,
            safety=SafetySpec(self.epsilon), delta_max=e.delta_max)

    def build_predictor(self, kind: str | None = None):
        spec = self.predictor if kind is None else dataclasses.replace(self.predictor, kind=kind)
        return spec.build(self.road, self.dt, self.vehicle, self.vehicle)


# --- config parsing -------------------------------------------------------

def _section(cls, data: dict, where: str, **nested):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}] must be a table")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}",
                          (where, sorted(unknown)[0]))
    kwargs = dict(data)
    for key, sub in nested.items():
        if key in kwargs:
            kwargs[key] = _section(sub, kwargs[key], f"{where}.{key}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{where}]: {exc}", (where, None)) from exc


def _vehicle(data: dict) -> VehicleGeometry:
    unknown = set(data) - {"length", "width", "l_f", "l_r"}
    if unknown:
        raise ConfigError(f"unknown key(s) in [vehicle]: {', '.join(sorted(unknown))}",
                          ("vehicle", sorted(unknown)[0]))
    length = data.get("length", 5.0)
    width = data.get("width", 2.0)
    try:
        return VehicleGeometry(data.get("l_f", length / 4), data.get("l_r", length / 4),
                               length / 2, width / 2)
    except ValueError as exc:
        raise ConfigError(f"invalid [vehicle]: {exc}", ("vehicle", None)) from exc


def scenario_from_dict(data: dict) -> Scenario:
    data = dict(data)
    top = {}
    for key in ("dt", "horizon", "n_obs", "epsilon", "seed"):
        if key in data.get("scenario", {}):
            top[key] = data["scenario"][key]
    unknown_scn = set(data.get("scenario", {})) - {"dt", "horizon", "n_obs", "epsilon", "seed", "name"}
    if unknown_scn:
        raise ConfigError(f"unknown key(s) in [scenario]: {', '.join(sorted(unknown_scn))}",
                          ("scenario", sorted(unknown_scn)[0]))
    known = {"scenario", "road", "vehicle", "ego", "traffic", "predictor", "swarm", "cost",
             "planner", "mc", "batch"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}",
                          (sorted(unknown)[0], None))
    road_data = dict(data.get("road", {}))
    if "y_min" not in road_data:
        road_data["y_min"] = -road_data.get("lane_width", 3.5) / 2
    scn = Scenario(
        road=_section(Road, road_data, "road"),
        vehicle=_vehicle(data.get("vehicle", {})),
        ego=_section(EgoSetup, data.get("ego", {}), "ego"),
        traffic=_section(TrafficSetup, data.get("traffic", {}), "traffic"),
        predictor=_section(PredictorSpec, data.get("predictor", {}), "predictor",
                           idm=IDMParams, mobil=MOBILParams),
        swarm=_section(pso.SwarmConfig, data.get("swarm", {}), "swarm"),
        weights=_section(CostWeights, data.get("cost", {}), "cost"),
        planner=_section(PlanConfig, data.get("planner", {}), "planner"),
        mc=_section(MCSetup, data.get("mc", {}), "mc"),
        batch=_section(BatchSetup, data.get("batch", {}), "batch"),
        **top)
    if scn.traffic.n_vehicles < 1:
        raise ConfigError("traffic.n_vehicles counts the ego and must be >= 1")
    for lane in (scn.ego.lane, scn.ego.target_lane, scn.traffic.lane):
        if not 0 <= lane < scn.road.n_lanes:
            raise ConfigError(f"lane index {lane} outside a {scn.road.n_lanes}-lane road")
    if scn.predictor.kind not in ("idm", "cv"):
        raise ConfigError(f"unknown predictor kind {scn.predictor.kind!r}")
    return scn


def resolve_config(name_or_path: str | os.PathLike) -> Path:
    """Path as given, else ``<name>.toml`` in $SWARMLANE_CONFIG_DIR, else the packaged configs."""
    p = Path(name_or_path)
    if p.exists():
        return p
    stem = p.name if p.suffix == ".toml" else p.name + ".toml"
    dirs = [Path(os.environ[CONFIG_ENV])] if os.environ.get(CONFIG_ENV) else []
    dirs.append(PACKAGE_CONFIGS)
    for d in dirs:
        if (d / stem).exists():
            return d / stem
    raise ConfigError(f"config {str(name_or_path)!r} not found (searched {', '.join(map(str, dirs))})")


def build_scenario(config: str | os.PathLike | dict = "nominal", seed: int | None = None) -> Scenario:
    """Load a scenario file (or dict) and draw its traffic."""
    if isinstance(config, dict):
        return scenario_from_dict(config).realize(seed)
    path = resolve_config(config)
    text = path.read_text()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc  # the message carries line and column
    try:
        scenario = scenario_from_dict(data)
    except ConfigError as exc:
        line = _locate(text, exc.where)
        at = f"{path}:{line}" if line else str(path)
        raise ConfigError(f"{at}: {exc}", exc.where) from exc
    return scenario.realize(seed)


def _locate(text: str, where) -> int | None:
    """1-based line of ``[section]`` (or of ``key`` inside it) in a TOML text."""
    if not where:
        return None
    section, key = where
    in_section = False
    header = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("["):
            in_section = line.strip("[] ") == section
            if in_section:
                header = n
                if key is None:
                    return n
            continue
        if in_section and key is not None and line.split("=")[0].strip() == key:
            return n
    return header


# --- experiments ----------------------------------------------------------

@dataclass
class TrialRecord:
    seed: int
    method: str
    particles: int
    feasible: bool
    success: bool
    min_clearance: float | None
    steps_to_merge: int
    wall_time: float
    rounds: int = 0
    modifications: int = 0
    error: str = ""


@dataclass
class ExperimentReport:
    method: str
    particles: int
    budget_ms: float
    records: list[TrialRecord] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        if not self.records:
            return 0.0
        return 100.0 * sum(r.success for r in self.records) / len(self.records)

    def _feasible(self, attr):
        return [getattr(r, attr) for r in self.records if r.feasible and getattr(r, attr) is not None]

    @property
    def mean_clearance(self) -> float | None:
        vals = [v for v in self._feasible("min_clearance") if math.isfinite(v)]
        return statistics.fmean(vals) if vals else None

    @property
    def mean_time_ms(self) -> float | None:
        vals = [r.wall_time for r in self.records]
        return 1000 * statistics.fmean(vals) if vals else None

    @property
    def median_steps(self) -> float | None:
        vals = self._feasible("steps_to_merge")
        return statistics.median(vals) if vals else None

    def aggregates(self) -> dict:
        return {"trials": len(self.records), "success_rate_pct": self.success_rate,
                "feasible": sum(r.feasible for r in self.records),
                "mean_min_clearance_m": self.mean_clearance, "mean_time_ms": self.mean_time_ms,
                "median_steps_to_merge": self.median_steps}

    def to_dict(self) -> dict:
        return {"method": self.method, "particles": self.particles, "budget_ms": self.budget_ms,
                "aggregates": self.aggregates(),
                "records": [dataclasses.asdict(r) for r in self.records]}


def trial_seeds(master_seed: int, trials: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(master_seed).generate_state(trials)]


def run_plan(scenario: Scenario, method: str = "pso", particles: int | None = None,
             predictor: str | None = None) -> PlanResult:
    """Plan once on a realized scenario; the wall time covers planning only."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    request = scenario.request()
    pred = scenario.build_predictor(predictor)
    if method == "mc":
        return mc_modify_plan(request, pred, scenario.mc.max_mods, scenario.mc.margin,
                              seed=scenario.seed, weights=scenario.weights,
                              tolerance=scenario.planner.merge_tolerance)
    swarm = scenario.swarm
    if particles is not None:
        swarm = dataclasses.replace(swarm, n_particles=particles)
    swarm = dataclasses.replace(swarm, seed=scenario.seed)
    return plan(request, pred, swarm, scenario.weights, scenario.planner)


def run_trial(template: Scenario, seed: int, method: str, particles: int | None,
              predictor: str | None, budget_ms: float) -> TrialRecord:
    n_part = particles if particles is not None else template.swarm.n_particles
    try:
        scn = template.realize(seed)
        t0 = time.perf_counter()
        res = run_plan(scn, method, particles, predictor)
        wall = time.perf_counter() - t0
    except Exception as exc:  # a failed trial is data, not a crash
        return TrialRecord(seed, method, n_part, False, False, None, template.horizon, 0.0,
                           error=f"{type(exc).__name__}: {exc}")
    clearance = None if not math.isfinite(res.min_clearance) else res.min_clearance
    if res.feasible and res.min_clearance == math.inf:
        clearance = math.inf
    return TrialRecord(seed, method, n_part, res.feasible,
                       res.feasible and wall <= budget_ms / 1000.0, clearance, res.steps_to_merge,
                       wall, res.rounds, res.modifications)


def _run_trial_args(args):
    return run_trial(*args)


def run_batch(template: Scenario, method: str = "pso", trials: int | None = None,
              particles: int | None = None, predictor: str | None = None,
              budget_ms: float | None = None, master_seed: int | None = None,
              workers: int = 1) -> ExperimentReport:
    """Independent trials with seeds derived from one master seed."""
    trials = template.batch.trials if trials is None else trials
    budget_ms = template.batch.success_budget_ms if budget_ms is None else budget_ms
    master = template.batch.master_seed if master_seed is None else master_seed
    seeds = trial_seeds(master, trials)
    n_part = particles if particles is not None else template.swarm.n_particles
    jobs = [(template, s, method, particles, predictor, budget_ms) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            records = list(ex.map(_run_trial_args, jobs))
    else:
        records = [run_trial(*j) for j in jobs]
    return ExperimentReport(method, n_part if method == "pso" else 0, budget_ms, records)


def particle_sweep(template: Scenario, counts: Iterable[int] = range(1, 6), trials: int | None = None,
                   **kwargs) -> dict[int, ExperimentReport]:
    """One PSO batch per swarm size, all on the same trial seeds."""
    return {n: run_batch(template, "pso", trials, particles=n, **kwargs) for n in counts}


# --- export ---------------------------------------------------------------

TRAJECTORY_COLUMNS = ("t", "x", "y", "v", "psi", "delta")
PREDICTION_COLUMNS = ("t", "vehicle", "x", "y")


def _fmt(v) -> str:
    return repr(float(v))


def _json_default(o: Any):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _clean(obj):
    """Replace non-finite floats, which JSON cannot carry, with None."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _write_json(path: Path, obj):
    try:
        path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export_report(report: ExperimentReport | dict[int, ExperimentReport], path) -> Path:
    path = Path(path)
    if isinstance(report, dict):
        obj = {str(k): r.to_dict() for k, r in report.items()}
    else:
        obj = report.to_dict()
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(path, obj)
    return path


def export_run(result: PlanResult, out_dir, dt: float | None = None) -> dict[str, Path]:
    """Write trajectory, predictions, swarm trace and summary for one plan.

    Floats are written with ``repr`` so the files read back bit-exactly.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc}") from exc
    paths = {"trajectory": out / "trajectory.csv", "predictions": out / "predictions.csv",
             "trace": out / "trace.jsonl", "report": out / "report.json"}
    traj = result.trajectory
    step = dt if dt is not None else (traj.dt if traj is not None else 0.1)
    try:
        with open(paths["trajectory"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRAJECTORY_COLUMNS)
            if traj is not None:
                steer = traj.steering if traj.steering is not None else np.full(len(traj) - 1, np.nan)
                for k in range(len(traj)):
                    delta = steer[k] if k < len(steer) else float("nan")
                    w.writerow([_fmt(k * step), _fmt(traj.x[k]), _fmt(traj.y[k]), _fmt(traj.v[k]),
                                _fmt(traj.psi[k]), _fmt(delta)])
        with open(paths["predictions"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(PREDICTION_COLUMNS)
            if result.predictions is not None:
                pred = np.asarray(result.predictions)
                for t in range(pred.shape[0]):
                    for j in range(pred.shape[1]):
                        w.writerow([_fmt((t + 1) * step), j, _fmt(pred[t, j, 0]), _fmt(pred[t, j, 1])])
        with open(paths["trace"], "w") as fh:
            for row in result.trace:
                fh.write(json.dumps(_clean(row), sort_keys=True, default=_json_default) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write run files in {out}: {exc}") from exc
    _write_json(paths["report"], result.summary())
    return paths


def load_trajectory_csv(path):
    """Read back ``trajectory.csv`` as a dict of column arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in TRAJECTORY_COLUMNS}


def load_predictions_csv(path) -> np.ndarray:
    """Read back ``predictions.csv`` as an array ``(T, M, 2)``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return np.zeros((0, 0, 2))
    T = len({r["t"] for r in rows})
    M = len({r["vehicle"] for r in rows})
    out = np.empty((T, M, 2))
    for i, r in enumerate(rows):
        t, j = divmod(i, M)
        out[t, j] = float(r["x"]), float(r["y"])
    return out
