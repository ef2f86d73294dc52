"""Swarm-based lane-change planning with kinematic rollouts and predicted traffic."""

from .cost import CostBreakdown, CostWeights, Reference, evaluate
from .geometry import Footprint, Road, SafetySpec, min_clearance, pairwise_distance
from .harness import ExperimentReport, Scenario, build_scenario, export_run, run_batch
from .kinematics import ControlBounds, ControlInput, Trajectory, VehicleGeometry, VehicleState, rollout, step
from .planner import PlanConfig, PlanRequest, PlanResult, mc_modify_plan, plan
from .prediction import ConstantVelocityPredictor, IDMMobilPredictor, Predictor, PredictorSpec
from .pso import SwarmConfig
from .smoothing import CubicCurve, fit_cubic

__version__ = "0.1.0"
