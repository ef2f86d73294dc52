"""Raw swarm outputs on realized nominal scenarios, shared by several tests."""

import dataclasses

import numpy as np

from swarmlane import pso
from swarmlane.planner import initial_plan, predict_for, track


def swarm_outputs(template, seeds):
    """``(request, trajectory, SwarmResult)`` for one swarm run per seed."""
    out = []
    for seed in seeds:
        scn = template.realize(seed)
        req = scn.request()
        predictor = scn.build_predictor()
        ref = initial_plan(req)
        preds = predict_for(req, predictor, track(req, ref))
        problem = pso.Problem(req.ego, ref, preds, req.ego_geom, req.other_geoms, req.safety,
                              scn.weights, lambda t, r=req, p=predictor: predict_for(r, p, t))
        cfg = dataclasses.replace(scn.swarm, seed=seed)
        res = pso.run(problem, cfg, np.random.default_rng(seed))
        out.append((req, res.trajectory, res))
    return out
