"""JSON readers and writers for MDPs, policies, feature sets and reward models.

MDP files list the nonzero transitions as ``[s, a, s_next, prob]`` rows;
unlisted triples have probability 0.  Feature files store ``columns``
column-major, one inner list per feature.
"""

import json
from pathlib import Path

import numpy as np

from .geometry import FeatureSet
from .mdp import Mdp, Policy, StateActionWeights
from .rewards import RewardModel


def mdp_to_dict(mdp: Mdp) -> dict:
    p = mdp.transition.reshape(mdp.num_states, mdp.num_actions, mdp.num_states)
    rows = [[int(s), int(a), int(t), float(p[s, a, t])] for s, a, t in zip(*np.nonzero(p))]
    return {"num_states": mdp.num_states, "num_actions": mdp.num_actions,
            "gamma": mdp.gamma, "transitions": rows}


def mdp_from_dict(data: dict) -> Mdp:
    n, m = int(data["num_states"]), int(data["num_actions"])
    p = np.zeros((n, m, n))
    for s, a, t, prob in data["transitions"]:
        s, a, t = int(s), int(a), int(t)
        if not (0 <= s < n and 0 <= a < m and 0 <= t < n):
            raise ValueError(f"transition ({s}, {a}, {t}) out of range")
        p[s, a, t] += float(prob)
    return Mdp.from_tensor(p, float(data["gamma"]))


def policy_to_dict(policy: Policy) -> dict:
    return {"probs": policy.probs.tolist()}


def policy_from_dict(data: dict) -> Policy:
    return Policy(np.asarray(data["probs"], dtype=np.float64))


def features_to_dict(features: FeatureSet) -> dict:
    return {"d": features.d, "provenance": features.provenance,
            "columns": features.columns.T.tolist()}


def features_from_dict(data: dict, w: StateActionWeights) -> FeatureSet:
    cols = np.asarray(data["columns"], dtype=np.float64).reshape(int(data["d"]), -1).T
    return FeatureSet(cols, w, data.get("provenance", "custom"))


def reward_model_to_dict(model: RewardModel) -> dict:
    return model.to_config()


def reward_model_from_dict(data: dict) -> RewardModel:
    return RewardModel.from_config(data)


def write_json(obj: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
