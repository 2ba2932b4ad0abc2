import json

import numpy as np
import pytest

from rsflab.features import random_features
from rsflab.io import (features_from_dict, features_to_dict, mdp_from_dict, mdp_to_dict,
                       policy_from_dict, policy_to_dict, read_json, reward_model_from_dict,
                       reward_model_to_dict, write_json)
from rsflab.rewards import RewardModel


class TestRoundTrips:
    def test_mdp(self, env_factory, tmp_path):
        mdp, _, _ = env_factory(0, n=4, m=3)
        back = mdp_from_dict(read_json(write_json(mdp_to_dict(mdp), tmp_path / "m.json")))
        np.testing.assert_array_equal(back.transition, mdp.transition)
        assert back.gamma == mdp.gamma

    def test_sparse_listing(self):
        data = {"num_states": 2, "num_actions": 1, "gamma": 0.5,
                "transitions": [[0, 0, 1, 1.0], [1, 0, 0, 1.0]]}
        mdp = mdp_from_dict(data)
        np.testing.assert_array_equal(mdp.transition, [[0, 1], [1, 0]])
        assert mdp_to_dict(mdp)["transitions"] == data["transitions"]

    def test_out_of_range_transition(self):
        with pytest.raises(ValueError):
            mdp_from_dict({"num_states": 2, "num_actions": 1, "gamma": 0.5,
                           "transitions": [[0, 0, 2, 1.0]]})

    def test_policy(self, env_factory):
        _, pi0, _ = env_factory(1)
        back = policy_from_dict(json.loads(json.dumps(policy_to_dict(pi0))))
        np.testing.assert_array_equal(back.probs, pi0.probs)

    def test_features(self, env_factory, rng):
        _, _, w = env_factory(2)
        phi = random_features(w, 3, rng)
        back = features_from_dict(json.loads(json.dumps(features_to_dict(phi))), w)
        np.testing.assert_array_equal(back.columns, phi.columns)
        assert back.provenance == "random"

    @pytest.mark.parametrize("model", [RewardModel("gaussian"), RewardModel("goal"),
                                       RewardModel("scattered", kappa=2.0, mu=-1.0, sigma2=0.5)])
    def test_reward_model(self, model):
        assert reward_model_from_dict(json.loads(json.dumps(reward_model_to_dict(model)))) == model

    def test_write_creates_parents(self, tmp_path):
        path = write_json({"a": 1}, tmp_path / "x" / "y" / "z.json")
        assert read_json(path) == {"a": 1}
