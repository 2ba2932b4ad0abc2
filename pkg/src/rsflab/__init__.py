"""Regularized successor features: advantage kernels, optimal features and exact returns."""

from ._accel import backend
from .features import (baseline_features, expected_gain, expected_gain_formula,
                       kernel_spectrum, optimal_features, random_features, subspace_distance,
                       trace_gain)
from .geometry import FeatureSet, RhoOperator, adjoint, laplacian, orthonormalize, projector
from .kernel import AdvantageKernel, build_kernel, closed_form_operator
from .mdp import (Mdp, Policy, StateActionWeights, check_ergodicity, policy_transition,
                  q_function, stationary_distribution, stationary_weights)
from .rewards import RewardModel, sample_reward, sample_rewards, second_moment
from .rsf import (boltzmann_policy, regularized_return, successor_feature_map, task_vector,
                  tilt_gain, zero_shot_gains)

__version__ = "0.1.0"

__all__ = [
    "AdvantageKernel", "FeatureSet", "Mdp", "Policy", "RewardModel", "RhoOperator",
    "StateActionWeights", "adjoint", "backend", "baseline_features", "boltzmann_policy",
    "build_kernel", "check_ergodicity", "closed_form_operator", "expected_gain",
    "expected_gain_formula", "kernel_spectrum", "laplacian", "optimal_features",
    "orthonormalize", "policy_transition", "projector", "q_function", "random_features",
    "regularized_return", "sample_reward", "sample_rewards", "second_moment",
    "stationary_distribution", "stationary_weights", "subspace_distance",
    "successor_feature_map", "task_vector", "tilt_gain", "trace_gain", "zero_shot_gains",
]
