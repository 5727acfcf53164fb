"""Delay-resilient reinforcement learning with pretrained sequence encoders.

The package trains a soft actor-critic agent that acts under constant or
random observation delays by feeding it a fixed-length context representation
produced by a GRU encoder-decoder pretrained on delay-free trajectories.
"""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .data import (TrainingSample, Trajectory, TrajectoryStore, collect,
                   collect_mixed, make_samples, rollout, split)
from .delay import (BernoulliDrops, DelayConfig, DelayProcess, InformationState,
                    ScriptedDrops, build_information_state, update_z)
from .envs import (Env, EnvSpec, LinearSystemEnv, LqrExpert, PendulumEnv,
                   PointMassEnv, SacExpert, Transition, expert_action, lqr_gain,
                   make_env)
from .report import normalized_return
from .runners import (RunResult, final_metric, make_env_builder, run_deer,
                      run_delay_free, run_dolps, run_online_deer, run_sacas)
from .sac import ReplayBuffer, SacConfig, SacPolicy, load_policy, save_policy
from .seq2seq import (Seq2SeqModel, decode_train, evaluate_mse, load_model,
                      predict_states, pretrain, save_model)

__version__ = "0.1.0"

__all__ = [
    "BernoulliDrops", "ConfigError", "DelayConfig", "DelayProcess", "Env",
    "EnvSpec", "ExperimentConfig", "InformationState", "LinearSystemEnv",
    "LqrExpert", "PendulumEnv", "PointMassEnv", "ReplayBuffer", "RunResult",
    "SacConfig", "SacExpert", "SacPolicy", "ScriptedDrops", "Seq2SeqModel",
    "TrainingSample", "Trajectory", "TrajectoryStore", "Transition",
    "build_information_state", "collect", "collect_mixed", "decode_train",
    "evaluate_mse", "expert_action", "final_metric", "load_config",
    "load_model", "load_policy", "lqr_gain", "make_env", "make_env_builder",
    "make_samples", "normalized_return", "parse_config", "predict_states",
    "pretrain", "rollout", "run_deer", "run_delay_free", "run_dolps",
    "run_online_deer", "run_sacas", "save_model", "save_policy", "split",
    "update_z",
]
