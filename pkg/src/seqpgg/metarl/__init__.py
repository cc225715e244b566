"""PPO meta-policies trained on a synthetic sequential-contribution environment."""

from .belief import BeliefDims, BeliefState, build_belief
from .env import CONFIG_BOXES, CONFIG_FIELDS, ObservationMode, Surface, SyntheticEnv
from .policy import PolicyNet, sample_action
from .ppo import (TrainerConfig, Trajectory, compute_rewards, early_stop, ppo_loss,
                  ppo_update, rollout_episode)
from .trainer import TrainResult, load_checkpoint, save_checkpoint, train

__all__ = [
    "BeliefDims", "BeliefState", "build_belief", "CONFIG_BOXES", "CONFIG_FIELDS",
    "ObservationMode", "Surface", "SyntheticEnv", "PolicyNet", "sample_action",
    "TrainerConfig", "Trajectory", "compute_rewards", "early_stop", "ppo_loss",
    "ppo_update", "rollout_episode", "TrainResult", "load_checkpoint", "save_checkpoint",
    "train",
]
