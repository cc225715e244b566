"""Belief vectors ``b_i = [Phi(q); xi_i; delta_i]`` fed to each agent's policy.

The text encoder of the original setting is replaced by a seeded random unit
vector per task. Only the block structure and the fixed width matter here.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class BeliefDims:
    task: int = 16
    context: int = 8
    position: int = 4

    @property
    def total(self) -> int:
        return self.task + self.context + self.position


@dataclass(frozen=True)
class BeliefState:
    task_embedding: np.ndarray
    context_features: np.ndarray
    position_embedding: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.task_embedding, self.context_features,
                               self.position_embedding])


@lru_cache(maxsize=4096)
def _task_vector(task_seed: int, dim: int) -> tuple:
    rng = np.random.default_rng(np.random.SeedSequence(int(task_seed)))
    v = rng.standard_normal(dim)
    return tuple(v / np.linalg.norm(v))


def task_embedding(task_seed: int, dim: int) -> np.ndarray:
    """Seeded pseudo-random unit vector standing in for the encoded task."""
    return np.array(_task_vector(int(task_seed), int(dim)))


def position_embedding(position: int, dim: int) -> np.ndarray:
    """Sinusoidal code of the 1-based agent position."""
    k = np.arange(dim // 2)
    freq = 1.0 / (10.0 ** (2.0 * k / max(dim, 1)))
    out = np.zeros(dim)
    out[0:2 * len(k):2] = np.sin(position * freq)
    out[1:2 * len(k):2] = np.cos(position * freq)
    return out


def build_belief(task_seed: int, context_features, position: int,
                 dims: BeliefDims = BeliefDims()) -> BeliefState:
    """Assemble the three blocks; short context vectors are zero-padded."""
    ctx = np.zeros(dims.context)
    feats = np.asarray(context_features, dtype=float).ravel()
    if len(feats) > dims.context:
        raise ValueError(f"{len(feats)} context features exceed the block width {dims.context}")
    ctx[: len(feats)] = feats
    return BeliefState(task_embedding(task_seed, dims.task), ctx,
                       position_embedding(position, dims.position))


def context_block(scores, position: int, n: int, c_max: float,
                  reward_trace=0.0, width: int = 8) -> np.ndarray:
    """Context features for a batch of rollouts (a stand-in for the history summary).

    Columns: predecessor score, running sum and mean of all earlier scores,
    episode progress, and the agent's running mean reward over earlier
    episodes. ``scores`` has shape ``(batch, position - 1)``. The features do
    not depend on the observation mode, which only limits what the
    environment's response surface sees.
    """
    scores = np.asarray(scores, dtype=float)
    out = np.zeros((scores.shape[0], width))
    if scores.shape[1]:
        out[:, 0] = scores[:, -1] / c_max
        out[:, 1] = scores.sum(axis=1) / (n * c_max)
        out[:, 2] = scores.mean(axis=1) / c_max
    out[:, 3] = (position - 1) / n
    out[:, 4] = reward_trace
    return out
