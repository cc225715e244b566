"""Synthetic sequential-contribution environment standing in for generator agents.

Each agent emits a six-component generation config. The environment turns it
into a score ``c_i`` in ``[c_min, c_max]`` and charges a private cost
proportional to the normalized max-tokens component.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..game import CostModel

CONFIG_FIELDS = ("temperature", "top_p", "top_k", "max_tokens",
                 "repetition_penalty", "presence_penalty")
CONFIG_BOXES = (
    (0.1, 1.5),
    (0.5, 1.0),
    (1.0, 100.0),
    (64.0, 1024.0),
    (1.0, 2.0),
    (-2.0, 2.0),
)
MAX_TOKENS = CONFIG_FIELDS.index("max_tokens")
ACTION_DIM = len(CONFIG_FIELDS)


class ObservationMode(str, enum.Enum):
    PO = "po"
    FO = "fo"


class Surface(str, enum.Enum):
    LINEAR = "linear"
    SIGMOID = "sigmoid"
    CORNER = "corner"


def squash(raw):
    """Hard clamp of raw Gaussian draws to the normalized action box ``[-1, 1]``."""
    return np.clip(raw, -1.0, 1.0)


def to_config(action) -> np.ndarray:
    """Map normalized actions in ``[-1, 1]`` to the component boxes."""
    a = np.asarray(action, dtype=float)
    lo = np.array([b[0] for b in CONFIG_BOXES])
    hi = np.array([b[1] for b in CONFIG_BOXES])
    return lo + (np.clip(a, -1.0, 1.0) + 1.0) / 2.0 * (hi - lo)


@dataclass(frozen=True)
class SyntheticEnv:
    """Response surface from (config, observed history) to a bounded score.

    ``linear``: the score is affine in the normalized max-tokens component,
    so the cost ``kappa * u`` makes the induced stage game a contribution game
    with linear cost ``kappa / (c_max - c_min)`` that the solver can handle.
    ``sigmoid``: ``c_min + (c_max - c_min) * sigmoid(w . a) + lam * h`` with
    seeded weights ``w``, where ``h`` is ``c_{i-1}`` under partial observation
    and the mean of all earlier scores under full observation.
    ``corner``: the score is affine in the mean of all six normalized
    components, so the best config sits at the upper corner of the box
    whenever the shared reward outweighs the cost.
    """

    surface: Surface = Surface.LINEAR
    mode: ObservationMode = ObservationMode.PO
    c_min: float = 0.0
    c_max: float = 1.0
    kappa: float = 0.5
    lam: float = 0.2
    task_seed: int = 0
    num_tasks: int = 16

    def __post_init__(self):
        object.__setattr__(self, "surface", Surface(self.surface))
        object.__setattr__(self, "mode", ObservationMode(self.mode))
        if not self.c_min <= self.c_max:
            raise ValueError("need c_min <= c_max")
        if not self.kappa > 0:
            raise ValueError("kappa must be > 0")
        if self.num_tasks < 1:
            raise ValueError("num_tasks must be >= 1")

    @property
    def weights(self) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(self.task_seed, spawn_key=(7,)))
        return rng.normal(0.0, 1.0, ACTION_DIM)

    def task_ids(self, rng: np.random.Generator, batch: int) -> np.ndarray:
        return self.task_seed * 1_000 + rng.integers(0, self.num_tasks, batch)

    def observe(self, scores: np.ndarray) -> np.ndarray:
        """The part of the score history an agent's call may see."""
        if self.mode is ObservationMode.PO:
            return scores[:, -1:]
        return scores

    def score(self, action, history) -> np.ndarray:
        """Scores for a batch of normalized actions given each rollout's visible history."""
        a = squash(np.atleast_2d(action))
        history = np.asarray(history, dtype=float).reshape(len(a), -1)
        span = self.c_max - self.c_min
        if self.surface is Surface.LINEAR:
            raw = self.c_min + span * (a[:, MAX_TOKENS] + 1.0) / 2.0
        elif self.surface is Surface.CORNER:
            raw = self.c_min + span * (a.mean(axis=1) + 1.0) / 2.0
        else:
            h = history.mean(axis=1) if history.shape[1] else np.zeros(len(a))
            raw = self.c_min + span / (1.0 + np.exp(-(a @ self.weights))) + self.lam * h
        return np.clip(raw, self.c_min, self.c_max)

    def cost(self, action) -> np.ndarray:
        """Private cost, proportional to the normalized max-tokens component."""
        a = squash(np.atleast_2d(action))
        return self.kappa * (a[:, MAX_TOKENS] + 1.0) / 2.0

    def stage_cost(self) -> CostModel:
        """Linear contribution cost the ``linear`` surface induces on scores."""
        if self.surface is not Surface.LINEAR:
            raise ValueError("only the linear surface induces a contribution cost")
        return CostModel.linear(self.kappa / (self.c_max - self.c_min))
