"""Payoff model of the sequential public goods game with synergy-aligned rewards.

Agents are indexed from 1 to ``n`` to match the game notation; ``c_0`` is
taken to be zero. Every function here is pure and accepts either a single
profile of shape ``(n,)`` or a stack of profiles of shape ``(..., n)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class SuccessMode(str, enum.Enum):
    """Which aggregate of the profile is compared with the threshold."""

    CUMULATIVE_SUM = "cumulative_sum"
    FINAL_SCORE = "final_score"


class SynergyMode(str, enum.Enum):
    """Which contribution multiplies the acting agent's own one in the bonus."""

    PREDECESSOR = "predecessor"
    SELF = "self"


@dataclass(frozen=True)
class GameParams:
    """Full parameterization of one game instance.

    ``success_mode`` selects the aggregate ``C`` used by both the shared term
    and the failure penalty: the running total ``S_n`` or the last score ``c_n``.
    """

    n: int = 3
    gamma_coop: float = 1.5
    rho: float = 1.8
    threshold: float = 1.0
    penalty: float = 0.5
    c_min: float = 0.0
    c_max: float = 1.0
    success_mode: SuccessMode = SuccessMode.CUMULATIVE_SUM
    synergy_mode: SynergyMode = SynergyMode.PREDECESSOR

    def __post_init__(self):
        object.__setattr__(self, "success_mode", SuccessMode(self.success_mode))
        object.__setattr__(self, "synergy_mode", SynergyMode(self.synergy_mode))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        for name in ("gamma_coop", "rho", "penalty", "c_min"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if not self.threshold > 0:
            raise ValueError(f"threshold must be > 0, got {self.threshold!r}")
        if not (np.isfinite(self.c_max) and self.c_min <= self.c_max):
            raise ValueError(
                f"need 0 <= c_min <= c_max < inf, got [{self.c_min}, {self.c_max}]"
            )

    @property
    def share(self) -> float:
        """Per-agent share ``rho / n`` of the public good."""
        return self.rho / self.n

    @property
    def satisfies_positive_floor(self) -> bool:
        """Whether contributions are bounded away from zero (``c_min > 0``)."""
        return self.c_min > 0


@dataclass(frozen=True)
class CostModel:
    """Private cost ``l(c) = a*c + b*c**2``; ``b == 0`` is the linear variant."""

    a: float = 1.0
    b: float = 0.0
    kind: str = field(default="linear")

    def __post_init__(self):
        if self.kind not in ("linear", "quadratic"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if not self.a > 0:
            raise ValueError(f"linear coefficient must be > 0, got {self.a!r}")
        if not self.b >= 0:
            raise ValueError(f"quadratic coefficient must be >= 0, got {self.b!r}")
        if self.kind == "linear" and self.b != 0:
            raise ValueError("a linear cost has no quadratic coefficient")

    @classmethod
    def linear(cls, a: float = 1.0) -> "CostModel":
        return cls(a=a, b=0.0, kind="linear")

    @classmethod
    def quadratic(cls, a: float, b: float) -> "CostModel":
        return cls(a=a, b=b, kind="quadratic")

    def __call__(self, c):
        c = np.asarray(c, dtype=float)
        return self.a * c + self.b * c * c

    def marginal(self, c):
        return self.a + 2.0 * self.b * np.asarray(c, dtype=float)


@dataclass(frozen=True)
class RewardBreakdown:
    """The four addends of an agent's reward and their sum."""

    cost_term: np.ndarray | float
    synergy_term: np.ndarray | float
    share_term: np.ndarray | float
    penalty_term: np.ndarray | float

    @property
    def total(self):
        return self.cost_term + self.synergy_term + self.share_term + self.penalty_term


def as_profile(profile, params: GameParams | None = None) -> np.ndarray:
    """Return ``profile`` as a float array, checking length and bounds if ``params`` is given."""
    arr = np.asarray(profile, dtype=float)
    if arr.ndim == 0:
        raise ValueError("a contribution profile needs at least one entry")
    if params is not None:
        if arr.shape[-1] != params.n:
            raise ValueError(f"profile has {arr.shape[-1]} entries, game has n={params.n}")
        if np.any(arr < params.c_min) or np.any(arr > params.c_max):
            raise ValueError(
                f"contributions must lie in [{params.c_min}, {params.c_max}]"
            )
    return arr


def cumulative_sum(profile, k: int):
    """``S_k``, the total of the first ``k`` contributions (``S_0 = 0``)."""
    arr = as_profile(profile)
    n = arr.shape[-1]
    if not 0 <= k <= n:
        raise IndexError(f"k must be in [0, {n}], got {k}")
    return arr[..., :k].sum(axis=-1)


def outcome(profile, params: GameParams):
    """The aggregate ``C`` the threshold and the shared term are applied to."""
    arr = as_profile(profile)
    if params.success_mode is SuccessMode.CUMULATIVE_SUM:
        return arr.sum(axis=-1)
    return arr[..., -1]


def success(profile, params: GameParams):
    """Whether the task clears the threshold; reaching it exactly counts."""
    return outcome(as_profile(profile, params), params) >= params.threshold


def payoff_terms(
    params: GameParams, cost: CostModel | None, c, c_prev, aggregate, incurred=None
) -> RewardBreakdown:
    """Reward terms for one agent from its own contribution, its predecessor's and ``C``.

    This is the single implementation of the reward formula; the solver and the
    training loop call it directly on whole batches of states. ``incurred``
    replaces ``cost(c)`` when the private cost is observed rather than modelled,
    in which case ``cost`` may be None.
    """
    c = np.asarray(c, dtype=float)
    aggregate = np.asarray(aggregate, dtype=float)
    if incurred is None:
        if cost is None:
            raise ValueError("need a cost model or the incurred costs")
        spent = cost(c)
    else:
        spent = np.asarray(incurred, dtype=float)
    if params.synergy_mode is SynergyMode.PREDECESSOR:
        partner = np.asarray(c_prev, dtype=float)
    else:
        partner = c
    synergy = params.gamma_coop * (partner / params.threshold) * c
    share = params.share * aggregate
    penalty = np.where(aggregate < params.threshold, -params.penalty, 0.0)
    return RewardBreakdown(
        cost_term=_squeeze(-spent),
        synergy_term=_squeeze(synergy),
        share_term=_squeeze(share),
        penalty_term=_squeeze(penalty),
    )


def reward(i: int, profile, params: GameParams, cost: CostModel, incurred=None) -> RewardBreakdown:
    """Reward of agent ``i`` (1-based) at ``profile``."""
    arr = as_profile(profile, params)
    if not 1 <= i <= params.n:
        raise IndexError(f"agent index must be in [1, {params.n}], got {i}")
    c_prev = arr[..., i - 2] if i > 1 else np.zeros(arr.shape[:-1])
    return payoff_terms(params, cost, arr[..., i - 1], c_prev, outcome(arr, params), incurred)


def utilities(profile, params: GameParams, cost: CostModel) -> np.ndarray:
    """Vector of every agent's total reward; shape ``(..., n)``."""
    arr = as_profile(profile, params)
    cols = [np.asarray(reward(i, arr, params, cost).total) for i in range(1, params.n + 1)]
    return np.stack(cols, axis=-1)


def welfare(profile, params: GameParams, cost: CostModel):
    """Total welfare, the sum of all agents' rewards."""
    return _squeeze(utilities(profile, params, cost).sum(axis=-1))


def _squeeze(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x
