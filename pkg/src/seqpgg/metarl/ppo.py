"""Rollout, reward computation and clipped PPO updates for sequential agents."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..game import GameParams, outcome, payoff_terms
from .belief import BeliefDims, context_block, position_embedding, task_embedding
from .env import ObservationMode, SyntheticEnv
from .policy import PolicyNet, gaussian_entropy, gaussian_logprob, sample_action

ADV_STD_FLOOR = 1e-8


@dataclass(frozen=True)
class TrainerConfig:
    """PPO settings, the reward parameters used in training and the early-stop rule.

    ``reward_threshold`` and ``quality_target`` left as None disable early stopping.
    """

    ppo_epochs: int = 4
    minibatch: int = 16
    gamma_disc: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.02
    grad_clip: float = 0.5
    target_kl: float = 0.015
    learning_rate: float = 5e-4
    buffer_size: int = 512
    normalize_advantages: bool = True
    n_agents: int = 3
    gamma_coop: float = 1.5
    rho: float = 1.8
    threshold: float = 0.85
    penalty: float = 1.5
    max_episodes: int = 500
    reward_threshold: float | None = None
    quality_target: float | None = None
    plateau_margin: float = 0.01
    hidden: int = 64
    belief_dims: BeliefDims = field(default_factory=BeliefDims)

    def __post_init__(self):
        if isinstance(self.belief_dims, dict):
            object.__setattr__(self, "belief_dims", BeliefDims(**self.belief_dims))
        elif isinstance(self.belief_dims, (list, tuple)):
            object.__setattr__(self, "belief_dims", BeliefDims(*self.belief_dims))
        for name in ("ppo_epochs", "minibatch", "buffer_size", "hidden", "n_agents"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("gamma_disc", "learning_rate", "grad_clip", "threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("value_coef", "entropy_coef", "target_kl", "penalty", "rho",
                     "gamma_coop", "plateau_margin"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 < self.clip < 1:
            raise ValueError("clip must lie in (0, 1)")
        if not 0 <= self.gae_lambda <= 1:
            raise ValueError("gae_lambda must lie in [0, 1]")
        if self.buffer_size % self.minibatch:
            raise ValueError("buffer_size must be a multiple of minibatch")
        if self.max_episodes < 0:
            raise ValueError("max_episodes must be >= 0")

    def game_params(self, env: SyntheticEnv) -> GameParams:
        """Reward parameters of the training game on ``env``'s score range."""
        return GameParams(n=self.n_agents, gamma_coop=self.gamma_coop, rho=self.rho,
                          threshold=self.threshold, penalty=self.penalty,
                          c_min=env.c_min, c_max=env.c_max)


@dataclass
class Trajectory:
    """A batch of complete episodes; leading axis is the agent, then the rollout."""

    beliefs: np.ndarray
    raw: np.ndarray
    actions: np.ndarray
    logp: np.ndarray
    scores: np.ndarray
    costs: np.ndarray
    task_ids: np.ndarray


def rollout_episode(env: SyntheticEnv, policies: list[PolicyNet], game_params: GameParams,
                    rng: np.random.Generator, batch: int = 1, reward_trace=None,
                    dims: BeliefDims = BeliefDims()) -> Trajectory:
    """Let the agents act in order on ``batch`` independent tasks.

    Agent ``i``'s call to the environment sees only ``c_{i-1}`` under partial
    observation and every earlier score under full observation.
    """
    n = game_params.n
    if len(policies) != n:
        raise ValueError(f"need {n} policies, got {len(policies)}")
    reward_trace = np.zeros(n) if reward_trace is None else np.asarray(reward_trace, dtype=float)
    tasks = env.task_ids(rng, batch)
    phi = np.stack([task_embedding(t, dims.task) for t in tasks])
    scores = np.zeros((batch, 0))
    beliefs, raws, acts, logps, costs = [], [], [], [], []
    for i in range(1, n + 1):
        ctx = context_block(scores, i, n, game_params.c_max, reward_trace[i - 1], dims.context)
        pos = np.broadcast_to(position_embedding(i, dims.position), (batch, dims.position))
        b = np.concatenate([phi, ctx, pos], axis=1)
        draw = sample_action(policies[i - 1], b, rng)
        visible = scores[:, -1:] if env.mode is ObservationMode.PO else scores
        c = env.score(draw.action, visible)
        if np.any(c < game_params.c_min) or np.any(c > game_params.c_max):
            raise ValueError("environment returned a score outside the contribution bounds")
        beliefs.append(b)
        raws.append(draw.raw)
        acts.append(draw.action)
        logps.append(draw.logprob)
        costs.append(env.cost(draw.action))
        scores = np.concatenate([scores, c[:, None]], axis=1)
    return Trajectory(np.stack(beliefs), np.stack(raws), np.stack(acts), np.stack(logps),
                      scores.T.copy(), np.stack(costs), tasks)


@dataclass
class Rewards:
    rewards: np.ndarray
    values: np.ndarray
    advantages: np.ndarray


def compute_rewards(traj: Trajectory, game_params: GameParams, policies=None,
                    gamma_disc: float = 0.99) -> Rewards:
    """Per-agent rewards on the realized scores and one-step advantages.

    Rewards go through the same payoff function as the solver, with the
    environment's incurred cost in place of a cost model. Every agent acts once
    per episode, so its successor state is terminal with value zero and the
    advantage is ``R_i - V(b_i)``.
    """
    scores = traj.scores
    n = scores.shape[0]
    agg = outcome(scores.T, game_params)
    R = np.empty_like(scores)
    for i in range(n):
        c_prev = scores[i - 1] if i > 0 else np.zeros_like(scores[0])
        R[i] = payoff_terms(game_params, None, scores[i], c_prev, agg, incurred=traj.costs[i]).total
    if policies is None:
        V = np.zeros_like(R)
    else:
        V = np.stack([policies[i].value(traj.beliefs[i]) for i in range(n)])
    terminal = 0.0
    A = R + gamma_disc * terminal - V
    return Rewards(R, V, A)


@dataclass
class LossStats:
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    ratio: np.ndarray
    logp: np.ndarray


def ppo_loss(policy: PolicyNet, batch: dict, config: TrainerConfig):
    """Clipped surrogate plus value and entropy terms, and its parameter gradients.

    ``batch`` holds ``b`` (beliefs), ``raw`` (pre-clamp actions), ``logp_old``,
    ``adv`` (already normalized) and ``ret`` (reward targets). The returned loss
    is to be minimized.
    """
    b, x = batch["b"], batch["raw"]
    A, ret, logp_old = batch["adv"], batch["ret"], batch["logp_old"]
    N = len(A)
    if N == 0:
        raise ValueError("empty batch")
    eps = config.clip
    mu, std, v, cache = policy.forward(b)
    logp = gaussian_logprob(x, mu, std)
    ratio = np.exp(logp - logp_old)
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps)
    surr = np.minimum(ratio * A, clipped * A)
    ent = gaussian_entropy(std)
    policy_loss = -surr.mean()
    value_loss = np.mean((v - ret) ** 2)
    loss = policy_loss + config.value_coef * value_loss - config.entropy_coef * ent.mean()
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite PPO loss")

    # the unclipped branch is active where it is the smaller one
    active = ratio * A <= clipped * A
    d_logp = -np.where(active, A * ratio, 0.0) / N
    z = (x - mu) / std
    d_mu = d_logp[:, None] * z / std
    d_std = d_logp[:, None] * (z * z - 1.0) / std - config.entropy_coef / N / std
    d_v = config.value_coef * 2.0 * (v - ret) / N
    grads = policy.backward(cache, d_mu, d_std, d_v)
    stats = LossStats(float(loss), float(policy_loss), float(value_loss), float(ent.mean()),
                      ratio, logp)
    return float(loss), grads, stats


def approx_kl(logp_old, logp_new) -> float:
    """Non-negative estimate of KL(old || new): mean of ``(r - 1) - log r``."""
    log_r = np.asarray(logp_new) - np.asarray(logp_old)
    return float(np.mean(np.expm1(log_r) - log_r))


def clip_grad_norm(grads: dict, max_norm: float) -> float:
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        for k in grads:
            grads[k] = grads[k] * scale
    return total


@dataclass
class UpdateStats:
    epochs_run: int
    minibatches_run: int
    approx_kl: float
    loss: float
    policy_loss: float
    value_loss: float
    stopped_early: bool
    value_loss_by_epoch: list = field(default_factory=list)


def ppo_update(policy: PolicyNet, buffer: dict, config: TrainerConfig,
               rng: np.random.Generator) -> UpdateStats:
    """Several epochs of shuffled minibatch steps on one agent's buffer.

    After each step the KL between the sampling policy and the updated one is
    estimated on that minibatch; once it exceeds ``target_kl`` the update
    stops.
    """
    size = len(buffer["adv"])
    if size != config.buffer_size:
        raise ValueError(f"buffer holds {size} samples, expected {config.buffer_size}")
    adv = np.asarray(buffer["adv"], dtype=float)
    if config.normalize_advantages:
        adv = (adv - adv.mean()) / max(adv.std(), ADV_STD_FLOOR)
    data = dict(buffer, adv=adv)
    mb = config.minibatch
    kl, last, steps, epochs, stopped = 0.0, None, 0, 0, False
    value_by_epoch = []
    for _ in range(config.ppo_epochs):
        epochs += 1
        order = rng.permutation(size)
        vl = []
        for start in range(0, size, mb):
            idx = order[start:start + mb]
            batch = {k: v[idx] for k, v in data.items()}
            _, grads, last = ppo_loss(policy, batch, config)
            vl.append(last.value_loss)
            clip_grad_norm(grads, config.grad_clip)
            policy.adam_step(grads, config.learning_rate)
            steps += 1
            mu, std, _, _ = policy.forward(batch["b"])
            kl = approx_kl(batch["logp_old"], gaussian_logprob(batch["raw"], mu, std))
            if kl > config.target_kl:
                stopped = True
                break
        value_by_epoch.append(float(np.mean(vl)))
        if stopped:
            break
    return UpdateStats(epochs, steps, kl, last.loss, last.policy_loss, last.value_loss,
                       stopped, value_by_epoch)


def early_stop(r_t: float, c_t: float, r_prev: float, c_prev: float,
               config: TrainerConfig) -> bool:
    """All four conditions: reward and quality above target, both plateaued."""
    if config.reward_threshold is None or config.quality_target is None:
        return False
    eps = config.plateau_margin
    return bool(r_t >= config.reward_threshold and c_t >= config.quality_target
                and abs(r_t - r_prev) <= eps and abs(c_t - c_prev) <= eps)
