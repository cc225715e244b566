"""The outer training loop: roll out, score, update each agent, check for a plateau."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..game import GameParams
from .env import ACTION_DIM, SyntheticEnv
from .policy import PolicyNet
from .ppo import TrainerConfig, compute_rewards, early_stop, ppo_update, rollout_episode

CHECKPOINT_VERSION = 1


@dataclass
class TrainResult:
    policies: list[PolicyNet]
    curve: list[dict] = field(default_factory=list)
    episodes_run: int = 0
    stopped_early: bool = False
    interrupted: bool = False


def _streams(seed: int, n: int):
    root = np.random.SeedSequence(int(seed))
    init, roll, upd = root.spawn(3)
    make = lambda ss: np.random.Generator(np.random.PCG64(ss))  # noqa: E731
    return ([make(s) for s in init.spawn(n)], make(roll), [make(s) for s in upd.spawn(n)])


def init_policies(config: TrainerConfig, seed: int) -> list[PolicyNet]:
    inits, _, _ = _streams(seed, config.n_agents)
    return [PolicyNet(config.belief_dims.total, ACTION_DIM, config.hidden, rng=r) for r in inits]


def train(env: SyntheticEnv, config: TrainerConfig = TrainerConfig(), seed: int = 0,
          game_params: GameParams | None = None, checkpoint_path=None,
          checkpoint_every: int = 0, progress=None) -> TrainResult:
    """Train one policy per agent for up to ``config.max_episodes`` episodes.

    An episode collects ``buffer_size`` fresh rollouts (the buffer starts empty
    each episode), then runs one PPO update per agent on its own transitions.
    The curve records, per episode, the mean reward over agents and rollouts,
    the mean final-agent score, and the mean loss and KL of the updates.
    A keyboard interrupt ends training after writing a checkpoint of the last
    finished episode.
    """
    params = game_params or config.game_params(env)
    if params.n != config.n_agents:
        raise ValueError("game and trainer disagree on the number of agents")
    inits, roll_rng, upd_rngs = _streams(seed, params.n)
    policies = [PolicyNet(config.belief_dims.total, ACTION_DIM, config.hidden, rng=r) for r in inits]
    result = TrainResult(policies)
    reward_sum = np.zeros(params.n)
    try:
        for t in range(1, config.max_episodes + 1):
            trace = reward_sum / (t - 1) if t > 1 else np.zeros(params.n)
            traj = rollout_episode(env, policies, params, roll_rng, config.buffer_size,
                                   trace, config.belief_dims)
            rw = compute_rewards(traj, params, policies, config.gamma_disc)
            losses, kls = [], []
            for i, net in enumerate(policies):
                buffer = {"b": traj.beliefs[i], "raw": traj.raw[i], "logp_old": traj.logp[i],
                          "adv": rw.advantages[i], "ret": rw.rewards[i]}
                st = ppo_update(net, buffer, config, upd_rngs[i])
                losses.append(st.loss)
                kls.append(st.approx_kl)
            reward_sum += rw.rewards.mean(axis=1)
            row = {"episode": t, "mean_reward": float(rw.rewards.mean()),
                   "mean_quality": float(traj.scores[-1].mean()),
                   "loss": float(np.mean(losses)), "kl": float(np.mean(kls))}
            result.curve.append(row)
            result.episodes_run = t
            if progress is not None:
                progress(row)
            if checkpoint_path and checkpoint_every and t % checkpoint_every == 0:
                save_checkpoint(checkpoint_path, result, config, env, seed)
            if t >= 2:
                prev = result.curve[-2]
                if early_stop(row["mean_reward"], row["mean_quality"], prev["mean_reward"],
                              prev["mean_quality"], config):
                    result.stopped_early = True
                    break
    except KeyboardInterrupt:
        result.interrupted = True
    if checkpoint_path:
        save_checkpoint(checkpoint_path, result, config, env, seed)
    return result


def _config_dict(config: TrainerConfig) -> dict:
    return asdict(config)


def save_checkpoint(path, result: TrainResult, config: TrainerConfig, env: SyntheticEnv,
                    seed: int) -> None:
    """Write every parameter vector plus the settings as JSON, atomically."""
    env_d = asdict(env)
    env_d["surface"] = env.surface.value
    env_d["mode"] = env.mode.value
    data = {
        "version": CHECKPOINT_VERSION,
        "seed": int(seed),
        "episodes_run": result.episodes_run,
        "trainer": _config_dict(config),
        "env": env_d,
        "policies": [p.to_dict() for p in result.policies],
        "curve": result.curve,
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh)
        fh.write("\n")
    os.replace(tmp, path)


def load_checkpoint(path) -> dict:
    """Read a checkpoint back; policies are rebuilt as ``PolicyNet`` objects."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {data.get('version')!r}")
    data["policies"] = [PolicyNet.from_dict(p) for p in data["policies"]]
    data["trainer"] = TrainerConfig(**data["trainer"])
    data["env"] = SyntheticEnv(**data["env"])
    return data
