"""Small actor-critic network in plain numpy with hand-written backprop and Adam."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .env import squash, to_config

STD_FLOOR = 1e-3
LOG_2PI = math.log(2.0 * math.pi)

PARAM_NAMES = ("W1", "b1", "Wm", "bm", "Ws", "bs", "Wv", "bv")
ACTOR_NAMES = ("W1", "b1", "Wm", "bm", "Ws", "bs")
CRITIC_NAMES = ("Wv", "bv")


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class PolicyNet:
    """One shared tanh layer feeding a Gaussian actor head and a scalar critic head.

    ``theta`` (shared layer and actor) and ``phi`` (critic) live in one
    parameter dict so a single optimizer step updates both.
    """

    def __init__(self, in_dim: int, act_dim: int = 6, hidden: int = 64,
                 rng: np.random.Generator | None = None, init_std: float = 0.5):
        rng = rng or np.random.default_rng(0)
        self.in_dim, self.act_dim, self.hidden = in_dim, act_dim, hidden
        s_in = 1.0 / math.sqrt(in_dim)
        s_h = 1.0 / math.sqrt(hidden)
        # softplus(bs) + floor == init_std
        bs0 = math.log(math.expm1(init_std - STD_FLOOR))
        self.params = {
            "W1": rng.normal(0.0, s_in, (in_dim, hidden)),
            "b1": np.zeros(hidden),
            "Wm": rng.normal(0.0, 0.01 * s_h, (hidden, act_dim)),
            "bm": np.zeros(act_dim),
            "Ws": rng.normal(0.0, 0.01 * s_h, (hidden, act_dim)),
            "bs": np.full(act_dim, bs0),
            "Wv": rng.normal(0.0, s_h, (hidden, 1)),
            "bv": np.zeros(1),
        }
        self._m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self._v = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.steps = 0

    @property
    def theta(self) -> dict:
        return {k: self.params[k] for k in ACTOR_NAMES}

    @property
    def phi(self) -> dict:
        return {k: self.params[k] for k in CRITIC_NAMES}

    def copy(self) -> "PolicyNet":
        other = PolicyNet.__new__(PolicyNet)
        other.in_dim, other.act_dim, other.hidden = self.in_dim, self.act_dim, self.hidden
        other.params = {k: v.copy() for k, v in self.params.items()}
        other._m = {k: v.copy() for k, v in self._m.items()}
        other._v = {k: v.copy() for k, v in self._v.items()}
        other.steps = self.steps
        return other

    def forward(self, b):
        """Mean, std and value for a batch of beliefs, plus the cache for backprop."""
        p = self.params
        b = np.atleast_2d(np.asarray(b, dtype=float))
        h = np.tanh(b @ p["W1"] + p["b1"])
        mu = h @ p["Wm"] + p["bm"]
        zs = h @ p["Ws"] + p["bs"]
        std = softplus(zs) + STD_FLOOR
        v = (h @ p["Wv"] + p["bv"])[:, 0]
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(std)) and np.all(np.isfinite(v))):
            raise FloatingPointError("policy network produced a non-finite output")
        return mu, std, v, (b, h, zs)

    def value(self, b):
        return self.forward(b)[2]

    def backward(self, cache, d_mu, d_std, d_v) -> dict:
        """Parameter gradients from gradients on the three heads."""
        p = self.params
        b, h, zs = cache
        d_zs = d_std * sigmoid(zs)
        d_v = np.asarray(d_v)[:, None]
        grads = {
            "Wm": h.T @ d_mu, "bm": d_mu.sum(axis=0),
            "Ws": h.T @ d_zs, "bs": d_zs.sum(axis=0),
            "Wv": h.T @ d_v, "bv": d_v.sum(axis=0),
        }
        d_h = d_mu @ p["Wm"].T + d_zs @ p["Ws"].T + d_v @ p["Wv"].T
        d_pre = d_h * (1.0 - h * h)
        grads["W1"] = b.T @ d_pre
        grads["b1"] = d_pre.sum(axis=0)
        return grads

    def adam_step(self, grads: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8) -> None:
        self.steps += 1
        c1 = 1.0 - beta1 ** self.steps
        c2 = 1.0 - beta2 ** self.steps
        for k, g in grads.items():
            self._m[k] = beta1 * self._m[k] + (1.0 - beta1) * g
            self._v[k] = beta2 * self._v[k] + (1.0 - beta2) * g * g
            self.params[k] = self.params[k] - lr * (self._m[k] / c1) / (np.sqrt(self._v[k] / c2) + eps)

    def to_dict(self) -> dict:
        return {"in_dim": self.in_dim, "act_dim": self.act_dim, "hidden": self.hidden,
                "params": {k: v.tolist() for k, v in self.params.items()}}

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyNet":
        net = cls(data["in_dim"], data["act_dim"], data["hidden"])
        net.params = {k: np.asarray(v, dtype=float).reshape(net.params[k].shape)
                      for k, v in data["params"].items()}
        return net


def gaussian_logprob(x, mu, std):
    """Log density of a diagonal Gaussian, summed over the last axis."""
    z = (x - mu) / std
    return (-0.5 * z * z - np.log(std) - 0.5 * LOG_2PI).sum(axis=-1)


def gaussian_entropy(std):
    return (np.log(std) + 0.5 * (LOG_2PI + 1.0)).sum(axis=-1)


class ActionSample(NamedTuple):
    raw: np.ndarray
    action: np.ndarray
    logprob: np.ndarray

    @property
    def config(self) -> np.ndarray:
        """The sampled generation configs in their native units."""
        return to_config(self.action)


def sample_action(policy: PolicyNet, belief, rng: np.random.Generator) -> ActionSample:
    """Draw actions for a batch of beliefs.

    ``raw`` is the Gaussian draw, ``action`` its clamp into ``[-1, 1]``. The
    log-probability is that of ``raw``; the clamp is treated as deterministic
    post-processing.
    """
    mu, std, _, _ = policy.forward(belief)
    raw = mu + std * rng.standard_normal(mu.shape)
    return ActionSample(raw, squash(raw), gaussian_logprob(raw, mu, std))
