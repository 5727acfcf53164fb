"""Soft actor-critic on fixed-length inputs.

The policy is input-agnostic: the same machinery trains on raw states
(delay-free baseline), context representations, flattened information
states, or predicted states.  Actions are handled internally in tanh space
([-1, 1] per dimension) and mapped affinely to the env bounds at the
boundary; replay stores tanh-space actions.

Update rule (standard SAC with automatic temperature):

    y  = r + gamma * (1 - done) * (min_i Q'_i(s', a') - alpha * log pi(a'|s'))
    critics minimize MSE to y; the actor maximizes min_i Q_i(s, a) - alpha
    * log pi(a|s) via the reparameterization trick; alpha follows the
    gradient of -log_alpha * (log pi + target_entropy); targets track the
    critics by Polyak averaging with coefficient tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import storage
from .nn import Adam, DenseLayer, Tensor, gradients, merge_parameters
from .nn import autodiff as ad

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


@dataclass(frozen=True)
class SacConfig:
    hidden: tuple = (256, 256)
    lr: float = 3e-4
    batch_size: int = 256
    gamma: float = 0.99
    tau: float = 0.005
    buffer_capacity: int = 100_000
    training_threshold: int = 1000
    alpha_init: float = 0.2
    target_entropy: float | None = None   # None -> -action_dim
    updates_per_step: int = 1

    def __post_init__(self):
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError("gamma must lie in [0, 1)")
        if not (0.0 < self.tau <= 1.0):
            raise ValueError("tau must lie in (0, 1]")


class Mlp:
    """ReLU stack with an identity head."""

    def __init__(self, in_dim: int, hidden: tuple, out_dim: int,
                 rng: np.random.Generator, name: str):
        dims = [in_dim, *hidden, out_dim]
        self.layers = []
        for i in range(len(dims) - 1):
            act = "relu" if i < len(dims) - 2 else "identity"
            self.layers.append(DenseLayer(dims[i], dims[i + 1], act, rng, f"{name}.l{i}"))

    @property
    def parameters(self) -> dict[str, Tensor]:
        return merge_parameters(*self.layers)

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x

    __call__ = forward


class ReplayBuffer:
    """Fixed-capacity ring with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int, seed: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, action_dim))
        self.rew = np.zeros(capacity)
        self.obs2 = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.ptr = 0
        self.size = 0
        self._rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return self.size

    def add(self, obs, act, rew, obs2, done) -> None:
        i = self.ptr
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.obs2[i] = obs2
        self.done[i] = done
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int) -> dict[str, np.ndarray]:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = self._rng.integers(0, self.size, size=batch_size)
        return {"obs": self.obs[idx], "act": self.act[idx], "rew": self.rew[idx],
                "obs2": self.obs2[idx], "done": self.done[idx]}


def _gaussian_logp(noise: np.ndarray, log_std: Tensor) -> Tensor:
    """per-sample log N(u; mean, std) where u = mean + std*noise."""
    const = -0.5 * math.log(2.0 * math.pi)
    per_dim = (-0.5) * (noise ** 2) - log_std + const
    return ad.sum_(per_dim, axis=1, keepdims=True)


def _tanh_correction(u: Tensor) -> Tensor:
    """sum_j log(1 - tanh(u_j)^2), numerically stable."""
    per_dim = 2.0 * (math.log(2.0) - u - ad.softplus(-2.0 * u))
    return ad.sum_(per_dim, axis=1, keepdims=True)


class SacPolicy:
    def __init__(self, input_dim: int, action_dim: int,
                 action_low: np.ndarray, action_high: np.ndarray,
                 cfg: SacConfig = SacConfig(), seed: int = 0):
        self.input_dim = input_dim
        self.action_dim = action_dim
        self.cfg = cfg
        low = np.asarray(action_low, dtype=np.float64)
        high = np.asarray(action_high, dtype=np.float64)
        self.action_center = (high + low) / 2.0
        self.action_scale = (high - low) / 2.0
        rng = np.random.default_rng(seed)
        self.actor = Mlp(input_dim, cfg.hidden, 2 * action_dim, rng, "actor")
        self.q1 = Mlp(input_dim + action_dim, cfg.hidden, 1, rng, "q1")
        self.q2 = Mlp(input_dim + action_dim, cfg.hidden, 1, rng, "q2")
        self.q1_target = Mlp(input_dim + action_dim, cfg.hidden, 1, rng, "q1t")
        self.q2_target = Mlp(input_dim + action_dim, cfg.hidden, 1, rng, "q2t")
        self._copy_params(self.q1, self.q1_target)
        self._copy_params(self.q2, self.q2_target)
        self.log_alpha = Tensor.param(np.array([math.log(cfg.alpha_init)]))
        self.target_entropy = (-float(action_dim) if cfg.target_entropy is None
                               else cfg.target_entropy)
        self._actor_params = self.actor.parameters
        self._critic_params = merge_parameters(self.q1, self.q2)
        self.opt_actor = Adam(self._actor_params, lr=cfg.lr)
        self.opt_critic = Adam(self._critic_params, lr=cfg.lr)
        self.opt_alpha = Adam({"log_alpha": self.log_alpha}, lr=cfg.lr)
        self.rng = np.random.default_rng(seed + 1)
        self.updates = 0

    @staticmethod
    def _copy_params(src: Mlp, dst: Mlp) -> None:
        for a, b in zip(src.parameters.values(), dst.parameters.values()):
            b.data[...] = a.data

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha.data[0]))

    # -- acting ----------------------------------------------------------------

    def _actor_heads(self, obs: Tensor) -> tuple[Tensor, Tensor]:
        out = self.actor(obs)
        mean = out[:, :self.action_dim]
        log_std = ad.clip(out[:, self.action_dim:], LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std

    def sample_action(self, obs: Tensor, noise: np.ndarray) -> tuple[Tensor, Tensor]:
        """Reparameterized tanh-space action and its log-probability."""
        mean, log_std = self._actor_heads(obs)
        u = mean + ad.exp(log_std) * noise
        a = ad.tanh(u)
        logp = _gaussian_logp(noise, log_std) - _tanh_correction(u)
        return a, logp

    def act_tanh(self, obs: np.ndarray, deterministic: bool = False) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (self.input_dim,):
            raise ValueError(f"policy input shape {obs.shape}, expected ({self.input_dim},)")
        ot = Tensor(obs[None, :])
        if deterministic:
            mean, _ = self._actor_heads(ot)
            return np.tanh(mean.data[0])
        noise = self.rng.standard_normal((1, self.action_dim))
        a, _ = self.sample_action(ot, noise)
        return a.data[0].copy()

    def to_env_action(self, tanh_action: np.ndarray) -> np.ndarray:
        return self.action_center + self.action_scale * tanh_action

    def act(self, obs: np.ndarray, deterministic: bool = False) -> np.ndarray:
        """Action in env units, always within bounds."""
        return self.to_env_action(self.act_tanh(obs, deterministic))

    # -- learning --------------------------------------------------------------

    def critic_loss(self, batch: dict[str, np.ndarray]) -> Tensor:
        b = batch["obs"].shape[0]
        obs2 = Tensor(batch["obs2"])
        noise2 = self.rng.standard_normal((b, self.action_dim))
        a2, logp2 = self.sample_action(obs2, noise2)
        in2 = np.concatenate([batch["obs2"], a2.data], axis=1)
        q1t = self.q1_target(Tensor(in2)).data
        q2t = self.q2_target(Tensor(in2)).data
        alpha = self.alpha
        y = batch["rew"][:, None] + self.cfg.gamma * (1.0 - batch["done"][:, None]) * (
            np.minimum(q1t, q2t) - alpha * logp2.data)
        obs_act = Tensor(np.concatenate([batch["obs"], batch["act"]], axis=1))
        d1 = self.q1(obs_act) - y
        d2 = self.q2(obs_act) - y
        return (d1 * d1).mean() + (d2 * d2).mean()

    def actor_and_alpha_loss(self, batch: dict[str, np.ndarray]) -> tuple[Tensor, Tensor, Tensor]:
        b = batch["obs"].shape[0]
        obs = Tensor(batch["obs"])
        noise = self.rng.standard_normal((b, self.action_dim))
        a, logp = self.sample_action(obs, noise)
        qin = ad.concat([obs, a], axis=1)
        qmin = ad.minimum(self.q1(qin), self.q2(qin))
        actor_loss = (self.alpha * logp - qmin).mean()
        alpha_loss = ((-1.0) * self.log_alpha * (logp.data + self.target_entropy)).mean()
        return actor_loss, alpha_loss, logp

    def update(self, batch: dict[str, np.ndarray]) -> dict[str, float]:
        closs = self.critic_loss(batch)
        if not np.isfinite(closs.data):
            raise RuntimeError(f"SAC critic loss diverged at update {self.updates}")
        self.opt_critic.step(gradients(closs, self._critic_params))

        aloss, alph_loss, _ = self.actor_and_alpha_loss(batch)
        if not (np.isfinite(aloss.data) and np.isfinite(alph_loss.data)):
            raise RuntimeError(f"SAC actor/alpha loss diverged at update {self.updates}")
        self.opt_actor.step(gradients(aloss, self._actor_params))
        self.opt_alpha.step(gradients(alph_loss, {"log_alpha": self.log_alpha}))

        tau = self.cfg.tau
        for src, dst in ((self.q1, self.q1_target), (self.q2, self.q2_target)):
            for a, b in zip(src.parameters.values(), dst.parameters.values()):
                b.data *= 1.0 - tau
                b.data += tau * a.data
        self.updates += 1
        return {"critic_loss": float(closs.data), "actor_loss": float(aloss.data),
                "alpha_loss": float(alph_loss.data), "alpha": self.alpha}


def save_policy(path: str, policy: SacPolicy, meta: dict | None = None) -> None:
    arrays = {}
    for name, t in merge_parameters(policy.actor, policy.q1, policy.q2,
                                    policy.q1_target, policy.q2_target).items():
        arrays[name] = t.data
    arrays["log_alpha"] = policy.log_alpha.data
    arrays["action_low"] = policy.action_center - policy.action_scale
    arrays["action_high"] = policy.action_center + policy.action_scale
    full_meta = {
        "input_dim": policy.input_dim, "action_dim": policy.action_dim,
        "hidden": list(policy.cfg.hidden), "updates": policy.updates,
    }
    if meta:
        full_meta.update(meta)
    storage.save_arrays(path, full_meta, arrays)


def load_policy(path: str, cfg: SacConfig | None = None) -> tuple[SacPolicy, dict]:
    meta, arrays = storage.load_arrays(path)
    cfg = replace(cfg or SacConfig(), hidden=tuple(meta["hidden"]))
    policy = SacPolicy(meta["input_dim"], meta["action_dim"],
                       arrays["action_low"], arrays["action_high"], cfg)
    for name, t in merge_parameters(policy.actor, policy.q1, policy.q2,
                                    policy.q1_target, policy.q2_target).items():
        t.data[...] = arrays[name]
    policy.log_alpha.data[...] = arrays["log_alpha"]
    policy.updates = int(meta["updates"])
    return policy, meta
