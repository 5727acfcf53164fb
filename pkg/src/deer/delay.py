"""Random-dropping delayed observation wrapper.

Wraps any delay-free environment so the agent sees *information states*
instead of current states.  Every observation arrives with a baseline lag of
``d_I`` steps, and each scheduled delivery can additionally be dropped
(omega_t = 1), growing the lag by one step up to the cap ``d_I + d_M``.  The
constant-delay setting is the ``mu = 0`` special case.

Delay recursion for the realized lag z_t at a delivery event:

    omega_t = 0 (delivered)         -> z_t = d_I
    omega_t = 1 and z < d_I + d_M   -> z_t = z_{t-1} + 1
    omega_t = 1 at the cap          -> z_t = d_I + d_M

The information state is always (s_{t-z}, a_{t-z}, ..., a_{t-1}): the newest
state the agent has seen plus every action taken since that state was
generated.  Delivered rewards follow the same schedule: a fresh delivery
carries r_{t-d_I}; a dropped one repeats the previous delivered reward.

Timeline conventions (these fix the scripted-trace indexing):

* Physical timestep t counts true environment time; the drop source is
  indexed by t starting at t=0.
* The first ``d_I`` actions are the configured blind actions; their
  timesteps have no scheduled delivery, so their omega entries are consumed
  and ignored.
* The initial state is always observable: the delivery at t = d_I is forced
  fresh.  A scripted drop source must supply 0 there.
* After the wrapped env reaches its horizon H, the wrapper drains: the final
  d_I - 1 deliveries are forced fresh (no omega consumed) so the reward tail
  is delivered.  The episode ends at t = H + d_I - 1, after H - 1 agent
  steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import Env


@dataclass(frozen=True)
class DelayConfig:
    d_i: int
    d_m: int = 0
    mu: float = 0.0
    initial_actions: tuple = ()   # length d_i; empty means zero actions
    seed: int = 0

    def __post_init__(self):
        if self.d_i < 1:
            raise ValueError(f"d_i must be >= 1, got {self.d_i}")
        if self.d_m < 0:
            raise ValueError(f"d_m must be >= 0, got {self.d_m}")
        if not (0.0 <= self.mu < 1.0):
            raise ValueError(f"mu must lie in [0, 1), got {self.mu}")
        if self.initial_actions and len(self.initial_actions) != self.d_i:
            raise ValueError(
                f"initial_actions must have length d_i={self.d_i}, got {len(self.initial_actions)}")

    @property
    def max_delay(self) -> int:
        return self.d_i + self.d_m


@dataclass(frozen=True)
class InformationState:
    base_state: np.ndarray
    actions: tuple
    z: int

    def __post_init__(self):
        if len(self.actions) != self.z:
            raise ValueError(f"information state needs z={self.z} actions, got {len(self.actions)}")

    def flatten(self, pad_to: int | None = None) -> np.ndarray:
        """Concatenate (state, actions), zero-padding the action block to pad_to."""
        parts = [np.asarray(self.base_state, dtype=np.float64).ravel()]
        parts += [np.asarray(a, dtype=np.float64).ravel() for a in self.actions]
        if pad_to is not None:
            if pad_to < self.z:
                raise ValueError(f"pad_to={pad_to} is below z={self.z}")
            if self.z:
                adim = np.asarray(self.actions[0]).size
                parts.append(np.zeros((pad_to - self.z) * adim))
        return np.concatenate(parts)


def update_z(z_prev: int, dropped: bool, cfg: DelayConfig) -> int:
    """One step of the delay recursion; validates the incoming lag."""
    if not (cfg.d_i <= z_prev <= cfg.max_delay):
        raise ValueError(f"z={z_prev} outside [{cfg.d_i}, {cfg.max_delay}]")
    if not dropped:
        return cfg.d_i
    return min(z_prev + 1, cfg.max_delay)


def build_information_state(prev: InformationState, a_prev,
                            delivery: tuple | None, cfg: DelayConfig) -> InformationState:
    """Advance the information state by one agent action.

    ``delivery`` is None for a dropped observation, else a tuple
    (fresh_state, z) for a fresh one.  The action window slides within
    ``prev.actions + (a_prev,)``; no external history is needed.
    """
    extended = tuple(prev.actions) + (np.asarray(a_prev, dtype=np.float64),)
    if delivery is not None:
        state, z = delivery
        if z > len(extended):
            raise ValueError(f"action history underflow: need {z} actions, have {len(extended)}")
        return InformationState(np.asarray(state, dtype=np.float64), extended[-z:], z)
    z_new = update_z(prev.z, True, cfg)
    if z_new == prev.z + 1:
        return InformationState(prev.base_state, extended, z_new)
    # dropped at the cap: keep the stale base state, slide the window
    return InformationState(prev.base_state, extended[-z_new:], z_new)


class BernoulliDrops:
    """omega_t ~ Bernoulli(mu) from a dedicated seeded stream."""

    def __init__(self, mu: float, seed: int):
        self.mu = mu
        self._rng = np.random.default_rng(seed)

    def draw(self, t: int) -> int:
        return int(self._rng.random() < self.mu)


class ScriptedDrops:
    """omega_t read from a fixed list indexed by physical timestep."""

    def __init__(self, omegas):
        self.omegas = [int(w) for w in omegas]
        if any(w not in (0, 1) for w in self.omegas):
            raise ValueError("scripted omegas must be 0 or 1")

    def draw(self, t: int) -> int:
        if t >= len(self.omegas):
            raise IndexError(f"scripted drop sequence exhausted at t={t}")
        return self.omegas[t]


class DelayProcess:
    """Runs one delayed episode over a wrapped env.

    Tracks the full true trajectory (states, rewards, actions) so tests can
    replay the recorded actions through the raw env and confirm that every
    delivered base state is genuine.
    """

    def __init__(self, env: Env, cfg: DelayConfig, drop_source=None):
        self.env = env
        self.cfg = cfg
        self.drops = drop_source if drop_source is not None else BernoulliDrops(cfg.mu, cfg.seed)
        self.true_states: list[np.ndarray] = []
        self.true_rewards: list[float] = []
        self.actions: list[np.ndarray] = []
        self.t = 0
        self.info: InformationState | None = None
        self.delivered_reward = 0.0
        self.last_omega = 0
        self.done = False

    @property
    def horizon(self) -> int:
        return self.env.spec.horizon

    def _blind_actions(self) -> list[np.ndarray]:
        if self.cfg.initial_actions:
            return [np.asarray(a, dtype=np.float64) for a in self.cfg.initial_actions]
        return [np.zeros(self.env.spec.action_dim) for _ in range(self.cfg.d_i)]

    def delayed_reset(self, seed: int) -> InformationState:
        cfg = self.cfg
        state = self.env.reset(seed)
        self.true_states = [np.asarray(state, dtype=np.float64)]
        self.true_rewards = []
        self.actions = []
        self.done = False
        for k, blind in enumerate(self._blind_actions()):
            tr = self.env.step(self.true_states[-1], blind)
            self.true_states.append(tr.next_state)
            self.true_rewards.append(tr.reward)
            self.actions.append(tr.action)
            self.drops.draw(k)            # no delivery scheduled yet; value ignored
        omega = self.drops.draw(cfg.d_i)  # the initial state is always observable
        if isinstance(self.drops, ScriptedDrops) and omega != 0:
            raise ValueError("scripted drop at the initial delivery contradicts the model "
                             "(the initial state is always observable)")
        self.t = cfg.d_i
        self.last_omega = 0
        self.info = InformationState(self.true_states[0], tuple(self.actions), cfg.d_i)
        self.delivered_reward = self.true_rewards[0]
        return self.info

    def delayed_step(self, action) -> tuple[InformationState, float, bool]:
        if self.info is None:
            raise RuntimeError("delayed_step before delayed_reset")
        if self.done:
            raise RuntimeError("delayed_step after the episode ended")
        cfg = self.cfg
        t_new = self.t + 1
        if len(self.true_rewards) < self.horizon:
            tr = self.env.step(self.true_states[-1], action)
            self.true_states.append(tr.next_state)
            self.true_rewards.append(tr.reward)
            self.actions.append(tr.action)
        else:
            # horizon reached: record the action, drain the remaining deliveries
            self.actions.append(np.asarray(action, dtype=np.float64))

        if t_new <= self.horizon:
            omega = self.drops.draw(t_new)
        else:
            omega = 0   # drain deliveries are forced fresh
        a_prev = self.actions[t_new - 1]
        if omega == 0:
            z = update_z(self.info.z, False, cfg)
            delivery = (self.true_states[t_new - z], z)
            self.delivered_reward = self.true_rewards[t_new - z]
        else:
            delivery = None
            # dropped: the delivered reward repeats
        self.info = build_information_state(self.info, a_prev, delivery, cfg)
        self.t = t_new
        self.last_omega = omega
        self.done = t_new >= self.horizon + cfg.d_i - 1
        return self.info, self.delivered_reward, self.done

    def trace_row(self) -> dict:
        """Current step in the JSON-lines trace format."""
        info = self.info
        return {
            "t": self.t,
            "omega": self.last_omega,
            "z": info.z,
            "base_state": np.asarray(info.base_state).tolist(),
            "actions": [np.asarray(a).tolist() for a in info.actions],
            "delivered_reward": float(self.delivered_reward),
        }

    def true_return(self) -> float:
        return float(sum(self.true_rewards))
