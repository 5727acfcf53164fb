"""Closed-form delay-free environments and their expert policies.

Three desk-scale tasks stand in for physics-engine benchmarks:

* ``LinearSystemEnv``: a damped double integrator with quadratic cost.  With
  sigma=0 its rollouts are exactly reproducible from (A, B, x0, actions),
  which makes it the oracle for encoder fidelity tests.  Its expert is the
  infinite-horizon discrete LQR gain.
* ``PointMassEnv``: 2-d goal reaching with drag, reward
  -(dist to goal)^2 - 0.01*|a|^2.
* ``PendulumEnv``: classic torque-limited swing-up, integrated with explicit
  Euler so an independent integrator can reproduce it to machine precision.

Expert policies for the nonlinear tasks are delay-free SAC policies trained
past a configured return threshold; see ``SacExpert``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    horizon: int

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        low = np.asarray(self.action_low, dtype=np.float64)
        high = np.asarray(self.action_high, dtype=np.float64)
        if low.shape != (self.action_dim,) or high.shape != (self.action_dim,):
            raise ValueError("action bounds must match action_dim")
        if not (np.isfinite(low).all() and np.isfinite(high).all()):
            raise ValueError("action bounds must be finite")
        if not (low < high).all():
            raise ValueError("action bounds need low < high per dimension")
        object.__setattr__(self, "action_low", low)
        object.__setattr__(self, "action_high", high)


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


class Env:
    """Base: seeded reset, value-style step with an internal step counter."""

    spec: EnvSpec

    def reset(self, seed: int) -> np.ndarray:
        raise NotImplementedError

    def _dynamics(self, state: np.ndarray, action: np.ndarray) -> tuple[np.ndarray, float]:
        raise NotImplementedError

    def step(self, state: np.ndarray, action: np.ndarray) -> Transition:
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (self.spec.action_dim,):
            raise ValueError(
                f"{self.spec.name}: action shape {action.shape}, expected ({self.spec.action_dim},)")
        if not np.isfinite(action).all():
            raise ValueError(f"{self.spec.name}: non-finite action {action}")
        action = np.clip(action, self.spec.action_low, self.spec.action_high)
        state = np.asarray(state, dtype=np.float64)
        next_state, reward = self._dynamics(state, action)
        if not np.isfinite(reward):
            raise FloatingPointError(f"{self.spec.name}: non-finite reward")
        self._t += 1
        done = self._t >= self.spec.horizon
        return Transition(state, action, float(reward), next_state, done)

    def sample_action(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.spec.action_low, self.spec.action_high)


class LinearSystemEnv(Env):
    """x' = A x + B u + sigma*noise, reward = -(x'Qx + u'Ru).

    Default A/B form a damped double integrator in 2-d: positions integrate
    velocities, velocities decay by 5% per step and are driven by the action.
    Spectral radius of A is 1.0, so states stay bounded over the horizon.
    """

    def __init__(self, sigma: float = 0.0, dt: float = 0.1, damping: float = 0.1,
                 position_decay: float = 0.99, horizon: int = 200):
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        a = np.eye(4)
        a[0, 0] = position_decay
        a[1, 1] = position_decay
        a[0, 2] = dt
        a[1, 3] = dt
        a[2, 2] = 1.0 - damping
        a[3, 3] = 1.0 - damping
        b = np.zeros((4, 2))
        b[2, 0] = dt
        b[3, 1] = dt
        self.A = a
        self.B = b
        self.Q = np.diag([1.0, 1.0, 0.05, 0.05])
        self.R = 0.01 * np.eye(2)
        self.sigma = sigma
        self.goal = np.zeros(4)
        self.spec = EnvSpec("linear", 4, 2, -np.ones(2), np.ones(2), horizon)
        if np.abs(np.linalg.eigvals(self.A)).max() > 1.05:
            raise ValueError("spectral radius of A exceeds 1.05")
        self._rng = np.random.default_rng(0)
        self._t = 0

    def reset(self, seed: int) -> np.ndarray:
        self._rng = np.random.default_rng(seed)
        self._t = 0
        pos = self._rng.uniform(-1.0, 1.0, size=2)
        vel = self._rng.uniform(-0.5, 0.5, size=2)
        return np.concatenate([pos, vel])

    def _dynamics(self, state, action):
        nxt = self.A @ state + self.B @ action
        if self.sigma > 0:
            nxt = nxt + self.sigma * self._rng.standard_normal(4)
        reward = -(state @ self.Q @ state + action @ self.R @ action)
        return nxt, reward


class PointMassEnv(Env):
    """2-d point mass in a walled arena steering toward a fixed goal.

    State (px, py, vx, vy); reward -|pos - goal|^2 - 0.01|a|^2.  Velocity is
    capped and positions clip at the arena walls (the wall zeroes the normal
    velocity component), so states stay bounded over any horizon.
    """

    def __init__(self, sigma: float = 0.0, dt: float = 0.1, drag: float = 0.5,
                 init_noise: float = 0.1, arena: float = 3.0, max_speed: float = 2.0,
                 horizon: int = 200):
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        self.dt = dt
        self.drag = drag
        self.sigma = sigma
        self.init_noise = init_noise
        self.arena = arena
        self.max_speed = max_speed
        self.goal = np.array([0.8, 0.6])
        self.spec = EnvSpec("pointmass", 4, 2, -np.ones(2), np.ones(2), horizon)
        self._rng = np.random.default_rng(0)
        self._t = 0

    def reset(self, seed: int) -> np.ndarray:
        self._rng = np.random.default_rng(seed)
        self._t = 0
        state = np.zeros(4)
        if self.init_noise > 0:
            state[:2] = self._rng.uniform(-self.init_noise, self.init_noise, size=2)
        return state

    def _dynamics(self, state, action):
        pos, vel = state[:2], state[2:]
        new_vel = vel + self.dt * (action - self.drag * vel)
        if self.sigma > 0:
            new_vel = new_vel + self.sigma * self._rng.standard_normal(2)
        new_vel = np.clip(new_vel, -self.max_speed, self.max_speed)
        new_pos = pos + self.dt * new_vel
        hit = np.abs(new_pos) > self.arena
        new_pos = np.clip(new_pos, -self.arena, self.arena)
        new_vel = np.where(hit, 0.0, new_vel)
        err = pos - self.goal
        reward = -(err @ err) - 0.01 * (action @ action)
        return np.concatenate([new_pos, new_vel]), reward


def pendulum_angle(state: np.ndarray) -> tuple[float, float]:
    """Recover (theta, theta_dot) from the (cos, sin, vel) observation."""
    return float(np.arctan2(state[1], state[0])), float(state[2])


class PendulumEnv(Env):
    """Torque-limited swing-up, explicit-Euler integration.

    State observation (cos th, sin th, th_dot) with th = 0 upright.  Explicit
    Euler: th advances by the OLD velocity, then the velocity updates from
    the torque and gravity at the old angle.
    """

    def __init__(self, sigma: float = 0.0, dt: float = 0.05, g: float = 10.0,
                 m: float = 1.0, length: float = 1.0, max_torque: float = 2.0,
                 max_speed: float = 8.0, horizon: int = 200):
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        self.dt = dt
        self.g = g
        self.m = m
        self.length = length
        self.max_speed = max_speed
        self.sigma = sigma
        self.spec = EnvSpec("pendulum", 3, 1,
                            np.array([-max_torque]), np.array([max_torque]), horizon)
        self._rng = np.random.default_rng(0)
        self._t = 0

    def reset(self, seed: int) -> np.ndarray:
        self._rng = np.random.default_rng(seed)
        self._t = 0
        theta = self._rng.uniform(-np.pi, np.pi)
        vel = self._rng.uniform(-1.0, 1.0)
        return np.array([np.cos(theta), np.sin(theta), vel])

    def _dynamics(self, state, action):
        theta, vel = pendulum_angle(state)
        torque = action[0]
        angle_err = ((theta + np.pi) % (2 * np.pi)) - np.pi
        reward = -(angle_err ** 2 + 0.1 * vel ** 2 + 0.001 * torque ** 2)
        acc = (3.0 * self.g / (2.0 * self.length)) * np.sin(theta) \
            + (3.0 / (self.m * self.length ** 2)) * torque
        new_theta = theta + self.dt * vel
        new_vel = np.clip(vel + self.dt * acc, -self.max_speed, self.max_speed)
        if self.sigma > 0:
            new_vel = new_vel + self.sigma * self._rng.standard_normal()
        nxt = np.array([np.cos(new_theta), np.sin(new_theta), new_vel])
        return nxt, reward


ENV_BUILDERS = {
    "linear": LinearSystemEnv,
    "pointmass": PointMassEnv,
    "pendulum": PendulumEnv,
}


def make_env(name: str, **params) -> Env:
    if name not in ENV_BUILDERS:
        raise ValueError(f"unknown env {name!r}, expected one of {sorted(ENV_BUILDERS)}")
    return ENV_BUILDERS[name](**params)


def lqr_gain(a: np.ndarray, b: np.ndarray, q: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Infinite-horizon discrete LQR gain K for u = -K x."""
    p = scipy.linalg.solve_discrete_are(a, b, q, r)
    return np.linalg.solve(r + b.T @ p @ b, b.T @ p @ a)


class LqrExpert:
    """Analytic expert for LinearSystemEnv: u = clip(-K x)."""

    ready = True

    def __init__(self, env: LinearSystemEnv):
        self.gain = lqr_gain(env.A, env.B, env.Q, env.R)
        self.low = env.spec.action_low
        self.high = env.spec.action_high

    def action(self, state: np.ndarray) -> np.ndarray:
        return np.clip(-self.gain @ np.asarray(state, dtype=np.float64), self.low, self.high)


class SacExpert:
    """A trained delay-free policy acting deterministically as the expert."""

    def __init__(self, policy, trained: bool = True):
        self.policy = policy
        self.ready = trained

    def action(self, state: np.ndarray) -> np.ndarray:
        if not self.ready:
            raise RuntimeError("expert policy is not trained")
        return self.policy.act(state, deterministic=True)


def expert_action(policy, state: np.ndarray) -> np.ndarray:
    """Bounded expert action; raises on an untrained policy handle."""
    if policy is None or not getattr(policy, "ready", False):
        raise RuntimeError("expert policy handle is untrained or missing")
    return policy.action(state)
