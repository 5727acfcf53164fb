"""Delay-free trajectory collection and supervised sample construction.

Pretraining data is a mostly-random, few-expert mix of full-horizon
trajectories.  Each supervised sample is identified by (trajectory, start
position, delay) and materialized on demand: an anchor state s_t, the next d
actions zero-padded to length D, the next d states as labels, and a 0/1 mask
selecting the real positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import storage
from .envs import Env, expert_action


@dataclass
class Trajectory:
    states: np.ndarray    # [T+1, state_dim]
    actions: np.ndarray   # [T, action_dim]
    rewards: np.ndarray   # [T]
    source: str           # "random" | "expert"

    def __post_init__(self):
        if self.states.shape[0] != self.actions.shape[0] + 1:
            raise ValueError("states must have exactly one more row than actions")
        if self.source not in ("random", "expert"):
            raise ValueError(f"unknown trajectory source {self.source!r}")

    @property
    def n_steps(self) -> int:
        return self.actions.shape[0]


class TrajectoryStore:
    def __init__(self, trajectories: list[Trajectory] | None = None):
        self.trajectories: list[Trajectory] = list(trajectories or [])

    def __len__(self) -> int:
        return len(self.trajectories)

    def add(self, traj: Trajectory) -> None:
        self.trajectories.append(traj)

    def count(self, source: str) -> int:
        return sum(1 for t in self.trajectories if t.source == source)

    def all_states(self) -> np.ndarray:
        if not self.trajectories:
            return np.zeros((0, 0))
        return np.concatenate([t.states for t in self.trajectories], axis=0)

    def returns(self, source: str | None = None) -> list[float]:
        return [float(t.rewards.sum()) for t in self.trajectories
                if source is None or t.source == source]


def rollout(env: Env, policy, seed: int) -> Trajectory:
    """One full-horizon episode; policy is "random" or an expert handle."""
    rng = np.random.default_rng(seed)
    state = env.reset(seed)
    states = [state]
    actions = []
    rewards = []
    for _ in range(env.spec.horizon):
        if policy == "random":
            action = env.sample_action(rng)
        else:
            action = expert_action(policy, states[-1])
        tr = env.step(states[-1], action)
        states.append(tr.next_state)
        actions.append(tr.action)
        rewards.append(tr.reward)
    source = "random" if policy == "random" else "expert"
    return Trajectory(np.asarray(states), np.asarray(actions), np.asarray(rewards), source)


def collect(env: Env, policy, n_trajectories: int, seed: int) -> TrajectoryStore:
    """n seeded full-horizon trajectories; per-trajectory seeds are spawned
    from the given seed so the store is reproducible."""
    if n_trajectories < 0:
        raise ValueError("n_trajectories must be >= 0")
    seeds = np.random.SeedSequence(seed).generate_state(max(n_trajectories, 1))
    store = TrajectoryStore()
    for i in range(n_trajectories):
        store.add(rollout(env, policy, int(seeds[i])))
    return store


def collect_mixed(env: Env, expert, n_random: int, n_expert: int,
                  seed: int) -> TrajectoryStore:
    store = collect(env, "random", n_random, seed)
    for traj in collect(env, expert, n_expert, seed + 1).trajectories:
        store.add(traj)
    return store


@dataclass(frozen=True)
class TrainingSample:
    """Index-backed sample: fields materialize from the owning store."""

    store: TrajectoryStore
    traj_idx: int
    t: int
    d: int
    D: int

    @property
    def anchor_state(self) -> np.ndarray:
        return self.store.trajectories[self.traj_idx].states[self.t]

    @property
    def actions(self) -> np.ndarray:
        traj = self.store.trajectories[self.traj_idx]
        adim = traj.actions.shape[1]
        out = np.zeros((self.D, adim))
        out[:self.d] = traj.actions[self.t:self.t + self.d]
        return out

    @property
    def labels(self) -> np.ndarray:
        traj = self.store.trajectories[self.traj_idx]
        sdim = traj.states.shape[1]
        out = np.zeros((self.D, sdim))
        out[:self.d] = traj.states[self.t + 1:self.t + self.d + 1]
        return out

    @property
    def mask(self) -> np.ndarray:
        out = np.zeros(self.D)
        out[:self.d] = 1.0
        return out


def make_samples(store: TrajectoryStore, big_d: int, delay_set) -> list[TrainingSample]:
    """All (position, delay) pairs that fit inside each trajectory."""
    if big_d < 1:
        raise ValueError("D must be >= 1")
    delays = sorted(set(int(d) for d in delay_set))
    if not delays or delays[0] < 1 or delays[-1] > big_d:
        raise ValueError(f"delay_set must be a non-empty subset of [1, {big_d}]")
    samples = []
    for idx, traj in enumerate(store.trajectories):
        n = traj.n_steps
        for t in range(n):
            for d in delays:
                if t + d <= n:
                    samples.append(TrainingSample(store, idx, t, d, big_d))
    return samples


def split(samples: list, ratio: float, seed: int) -> tuple[list, list]:
    """Seeded shuffle into disjoint (train, test) with |train| = floor(ratio*n)."""
    if not (0.0 < ratio < 1.0):
        raise ValueError("ratio must lie strictly between 0 and 1")
    order = np.random.default_rng(seed).permutation(len(samples))
    n_train = int(len(samples) * ratio)
    train = [samples[i] for i in order[:n_train]]
    test = [samples[i] for i in order[n_train:]]
    return train, test


def batch_arrays(samples: list[TrainingSample]) -> dict[str, np.ndarray]:
    """Materialize a batch: anchors [B,S], actions [B,D,A], labels [B,D,S],
    mask [B,D], delays [B]."""
    return {
        "anchor": np.stack([s.anchor_state for s in samples]),
        "actions": np.stack([s.actions for s in samples]),
        "labels": np.stack([s.labels for s in samples]),
        "mask": np.stack([s.mask for s in samples]),
        "d": np.array([s.d for s in samples], dtype=np.int64),
    }


def save_store(path: str, store: TrajectoryStore, meta: dict) -> None:
    arrays = {}
    manifest = []
    for i, traj in enumerate(store.trajectories):
        arrays[f"traj{i:05d}.states"] = traj.states
        arrays[f"traj{i:05d}.actions"] = traj.actions
        arrays[f"traj{i:05d}.rewards"] = traj.rewards
        manifest.append(traj.source)
    storage.save_arrays(path, {**meta, "sources": manifest, "n": len(store)}, arrays)


def load_store(path: str) -> tuple[TrajectoryStore, dict]:
    meta, arrays = storage.load_arrays(path)
    store = TrajectoryStore()
    for i, source in enumerate(meta["sources"]):
        store.add(Trajectory(arrays[f"traj{i:05d}.states"],
                             arrays[f"traj{i:05d}.actions"],
                             arrays[f"traj{i:05d}.rewards"], source))
    return store, meta
