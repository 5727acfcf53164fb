"""Training loops for DEER and its ablations, with seeded reproducible logs.

Every runner follows the same skeleton: roll delayed episodes, map each
information state to the mode's policy input, store transitions with the
*delivered* reward, update SAC once the buffer passes its threshold, and
periodically run deterministic evaluation episodes.  Logged rows:

    episode rows  {"step", "episode_return_true", "episode_return_delivered",
                   "losses": {"actor", "critic", "alpha"}, "alpha"}
    eval rows     {"step", "eval_return_true", "eval_return_delivered"}

True returns sum the wrapped env's rewards; delivered returns sum what the
wrapper emitted.  Curves are exactly reproducible from (config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Trajectory, TrajectoryStore, make_samples, split
from .delay import DelayConfig, DelayProcess, InformationState
from .envs import Env, make_env
from .sac import ReplayBuffer, SacConfig, SacPolicy
from .seq2seq import Seq2SeqModel, predict_states, pretrain

MODES = ("delay-free", "deer", "sacas", "dolps", "online-deer")


@dataclass
class RunResult:
    mode: str
    seed: int
    rows: list
    final_true_return: float
    policy: SacPolicy

    def eval_rows(self) -> list:
        return [r for r in self.rows if "eval_return_true" in r]


def final_metric(rows: list) -> float:
    """Mean true return over the last (up to) three eval points."""
    evals = [r["eval_return_true"] for r in rows if "eval_return_true" in r]
    if not evals:
        raise ValueError("run produced no eval rows")
    return float(np.mean(evals[-3:]))


class _ObsBuilder:
    dim: int

    def build(self, info: InformationState) -> np.ndarray:
        raise NotImplementedError


class DeerObs(_ObsBuilder):
    def __init__(self, encoder: Seq2SeqModel):
        self.encoder = encoder
        self.dim = encoder.k1

    def build(self, info):
        return self.encoder.encode(info)


class SacasObs(_ObsBuilder):
    """Flattened information state; zero-padded to D when delay is random."""

    def __init__(self, env: Env, cfg: DelayConfig):
        self.random_delay = cfg.d_m > 0 or cfg.mu > 0
        self.pad_to = cfg.max_delay if self.random_delay else None
        width = cfg.max_delay if self.random_delay else cfg.d_i
        self.dim = env.spec.state_dim + width * env.spec.action_dim

    def build(self, info):
        return info.flatten(pad_to=self.pad_to)


class DolpsObs(_ObsBuilder):
    def __init__(self, model: Seq2SeqModel):
        self.model = model
        self.dim = model.state_dim

    def build(self, info):
        return predict_states(self.model, info)[-1]


def _episode_seed(seed: int, episode: int) -> int:
    return (seed + 1) * 1_000_003 + episode


def _eval_seed(seed: int, eval_idx: int, episode: int) -> int:
    return 900_000_000 + (seed + 1) * 10_007 + eval_idx * 101 + episode


def _evaluate_delayed(env_builder, delay_cfg: DelayConfig, builder: _ObsBuilder,
                      policy: SacPolicy, n_episodes: int, seed: int,
                      eval_idx: int) -> tuple[float, float]:
    trues, delivereds = [], []
    for ep in range(n_episodes):
        s = _eval_seed(seed, eval_idx, ep)
        proc = DelayProcess(env_builder(), replace(delay_cfg, seed=s), None)
        info = proc.delayed_reset(s)
        delivered = 0.0
        done = False
        while not done:
            obs = builder.build(info)
            action = policy.to_env_action(policy.act_tanh(obs, deterministic=True))
            info, r, done = proc.delayed_step(action)
            delivered += r
        trues.append(proc.true_return())
        delivereds.append(delivered)
    return float(np.mean(trues)), float(np.mean(delivereds))


def _evaluate_delay_free(env_builder, policy: SacPolicy, n_episodes: int,
                         seed: int, eval_idx: int) -> tuple[float, float]:
    totals = []
    for ep in range(n_episodes):
        env = env_builder()
        state = env.reset(_eval_seed(seed, eval_idx, ep))
        total = 0.0
        for _ in range(env.spec.horizon):
            action = policy.to_env_action(policy.act_tanh(state, deterministic=True))
            tr = env.step(state, action)
            total += tr.reward
            state = tr.next_state
        totals.append(total)
    m = float(np.mean(totals))
    return m, m


def run_delay_free(env_builder, sac_cfg: SacConfig, steps: int, seed: int,
                   eval_every: int = 2000, n_eval: int = 3,
                   writer=None) -> RunResult:
    """Plain SAC on raw states: the delay-free benchmark and expert trainer."""
    env = env_builder()
    policy = SacPolicy(env.spec.state_dim, env.spec.action_dim,
                       env.spec.action_low, env.spec.action_high, sac_cfg, seed=seed + 1)
    buffer = ReplayBuffer(sac_cfg.buffer_capacity, env.spec.state_dim,
                          env.spec.action_dim, seed=seed + 2)
    warmup_rng = np.random.default_rng(seed + 3)
    rows: list = []
    losses = {"actor": 0.0, "critic": 0.0, "alpha": 0.0}
    alpha = policy.alpha
    total = 0
    episode = 0
    eval_idx = 0
    while total < steps:
        state = env.reset(_episode_seed(seed, episode))
        ep_ret = 0.0
        for _ in range(env.spec.horizon):
            if len(buffer) < sac_cfg.training_threshold:
                a_tanh = warmup_rng.uniform(-1.0, 1.0, env.spec.action_dim)
            else:
                a_tanh = policy.act_tanh(state)
            tr = env.step(state, policy.to_env_action(a_tanh))
            # horizon end is a truncation, not a terminal state: bootstrap through it
            buffer.add(state, a_tanh, tr.reward, tr.next_state, 0.0)
            state = tr.next_state
            ep_ret += tr.reward
            total += 1
            if len(buffer) >= sac_cfg.training_threshold:
                for _ in range(sac_cfg.updates_per_step):
                    out = policy.update(buffer.sample(sac_cfg.batch_size))
                losses = {"actor": out["actor_loss"], "critic": out["critic_loss"],
                          "alpha": out["alpha_loss"]}
                alpha = out["alpha"]
            if total % eval_every == 0 or total == steps:
                t, d = _evaluate_delay_free(env_builder, policy, n_eval, seed, eval_idx)
                _emit(rows, writer, {"step": total, "eval_return_true": t,
                                     "eval_return_delivered": d})
                eval_idx += 1
            if total >= steps:
                break
        _emit(rows, writer, {"step": total, "episode_return_true": ep_ret,
                             "episode_return_delivered": ep_ret,
                             "losses": losses, "alpha": alpha})
        episode += 1
    return RunResult("delay-free", seed, rows, final_metric(rows), policy)


def _emit(rows: list, writer, row: dict) -> None:
    rows.append(row)
    if writer is not None:
        writer.write(row)


def run_delayed(mode: str, env_builder, delay_cfg: DelayConfig,
                builder: _ObsBuilder, sac_cfg: SacConfig, steps: int, seed: int,
                eval_every: int = 2000, n_eval: int = 3, writer=None,
                on_episode_end=None, on_step=None) -> RunResult:
    """Shared delayed-mode loop; hooks support the online-retraining variant."""
    env = env_builder()
    policy = SacPolicy(builder.dim, env.spec.action_dim,
                       env.spec.action_low, env.spec.action_high, sac_cfg, seed=seed + 1)
    buffer = ReplayBuffer(sac_cfg.buffer_capacity, builder.dim,
                          env.spec.action_dim, seed=seed + 2)
    warmup_rng = np.random.default_rng(seed + 3)
    proc = DelayProcess(env, replace(delay_cfg, seed=seed + 4), None)
    rows: list = []
    losses = {"actor": 0.0, "critic": 0.0, "alpha": 0.0}
    alpha = policy.alpha
    total = 0
    episode = 0
    eval_idx = 0
    while total < steps:
        info = proc.delayed_reset(_episode_seed(seed, episode))
        obs = builder.build(info)
        ep_delivered = 0.0
        done = False
        while not done:
            if len(buffer) < sac_cfg.training_threshold:
                a_tanh = warmup_rng.uniform(-1.0, 1.0, env.spec.action_dim)
            else:
                a_tanh = policy.act_tanh(obs)
            info, r, done = proc.delayed_step(policy.to_env_action(a_tanh))
            obs2 = builder.build(info)
            # horizon end is a truncation, not a terminal state: bootstrap through it
            buffer.add(obs, a_tanh, r, obs2, 0.0)
            obs = obs2
            ep_delivered += r
            total += 1
            if len(buffer) >= sac_cfg.training_threshold:
                for _ in range(sac_cfg.updates_per_step):
                    out = policy.update(buffer.sample(sac_cfg.batch_size))
                losses = {"actor": out["actor_loss"], "critic": out["critic_loss"],
                          "alpha": out["alpha_loss"]}
                alpha = out["alpha"]
            if on_step is not None:
                on_step(total)
            if total % eval_every == 0 or total == steps:
                t, d = _evaluate_delayed(env_builder, delay_cfg, builder, policy,
                                         n_eval, seed, eval_idx)
                _emit(rows, writer, {"step": total, "eval_return_true": t,
                                     "eval_return_delivered": d})
                eval_idx += 1
            if total >= steps:
                break
        _emit(rows, writer, {"step": total, "episode_return_true": proc.true_return(),
                             "episode_return_delivered": ep_delivered,
                             "losses": losses, "alpha": alpha})
        if on_episode_end is not None:
            on_episode_end(proc)
        episode += 1
    return RunResult(mode, seed, rows, final_metric(rows), policy)


def run_deer(env_builder, delay_cfg: DelayConfig | None, encoder: Seq2SeqModel,
             sac_cfg: SacConfig, steps: int, seed: int, **kw) -> RunResult:
    """Stage-2 training on frozen-encoder context representations."""
    if delay_cfg is None:
        return run_delay_free(env_builder, sac_cfg, steps, seed, **kw)
    env = env_builder()
    if encoder.state_dim != env.spec.state_dim or encoder.action_dim != env.spec.action_dim:
        raise ValueError("encoder dims do not match the environment")
    if encoder.D < delay_cfg.max_delay:
        raise ValueError(
            f"encoder capacity D={encoder.D} below the max delay {delay_cfg.max_delay}")
    return run_delayed("deer", env_builder, delay_cfg, DeerObs(encoder),
                       sac_cfg, steps, seed, **kw)


def run_sacas(env_builder, delay_cfg: DelayConfig, sac_cfg: SacConfig,
              steps: int, seed: int, **kw) -> RunResult:
    return run_delayed("sacas", env_builder, delay_cfg,
                       SacasObs(env_builder(), delay_cfg), sac_cfg, steps, seed, **kw)


def run_dolps(env_builder, delay_cfg: DelayConfig, model: Seq2SeqModel,
              sac_cfg: SacConfig, steps: int, seed: int, **kw) -> RunResult:
    env = env_builder()
    if model.state_dim != env.spec.state_dim or model.action_dim != env.spec.action_dim:
        raise ValueError("seq2seq dims do not match the environment")
    if model.D < delay_cfg.max_delay:
        raise ValueError(f"model capacity D={model.D} below the max delay {delay_cfg.max_delay}")
    return run_delayed("dolps", env_builder, delay_cfg, DolpsObs(model),
                       sac_cfg, steps, seed, **kw)


def run_online_deer(env_builder, delay_cfg: DelayConfig, sac_cfg: SacConfig,
                    steps: int, seed: int, retrain_period: int | None = 20_000,
                    online_epochs: int = 2, online_lr: float = 1e-3,
                    k1: int = 256, k2: int = 64, big_d: int | None = None,
                    max_kept_episodes: int = 50, **kw) -> RunResult:
    """DEER with a randomly initialized encoder retrained during interaction.

    Every ``retrain_period`` agent steps the encoder-decoder (re)trains on
    the true trajectories gathered so far.  Replay representations are NOT
    recomputed, so old entries go stale; this is the instability this ablation is
    meant to exhibit.  ``retrain_period=None`` keeps the random encoder
    frozen for the whole run.
    """
    env = env_builder()
    big_d = big_d if big_d is not None else delay_cfg.max_delay
    if big_d < delay_cfg.max_delay:
        raise ValueError("encoder capacity below the max delay")
    encoder = Seq2SeqModel(env.spec.state_dim, env.spec.action_dim, big_d,
                           k1=k1, k2=k2, seed=seed + 7)
    store = TrajectoryStore()
    state = {"last_retrain": 0, "retrains": 0}

    def on_episode_end(proc: DelayProcess) -> None:
        h = proc.horizon
        store.add(Trajectory(np.asarray(proc.true_states[:h + 1]),
                             np.asarray(proc.actions[:h]),
                             np.asarray(proc.true_rewards[:h]), "random"))
        if len(store) > max_kept_episodes:
            del store.trajectories[0]

    def on_step(total: int) -> None:
        if retrain_period is None or total - state["last_retrain"] < retrain_period:
            return
        if not store.trajectories:
            return
        samples = make_samples(store, big_d, range(1, big_d + 1))
        train, test = split(samples, 0.9, seed=seed + 100 + state["retrains"])
        pretrain(encoder, train, test, epochs=online_epochs,
                 batch_size=128, lr=online_lr, seed=seed + 200 + state["retrains"])
        state["last_retrain"] = total
        state["retrains"] += 1

    result = run_delayed("online-deer", env_builder, delay_cfg, DeerObs(encoder),
                         sac_cfg, steps, seed, on_episode_end=on_episode_end,
                         on_step=on_step, **kw)
    result.encoder = encoder
    return result


def make_env_builder(name: str, params: dict):
    """Factory closure so every runner gets a fresh env instance."""
    def build() -> Env:
        return make_env(name, **params)
    return build
