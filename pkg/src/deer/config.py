"""Experiment configuration: schema, validation, artifact naming.

A single JSON file fully specifies an experiment: the environment, the delay
grid, the dataset mix, encoder hyperparameters, agent hyperparameters, and
seeds.  Every artifact embeds the config's hash so mismatched pieces cannot
be aggregated silently.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .envs import ENV_BUILDERS
from .storage import config_hash


class ConfigError(ValueError):
    pass


_DEFAULTS = {
    "dataset": {"n_random": 500, "n_expert": 10, "seed": 42, "expert": "lqr",
                "expert_threshold": None, "test_ratio": 0.1},
    "seq2seq": {"k1": 256, "k2": 64, "D": 4, "p": 0.5, "epochs": 2,
                "batch_size": 256, "lr": 1e-3, "seed": 3},
    "agent": {"hidden": [256, 256], "lr": 3e-4, "batch_size": 256, "gamma": 0.99,
              "tau": 0.005, "buffer_capacity": 100_000, "training_threshold": 1000,
              "alpha_init": 0.2, "target_entropy": None, "updates_per_step": 1,
              "steps": 20_000, "eval_every": 2000, "n_eval": 3,
              "retrain_period": 20_000, "online_epochs": 2, "online_lr": 1e-3},
}


@dataclass
class ExperimentConfig:
    raw: dict
    name: str
    out_dir: str
    env_name: str
    env_params: dict
    constant_delays: list
    random_delays: list          # list of {"d_i", "d_m", "mu"}
    dataset: dict
    seq2seq: dict
    agent: dict
    seeds: list
    k1_list: list = field(default_factory=list)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def max_grid_delay(self) -> int:
        worst = 0
        for d in self.constant_delays:
            worst = max(worst, d)
        for triple in self.random_delays:
            worst = max(worst, triple["d_i"] + triple["d_m"])
        return worst

    def delay_tags(self) -> list:
        """(tag, kind, payload) for every non-delay-free grid point."""
        tags = []
        for d in self.constant_delays:
            if d > 0:
                tags.append((f"d{d}", "constant", d))
        for triple in self.random_delays:
            tag = f"di{triple['d_i']}_dm{triple['d_m']}_mu{triple['mu']}"
            tags.append((tag, "random", triple))
        return tags

    def has_delay_free(self) -> bool:
        return 0 in self.constant_delays

    # -- artifact paths --------------------------------------------------------

    def path(self, *parts: str) -> str:
        return os.path.join(self.out_dir, *parts)

    def dataset_path(self) -> str:
        return self.path("dataset.bin")

    def encoder_path(self, k1: int | None = None) -> str:
        if k1 is None or len(self.k1_list) == 1:
            return self.path("encoder.bin")
        return self.path(f"encoder_k{k1}.bin")

    def run_stem(self, mode: str, tag: str, seed: int, k1: int | None = None) -> str:
        suffix = f"_k{k1}" if (k1 is not None and len(self.k1_list) > 1) else ""
        return f"{mode}_{tag}{suffix}_seed{seed}"

    def curve_path(self, mode: str, tag: str, seed: int, k1: int | None = None) -> str:
        return self.path(f"curve_{self.run_stem(mode, tag, seed, k1)}.jsonl")

    def policy_path(self, mode: str, tag: str, seed: int, k1: int | None = None) -> str:
        return self.path(f"policy_{self.run_stem(mode, tag, seed, k1)}.bin")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _merged(section: str, user: dict) -> dict:
    base = dict(_DEFAULTS[section])
    unknown = set(user) - set(base)
    _require(not unknown, f"unknown {section} keys: {sorted(unknown)}")
    base.update(user)
    return base


def parse_config(raw: dict) -> ExperimentConfig:
    _require(isinstance(raw, dict), "config must be a JSON object")
    for key in ("name", "out_dir", "env", "seeds"):
        _require(key in raw, f"config is missing required key {key!r}")
    env = raw["env"]
    _require(isinstance(env, dict) and "name" in env, "env section needs a 'name'")
    _require(env["name"] in ENV_BUILDERS,
             f"unknown env {env['name']!r}, expected one of {sorted(ENV_BUILDERS)}")
    env_params = dict(env.get("params", {}))

    delays = raw.get("delays", {})
    constant = list(delays.get("constant", []))
    random_triples = [dict(t) for t in delays.get("random", [])]
    for d in constant:
        _require(isinstance(d, int) and d >= 0, f"constant delay must be an int >= 0, got {d!r}")
    for t in random_triples:
        for k in ("d_i", "d_m", "mu"):
            _require(k in t, f"random delay entry {t} is missing {k!r}")
        _require(t["d_i"] >= 1 and t["d_m"] >= 0 and 0 <= t["mu"] < 1,
                 f"invalid random delay entry {t}")

    dataset = _merged("dataset", raw.get("dataset", {}))
    _require(dataset["n_random"] >= 0 and dataset["n_expert"] >= 1,
             "dataset needs n_random >= 0 and n_expert >= 1 (expert trajectories "
             "set the normalization anchor)")
    _require(0.0 < dataset["test_ratio"] < 1.0, "dataset.test_ratio must lie in (0, 1)")
    _require(dataset["expert"] in ("lqr", "sac"),
             f"dataset.expert must be 'lqr' or 'sac', got {dataset['expert']!r}")
    _require(dataset["expert"] != "lqr" or env["name"] == "linear",
             "the analytic LQR expert exists only for the linear env; use expert='sac'")

    seq2seq = _merged("seq2seq", raw.get("seq2seq", {}))
    k1 = seq2seq["k1"]
    k1_list = [int(v) for v in (k1 if isinstance(k1, list) else [k1])]
    _require(all(v >= 1 for v in k1_list) and k1_list, "seq2seq.k1 must be positive")

    agent = _merged("agent", raw.get("agent", {}))
    seeds = raw["seeds"]
    _require(isinstance(seeds, list) and seeds and all(isinstance(s, int) for s in seeds),
             "seeds must be a non-empty list of ints")
    _require(len(set(seeds)) == len(seeds), "seeds must be distinct")

    cfg = ExperimentConfig(
        raw=raw, name=raw["name"], out_dir=raw["out_dir"],
        env_name=env["name"], env_params=env_params,
        constant_delays=constant, random_delays=random_triples,
        dataset=dataset, seq2seq=seq2seq, agent=agent, seeds=list(seeds),
        k1_list=k1_list,
    )
    worst = cfg.max_grid_delay()
    _require(seq2seq["D"] >= max(worst, 1),
             f"seq2seq.D={seq2seq['D']} is below the largest grid delay {worst}; "
             "the encoder must cover every delay it will see")
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    return parse_config(raw)
