"""Command-line pipeline: collect -> pretrain -> train -> eval -> report.

Each stage reads one JSON experiment config and drops its artifacts into the
config's ``out_dir``.  Stages check for their prerequisites and fail with a
message naming the command that produces them.  All artifacts embed the
config hash, so a stale mix of files is caught instead of aggregated.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import report as rep
from . import storage
from .config import ConfigError, ExperimentConfig, load_config
from .data import collect_mixed, load_store, make_samples, save_store, split
from .delay import DelayConfig
from .envs import LqrExpert, SacExpert
from .runners import (MODES, _evaluate_delayed, _evaluate_delay_free, DeerObs,
                      DolpsObs, SacasObs, make_env_builder, run_deer,
                      run_delay_free, run_dolps, run_online_deer, run_sacas)
from .sac import SacConfig, load_policy, save_policy
from .seq2seq import Seq2SeqModel, load_model, pretrain, save_model
from .storage import JsonlWriter, file_sha256


class UsageError(RuntimeError):
    pass


def _say(msg: str) -> None:
    print(msg, flush=True)


def _sac_cfg(cfg: ExperimentConfig) -> SacConfig:
    a = cfg.agent
    return SacConfig(hidden=tuple(a["hidden"]), lr=a["lr"], batch_size=a["batch_size"],
                     gamma=a["gamma"], tau=a["tau"], buffer_capacity=a["buffer_capacity"],
                     training_threshold=a["training_threshold"], alpha_init=a["alpha_init"],
                     target_entropy=a["target_entropy"],
                     updates_per_step=a["updates_per_step"])


def _delay_cfg(kind: str, payload) -> DelayConfig:
    if kind == "constant":
        return DelayConfig(d_i=payload, d_m=0, mu=0.0)
    return DelayConfig(d_i=payload["d_i"], d_m=payload["d_m"], mu=payload["mu"])


def _check_hash(cfg: ExperimentConfig, meta: dict, what: str) -> None:
    if meta.get("config_hash") != cfg.hash:
        raise UsageError(f"{what} was produced by a different config "
                         f"({str(meta.get('config_hash'))[:12]} != {cfg.hash[:12]}); "
                         "re-run the earlier stages with this config")


def _need(path: str, producer: str) -> None:
    if not os.path.exists(path):
        raise UsageError(f"missing {path}; run `deer {producer}` with this config first")


def _best_delay_free_policy(cfg: ExperimentConfig):
    """Highest-scoring delay-free policy among this config's seeds."""
    best = None
    for seed in cfg.seeds:
        path = cfg.policy_path("delay-free", "d0", seed)
        if not os.path.exists(path):
            continue
        policy, meta = load_policy(path, _sac_cfg(cfg))
        _check_hash(cfg, meta, path)
        score = meta["final_eval_true"]
        if best is None or score > best[1]:
            best = (policy, score, seed)
    if best is None:
        raise UsageError(
            f"no delay-free policy found in {cfg.out_dir}; run "
            "`deer train --mode delay-free` with this config first")
    return best


# -- stages ------------------------------------------------------------------


def cmd_collect(cfg: ExperimentConfig) -> None:
    os.makedirs(cfg.out_dir, exist_ok=True)
    builder = make_env_builder(cfg.env_name, cfg.env_params)
    env = builder()
    ds = cfg.dataset
    if ds["expert"] == "lqr":
        expert = LqrExpert(env)
        expert_seed = None
        expert_score = None
    else:
        policy, expert_score, expert_seed = _best_delay_free_policy(cfg)
        threshold = ds["expert_threshold"]
        if threshold is not None and expert_score < threshold:
            raise UsageError(
                f"best delay-free policy scores {expert_score:.2f}, below the "
                f"expert threshold {threshold}; train longer before collecting")
        expert = SacExpert(policy)
    store = collect_mixed(env, expert, ds["n_random"], ds["n_expert"], ds["seed"])
    expert_return = float(np.mean(store.returns("expert")))
    random_return = (float(np.mean(store.returns("random")))
                     if ds["n_random"] else None)
    meta = {"config_hash": cfg.hash, "env": cfg.env_name,
            "n_random": ds["n_random"], "n_expert": ds["n_expert"],
            "seed": ds["seed"], "expert_kind": ds["expert"],
            "expert_seed": expert_seed, "expert_score": expert_score,
            "expert_return": expert_return, "random_return": random_return}
    save_store(cfg.dataset_path(), store, meta)
    _say(f"collected {len(store)} trajectories -> {cfg.dataset_path()}")
    _say(f"  expert return {expert_return:.2f}" +
         (f", random return {random_return:.2f}" if random_return is not None else ""))


def cmd_pretrain(cfg: ExperimentConfig) -> None:
    _need(cfg.dataset_path(), "collect")
    store, meta = load_store(cfg.dataset_path())
    _check_hash(cfg, meta, cfg.dataset_path())
    s2s = cfg.seq2seq
    env = make_env_builder(cfg.env_name, cfg.env_params)()
    samples = make_samples(store, s2s["D"], range(1, s2s["D"] + 1))
    train, test = split(samples, 1.0 - cfg.dataset["test_ratio"], s2s["seed"])
    _say(f"{len(samples)} samples ({len(train)} train / {len(test)} test)")
    dataset_hash = file_sha256(cfg.dataset_path())
    for k1 in cfg.k1_list:
        model = Seq2SeqModel(env.spec.state_dim, env.spec.action_dim, s2s["D"],
                             k1=k1, k2=s2s["k2"], p=s2s["p"], seed=s2s["seed"])
        t0 = time.time()
        _, curve = pretrain(model, train, test, epochs=s2s["epochs"],
                            batch_size=s2s["batch_size"], lr=s2s["lr"],
                            seed=s2s["seed"] + 1)
        path = cfg.encoder_path(k1)
        save_model(path, model, extra_meta={
            "config_hash": cfg.hash, "env": cfg.env_name,
            "dataset_hash": dataset_hash, "test_mse_curve": curve})
        _say(f"K1={k1}: test MSE {curve[-1]:.6f} after {s2s['epochs']} epochs "
             f"({time.time() - t0:.0f}s) -> {path}")


def _run_one(cfg: ExperimentConfig, mode: str, tag: str, kind: str, payload,
             seed: int, k1: int | None) -> None:
    builder = make_env_builder(cfg.env_name, cfg.env_params)
    a = cfg.agent
    sac_cfg = _sac_cfg(cfg)
    curve_path = cfg.curve_path(mode, tag, seed, k1)
    encoder_hash = None
    dataset_hash = (file_sha256(cfg.dataset_path())
                    if os.path.exists(cfg.dataset_path()) else None)
    encoder = None
    if mode in ("deer", "dolps") and tag != "d0":
        path = cfg.encoder_path(k1)
        _need(path, "pretrain")
        encoder, emeta = load_model(path)
        _check_hash(cfg, emeta, path)
        encoder_hash = file_sha256(path)

    os.makedirs(cfg.out_dir, exist_ok=True)
    kw = dict(steps=a["steps"], seed=seed, eval_every=a["eval_every"],
              n_eval=a["n_eval"])
    t0 = time.time()
    with JsonlWriter(curve_path) as writer:
        writer.write({"kind": "header", "config_hash": cfg.hash,
                      "env": cfg.env_name, "mode": mode, "delay": tag,
                      "seed": seed, "k1": k1 if len(cfg.k1_list) > 1 else None,
                      "dataset_hash": dataset_hash, "encoder_hash": encoder_hash})
        if tag == "d0":
            result = run_delay_free(builder, sac_cfg, writer=writer, **kw)
        else:
            delay_cfg = _delay_cfg(kind, payload)
            if mode == "deer":
                result = run_deer(builder, delay_cfg, encoder, sac_cfg, writer=writer, **kw)
            elif mode == "dolps":
                result = run_dolps(builder, delay_cfg, encoder, sac_cfg, writer=writer, **kw)
            elif mode == "sacas":
                result = run_sacas(builder, delay_cfg, sac_cfg, writer=writer, **kw)
            elif mode == "online-deer":
                s2s = cfg.seq2seq
                result = run_online_deer(
                    builder, delay_cfg, sac_cfg, retrain_period=a["retrain_period"],
                    online_epochs=a["online_epochs"], online_lr=a["online_lr"],
                    k1=(k1 or cfg.k1_list[0]), k2=s2s["k2"], big_d=s2s["D"],
                    writer=writer, **kw)
            else:
                raise UsageError(f"unknown mode {mode!r}")
    save_policy(cfg.policy_path(mode, tag, seed, k1), result.policy, meta={
        "config_hash": cfg.hash, "env": cfg.env_name, "mode": mode,
        "delay": tag, "seed": seed, "final_eval_true": result.final_true_return})
    final_encoder = getattr(result, "encoder", None)
    if final_encoder is not None:
        save_model(cfg.path(f"encoder_online_{tag}_seed{seed}.bin"), final_encoder,
                   extra_meta={"config_hash": cfg.hash, "env": cfg.env_name})
    _say(f"{mode:11s} {tag:16s} seed {seed}: final {result.final_true_return:9.2f} "
         f"({time.time() - t0:.0f}s)")


def _mode_tags(cfg: ExperimentConfig, mode: str) -> list:
    if mode == "delay-free":
        return [("d0", "constant", 0)]
    tags = cfg.delay_tags()
    if not tags:
        raise UsageError(f"config has no nonzero delays, so mode {mode!r} has "
                         "nothing to run; add entries under 'delays'")
    return tags


def cmd_train(cfg: ExperimentConfig, modes: list, seeds: list) -> None:
    for mode in modes:
        k1s = cfg.k1_list if mode in ("deer", "dolps") else [cfg.k1_list[0]]
        for tag, kind, payload in _mode_tags(cfg, mode):
            for k1 in k1s:
                for seed in seeds:
                    _run_one(cfg, mode, tag, kind, payload, seed, k1)


def cmd_eval(cfg: ExperimentConfig, modes: list, seeds: list, episodes: int) -> None:
    builder = make_env_builder(cfg.env_name, cfg.env_params)
    env = builder()
    wrote = 0
    for mode in modes:
        k1s = cfg.k1_list if mode in ("deer", "dolps") else [cfg.k1_list[0]]
        for tag, kind, payload in _mode_tags(cfg, mode):
            for k1 in k1s:
                per_seed = {}
                for seed in seeds:
                    path = cfg.policy_path(mode, tag, seed, k1)
                    if not os.path.exists(path):
                        continue
                    policy, meta = load_policy(path, _sac_cfg(cfg))
                    _check_hash(cfg, meta, path)
                    if tag == "d0":
                        ret, _ = _evaluate_delay_free(builder, policy, episodes,
                                                      seed, eval_idx=7777)
                    else:
                        delay_cfg = _delay_cfg(kind, payload)
                        if mode == "deer" or mode == "dolps":
                            enc, _ = load_model(cfg.encoder_path(k1))
                            ob = DeerObs(enc) if mode == "deer" else DolpsObs(enc)
                        elif mode == "online-deer":
                            epath = cfg.path(f"encoder_online_{tag}_seed{seed}.bin")
                            _need(epath, "train --mode online-deer")
                            enc, _ = load_model(epath)
                            ob = DeerObs(enc)
                        else:
                            ob = SacasObs(env, delay_cfg)
                        ret, _ = _evaluate_delayed(builder, delay_cfg, ob, policy,
                                                   episodes, seed, eval_idx=7777)
                    per_seed[str(seed)] = ret
                if not per_seed:
                    continue
                vals = np.array(sorted(per_seed.values()))
                out = cfg.path(f"eval_{mode}_{tag}" +
                               (f"_k{k1}" if len(cfg.k1_list) > 1 else "") + ".json")
                storage.write_jsonl(out, [{
                    "config_hash": cfg.hash, "env": cfg.env_name, "mode": mode,
                    "delay": tag, "episodes": episodes, "per_seed": per_seed,
                    "median": float(np.median(vals)), "var": float(np.var(vals))}])
                _say(f"{mode:11s} {tag:16s}: median {np.median(vals):9.2f} "
                     f"over {len(per_seed)} seeds -> {out}")
                wrote += 1
    if not wrote:
        raise UsageError(f"no policies found in {cfg.out_dir}; run `deer train` first")


def cmd_report(cfg: ExperimentConfig) -> None:
    _need(cfg.dataset_path(), "collect")
    _, meta = load_store(cfg.dataset_path())
    _check_hash(cfg, meta, cfg.dataset_path())
    runs = rep.discover_runs(cfg.out_dir)
    seen = rep.check_single_config(runs)
    if seen != cfg.hash:
        raise rep.ReportError(
            f"curves in {cfg.out_dir} were produced by config {seen[:12]}, "
            f"not this config ({cfg.hash[:12]})")
    rows = rep.build_report(runs, meta["expert_return"])
    out = cfg.path("report.csv")
    rep.write_csv(rows, out, cfg.hash)
    _say(rep.format_table(rows))
    _say(f"wrote {out}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="deer",
        description="Delay-resilient RL: pretrained context encodings for SAC.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("collect", "gather the pretraining trajectory store"),
                      ("pretrain", "train the state-prediction encoder-decoder"),
                      ("train", "run SAC variants over the delay grid"),
                      ("eval", "re-evaluate saved policies deterministically"),
                      ("report", "aggregate curves into report.csv")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="experiment JSON path")
        if name in ("train", "eval"):
            p.add_argument("--mode", choices=MODES, default=None,
                           help="restrict to one mode (default: all)")
            p.add_argument("--seeds", nargs="+", type=int, default=None,
                           help="override the config's seed list")
        if name == "eval":
            p.add_argument("--episodes", type=int, default=10)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.command == "collect":
            cmd_collect(cfg)
        elif args.command == "pretrain":
            cmd_pretrain(cfg)
        elif args.command in ("train", "eval"):
            modes = [args.mode] if args.mode else list(MODES)
            seeds = args.seeds if args.seeds else cfg.seeds
            if args.command == "train":
                cmd_train(cfg, modes, seeds)
            else:
                cmd_eval(cfg, modes, seeds, args.episodes)
        elif args.command == "report":
            cmd_report(cfg)
    except (ConfigError, UsageError, rep.ReportError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
