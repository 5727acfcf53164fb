"""Random delays plus the cross-run report table.

Runs the encoder policy and the augmented-state baseline under Bernoulli
drops (d_i=1, d_m=2, mu=0.3) for two seeds each, streams the curves to jsonl
files the way the command-line driver does, then aggregates them into the
normalized report table.
"""

import tempfile
from pathlib import Path

from deer import (DelayConfig, LinearSystemEnv, LqrExpert, SacConfig,
                  Seq2SeqModel, collect_mixed, make_samples, pretrain,
                  run_deer, run_sacas, split)
from deer.report import build_report, discover_runs, format_table
from deer.storage import JsonlWriter

HORIZON = 40
STEPS = 2000
build = lambda: LinearSystemEnv(sigma=0.0, horizon=HORIZON)
sac = SacConfig(hidden=(64, 64), batch_size=64, buffer_capacity=20_000,
                training_threshold=200)
delay = DelayConfig(d_i=1, d_m=2, mu=0.3)

env = build()
store = collect_mixed(env, LqrExpert(env), n_random=120, n_expert=5, seed=0)
expert_return = float(sum(store.returns("expert")) / 5)
train, test = split(make_samples(store, delay.max_delay, [1, 2, 3]), 0.9, seed=1)
model = Seq2SeqModel(4, 2, big_d=delay.max_delay, k1=32, k2=16, seed=2)
model, curve = pretrain(model, train, test, epochs=5, batch_size=256, lr=1e-3, seed=3)
print(f"encoder test MSE {curve[-1]:.5f}, expert return {expert_return:.2f}")

out = Path(tempfile.mkdtemp(prefix="delay_report_"))
tag = f"di{delay.d_i}_dm{delay.d_m}_mu{delay.mu}"
for mode, runner, extra in (("deer", run_deer, (model,)),
                            ("sacas", run_sacas, ())):
    for seed in (0, 1):
        path = out / f"curve_{mode}_{tag}_seed{seed}.jsonl"
        with JsonlWriter(str(path)) as w:
            w.write({"kind": "header", "config_hash": "demo", "env": "linear",
                     "mode": mode, "delay": tag, "seed": seed, "k1": None})
            res = runner(build, delay, *extra, sac, STEPS, seed=seed,
                         eval_every=1000, n_eval=2, writer=w)
        print(f"{mode:6s} seed {seed}: final {res.final_true_return:8.2f}")

runs = discover_runs(str(out))
print(f"\n{len(runs)} curve files in {out}")
print(format_table(build_report(runs, expert_return)))
