"""Pretrain the sequence encoder and inspect what it reconstructs.

The encoder consumes an information state (stale base state + pending
actions), summarizes it into a fixed K1-vector, and its decoder learns to roll
the missing states forward.  A few epochs on random/expert trajectories are
enough to track the delayed double integrator closely.
"""

import numpy as np

from deer import (DelayConfig, DelayProcess, LinearSystemEnv, LqrExpert,
                  Seq2SeqModel, collect_mixed, make_samples, predict_states,
                  pretrain, split)

env = LinearSystemEnv(sigma=0.0, horizon=40)
store = collect_mixed(env, LqrExpert(env), n_random=120, n_expert=5, seed=0)
samples = make_samples(store, big_d=3, delay_set=[1, 2, 3])
train, test = split(samples, ratio=0.9, seed=1)
print(f"{len(train)} train / {len(test)} test samples")

model = Seq2SeqModel(state_dim=4, action_dim=2, big_d=3, k1=32, k2=16, seed=2)
model, curve = pretrain(model, train, test, epochs=6, batch_size=256, lr=1e-3, seed=3)
for ep, mse in enumerate(curve, start=1):
    print(f"epoch {ep}: autoregressive test MSE {mse:.6f}")

# drive the delayed process and compare the decoder's rollout to the truth
proc = DelayProcess(env, DelayConfig(d_i=3))
info = proc.delayed_reset(seed=7)
rng = np.random.default_rng(7)
for _ in range(5):
    info, _, _ = proc.delayed_step(rng.uniform(-1, 1, 2))

preds = predict_states(model, info)
true = proc.true_states[proc.t - info.z + 1:proc.t + 1]
print("\nreconstructing the 3 hidden states from the information state:")
for k, (p, s) in enumerate(zip(preds, true), start=1):
    err = np.abs(p - s).max()
    print(f"  step +{k}: pred {np.round(p, 4)}  true {np.round(s, 4)}  "
          f"max err {err:.5f}")
print(f"\nfixed-length context vector: shape {model.encode(info).shape}, "
      f"same for any z in [1, {model.D}]")
