"""Collect the delay-free pretraining corpus and slice it into encoder samples.

The encoder never sees the delayed process: it learns from ordinary
trajectories gathered by a random policy plus a handful of expert episodes.
Each training sample is an anchor state, the next d actions, and the d states
those actions produced, zero-padded out to the delay capacity D.
"""

import numpy as np

from deer import LinearSystemEnv, LqrExpert, collect_mixed, make_samples, split

env = LinearSystemEnv(sigma=0.0, horizon=40)
store = collect_mixed(env, LqrExpert(env), n_random=20, n_expert=3, seed=0)

total = sum(t.n_steps for t in store.trajectories)
print(f"{len(store.trajectories)} trajectories, {total} env steps")
print(f"mean return  random: {np.mean(store.returns('random')):8.2f}")
print(f"mean return  expert: {np.mean(store.returns('expert')):8.2f}")

samples = make_samples(store, big_d=4, delay_set=range(1, 5))
train, test = split(samples, ratio=0.9, seed=1)
print(f"\n{len(samples)} samples for capacity D=4 ({len(train)} train / {len(test)} test)")

s = next(x for x in test if x.d == 2)
print(f"\none sample with true delay d={s.d}:")
print("  anchor state :", np.round(s.anchor_state, 3))
print("  action block :\n", np.round(s.actions, 3))
print("  label states :\n", np.round(s.labels, 3))
print("  loss mask    :", s.mask)
print("\nrows past d are zero padding; the mask keeps them out of the loss.")
