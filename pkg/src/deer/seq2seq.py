"""Pretrained GRU encoder-decoder over information states.

The encoder turns an information state (s_{t-z}, a_{t-z}, ..., a_{t-1}) into
a fixed-length hidden vector: the state embeds into h_1 (zero initial
hidden), each real action advances the GRU once, and h_{z+1} is the context
representation handed to the policy.  Zero-padded action slots are never
consumed, so the representation is invariant to padding by construction.

The decoder exists only for (pre)training: starting from h_{z+1} it
reconstructs the missing states s_{t-z+1..t} step by step.  Each step runs
one attention query over the encoder states; the same context vector feeds
both the GRU input and the output head of that step.  The first step embeds
a zero state; later steps embed the decoder's own previous prediction with
probability p, the ground-truth state otherwise.  The loss is the mean
squared error over real (unmasked) positions, computed on standardized
states.
"""

from __future__ import annotations

import warnings

import numpy as np

from . import storage
from .data import TrainingSample, batch_arrays
from .delay import InformationState
from .nn import Adam, DenseLayer, GruCell, Tensor, attention_batched, gradients, merge_parameters
from .nn import autodiff as ad


class Seq2SeqModel:
    def __init__(self, state_dim: int, action_dim: int, big_d: int,
                 k1: int = 256, k2: int = 64, p: float = 0.5, seed: int = 0):
        if big_d < 1:
            raise ValueError("D must be >= 1")
        if not (0.0 <= p <= 1.0):
            raise ValueError("teacher-forcing ratio p must lie in [0, 1]")
        rng = np.random.default_rng(seed)
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.D = big_d
        self.k1 = k1
        self.k2 = k2
        self.p = p
        self.mlp_s1 = DenseLayer(state_dim, k2, "identity", rng, "mlp_s1")
        self.mlp_a = DenseLayer(action_dim, k2, "identity", rng, "mlp_a")
        self.gru_en = GruCell(k2, k1, rng, "gru_en")
        self.mlp_s2 = DenseLayer(state_dim, k2, "identity", rng, "mlp_s2")
        self.gru_de = GruCell(k1 + k2, k1, rng, "gru_de")
        self.mlp_s3 = DenseLayer(2 * k1, state_dim, "identity", rng, "mlp_s3")
        self.state_mean = np.zeros(state_dim)
        self.state_std = np.ones(state_dim)
        self.trained = False
        self.encode_count = 0

    @property
    def parameters(self) -> dict[str, Tensor]:
        return merge_parameters(self.mlp_s1, self.mlp_a, self.gru_en,
                                self.mlp_s2, self.gru_de, self.mlp_s3)

    def set_normalization(self, states: np.ndarray) -> None:
        self.state_mean = states.mean(axis=0)
        self.state_std = np.maximum(states.std(axis=0), 1e-8)

    def normalize(self, states: np.ndarray) -> np.ndarray:
        return (states - self.state_mean) / self.state_std

    def denormalize(self, states: np.ndarray) -> np.ndarray:
        return states * self.state_std + self.state_mean

    # -- encoder ---------------------------------------------------------------

    def encode_batch(self, anchor: np.ndarray, actions: np.ndarray,
                     z: np.ndarray) -> tuple[Tensor, Tensor, np.ndarray]:
        """anchor [B,S], actions [B,D,A] (zero-padded), z [B] real counts.

        Returns (encoder_states [B,D+1,K1], h_final [B,K1], mask [B,D+1]).
        Padded action slots never reach h_final: the hidden only advances
        while i <= z_b, so h_final is exactly h_{z+1} per row.
        """
        b = anchor.shape[0]
        if (z < 1).any() or (z > self.D).any():
            raise ValueError("every z must lie in [1, D]")
        h = self.gru_en.step(self.mlp_s1(Tensor(self.normalize(anchor))),
                             Tensor(np.zeros((b, self.k1))))
        states = [h]
        for i in range(1, self.D + 1):
            x = self.mlp_a(Tensor(actions[:, i - 1]))
            h_new = self.gru_en.step(x, h)
            m = (z >= i).astype(np.float64)[:, None]
            h = h_new * m + h * (1.0 - m)
            states.append(h)
        enc = ad.stack(states, axis=1)
        mask = np.arange(self.D + 1)[None, :] <= z[:, None]
        return enc, h, mask

    def encode(self, info: InformationState) -> np.ndarray:
        """Context representation of one information state (length K1)."""
        if info.z < 1 or len(info.actions) == 0:
            raise ValueError("information state must carry at least one action")
        if info.z > self.D:
            raise ValueError(f"z={info.z} exceeds the encoder capacity D={self.D}")
        base = np.asarray(info.base_state, dtype=np.float64)
        if base.shape != (self.state_dim,):
            raise ValueError(f"state dim {base.shape} does not match encoder ({self.state_dim},)")
        actions = np.zeros((1, self.D, self.action_dim))
        for j, a in enumerate(info.actions):
            actions[0, j] = np.asarray(a, dtype=np.float64)
        _, h, _ = self.encode_batch(base[None, :], actions, np.array([info.z]))
        self.encode_count += 1
        return h.data[0].copy()

    # -- decoder ---------------------------------------------------------------

    def decode_batch(self, enc: Tensor, enc_mask: np.ndarray, h_final: Tensor,
                     labels_norm: np.ndarray, rng: np.random.Generator | None,
                     p: float) -> Tensor:
        """Run D decoder steps; returns normalized predictions [B,D,S].

        Teacher forcing draws one Bernoulli(p) per (step, sample): feed the
        model's own previous prediction on success, ground truth otherwise.
        """
        b = labels_norm.shape[0]
        hbar = h_final
        prev_pred: Tensor | None = None
        preds = []
        for i in range(1, self.D + 1):
            context, _ = attention_batched(enc, hbar, enc_mask)
            if i == 1:
                s_in: Tensor = Tensor(np.zeros((b, self.state_dim)))
            else:
                truth = labels_norm[:, i - 2]
                if p >= 1.0:
                    s_in = prev_pred
                elif p <= 0.0:
                    s_in = Tensor(truth)
                else:
                    own = (rng.random(b) < p).astype(np.float64)[:, None]
                    s_in = prev_pred * own + truth * (1.0 - own)
            x = ad.concat([self.mlp_s2(s_in), context], axis=1)
            hbar = self.gru_de.step(x, hbar)
            pred = self.mlp_s3(ad.concat([hbar, context], axis=1))
            preds.append(pred)
            prev_pred = pred
        return ad.stack(preds, axis=1)

    def loss_on_batch(self, batch: dict[str, np.ndarray],
                      rng: np.random.Generator | None, p: float) -> tuple[Tensor, Tensor]:
        """Masked MSE (per scalar element, normalized space) plus predictions."""
        enc, h_final, enc_mask = self.encode_batch(batch["anchor"], batch["actions"], batch["d"])
        labels_norm = self.normalize(batch["labels"])
        preds = self.decode_batch(enc, enc_mask, h_final, labels_norm, rng, p)
        mask = batch["mask"][:, :, None]
        err = (preds - labels_norm) * mask
        denom = float(batch["mask"].sum()) * self.state_dim
        loss = (err * err).sum() * (1.0 / denom)
        return loss, preds


def decode_train(model: Seq2SeqModel, sample: TrainingSample,
                 rng: np.random.Generator, p: float | None = None):
    """Decode one training sample; returns (predicted states, masked MSE).

    Predictions are the d real positions, denormalized to raw state units.
    The loss is the element-mean squared error in normalized space.
    """
    p = model.p if p is None else p
    batch = batch_arrays([sample])
    loss, preds = model.loss_on_batch(batch, rng, p)
    out = [model.denormalize(preds.data[0, i]) for i in range(sample.d)]
    return out, float(loss.data)


def predict_states(model: Seq2SeqModel, info: InformationState) -> list[np.ndarray]:
    """Autoregressive reconstruction of the z missing states (raw units)."""
    if not model.trained:
        warnings.warn("predict_states on an untrained model", stacklevel=2)
    z = info.z
    base = np.asarray(info.base_state, dtype=np.float64)
    actions = np.zeros((1, model.D, model.action_dim))
    for j, a in enumerate(info.actions):
        actions[0, j] = np.asarray(a, dtype=np.float64)
    enc, h_final, enc_mask = model.encode_batch(base[None, :], actions, np.array([z]))
    labels = np.zeros((1, model.D, model.state_dim))
    preds = model.decode_batch(enc, enc_mask, h_final, labels, None, p=1.0)
    return [model.denormalize(preds.data[0, i]) for i in range(z)]


def evaluate_mse(model: Seq2SeqModel, samples: list, batch_size: int = 256,
                 p: float = 1.0) -> float:
    """Masked MSE per state element in raw units (autoregressive by default)."""
    total = 0.0
    count = 0.0
    for lo in range(0, len(samples), batch_size):
        batch = batch_arrays(samples[lo:lo + batch_size])
        _, preds = model.loss_on_batch(batch, None, p)
        raw = model.denormalize(preds.data)
        err = (raw - batch["labels"]) * batch["mask"][:, :, None]
        total += float((err * err).sum())
        count += float(batch["mask"].sum()) * model.state_dim
    if count == 0:
        raise ValueError("no real positions in the sample set")
    return total / count


def pretrain(model: Seq2SeqModel, train: list, test: list, epochs: int,
             batch_size: int, lr: float, seed: int) -> tuple[Seq2SeqModel, list[float]]:
    """Adam minibatch training; the curve is the per-epoch autoregressive
    test MSE in raw units.  Freezes the model on return."""
    if not train or not test:
        raise ValueError("pretrain needs non-empty train and test sets")
    if epochs == 0:
        return model, []
    model.set_normalization(train[0].store.all_states())
    params = model.parameters
    opt = Adam(params, lr=lr)
    rng = np.random.default_rng(seed)
    curve = []
    for epoch in range(epochs):
        order = rng.permutation(len(train))
        for lo in range(0, len(train), batch_size):
            idx = order[lo:lo + batch_size]
            batch = batch_arrays([train[i] for i in idx])
            loss, _ = model.loss_on_batch(batch, rng, model.p)
            if not np.isfinite(loss.data):
                raise RuntimeError(
                    f"pretraining diverged (non-finite loss) at epoch {epoch}, batch {lo // batch_size}")
            opt.step(gradients(loss, params))
        curve.append(evaluate_mse(model, test, batch_size=batch_size, p=1.0))
    model.trained = True
    return model, curve


def save_model(path: str, model: Seq2SeqModel, extra_meta: dict | None = None) -> None:
    meta = {
        "state_dim": model.state_dim, "action_dim": model.action_dim,
        "D": model.D, "K1": model.k1, "K2": model.k2, "p": model.p,
        "trained": model.trained,
    }
    if extra_meta:
        meta.update(extra_meta)
    arrays = {name: t.data for name, t in model.parameters.items()}
    arrays["norm.mean"] = model.state_mean
    arrays["norm.std"] = model.state_std
    storage.save_arrays(path, meta, arrays)


def load_model(path: str) -> tuple[Seq2SeqModel, dict]:
    meta, arrays = storage.load_arrays(path)
    model = Seq2SeqModel(meta["state_dim"], meta["action_dim"], meta["D"],
                         k1=meta["K1"], k2=meta["K2"], p=meta["p"])
    for name, tensor in model.parameters.items():
        tensor.data[...] = arrays[name]
    model.state_mean = arrays["norm.mean"]
    model.state_std = arrays["norm.std"]
    model.trained = bool(meta["trained"])
    return model, meta
