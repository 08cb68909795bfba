"""Object-state hashing: a binarizing autoencoder followed by a fixed
random sign projection.

The encoder maps a flat object-state vector to a (0,1)^D code; training
pushes each code component toward 0 or 1 while the decoder keeps the
code informative. Thresholded codes are projected through an immutable
H x D matrix and the H sign bits form the cluster index, so states with
identical binarized codes always share an index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .geometry import Pose, positions_of

Array = np.ndarray


@dataclass
class StateHasher:
    encoder: nn.DenseNet      # input -> D, sigmoid output
    decoder: nn.DenseNet      # D -> input, identity output
    projection: Array         # (H, D), fixed at construction
    bin_weight: float
    projection_seed: int

    @property
    def input_dim(self) -> int:
        return self.encoder.sizes[0]

    @property
    def latent_dim(self) -> int:
        return self.encoder.sizes[-1]

    @property
    def n_bits(self) -> int:
        return self.projection.shape[0]

    @property
    def n_indices(self) -> int:
        return 1 << self.n_bits

    @property
    def params(self) -> list:
        return self.encoder.params + self.decoder.params


def build_hasher(input_dim: int, latent_dim: int = 32, n_bits: int = 5,
                 bin_weight: float = 1.0, hidden: int = 64,
                 encoder_seed: int = 0, decoder_seed: int = 1,
                 projection_seed: int = 2) -> StateHasher:
    if not 1 <= n_bits <= latent_dim:
        raise ValueError("need 1 <= n_bits <= latent_dim")
    if bin_weight < 0:
        raise ValueError("bin_weight must be nonnegative")
    encoder = nn.init([input_dim, hidden, latent_dim], ["tanh", "sigmoid"], encoder_seed)
    decoder = nn.init([latent_dim, hidden, input_dim], ["tanh", "identity"], decoder_seed)
    projection = np.random.default_rng(projection_seed).standard_normal((n_bits, latent_dim))
    projection.setflags(write=False)
    return StateHasher(encoder, decoder, projection, float(bin_weight),
                       int(projection_seed))


# ---------------------------------------------------------------------------
# object state assembly


def build_object_state(canonical_points, current_pose: Pose, goal_pose: Pose) -> Array:
    """Concatenated current-pose and goal-pose point coordinates."""
    pos = positions_of(canonical_points)
    if pos.shape[0] == 0:
        raise ValueError("need at least one canonical point")
    return np.concatenate([current_pose.apply(pos).ravel(),
                           goal_pose.apply(pos).ravel()])


def object_state_batch(canonical_positions: Array, current_translations: Array,
                       goal_translations: Array) -> Array:
    """Batched build_object_state for translation-only poses (N, 2*M*d)."""
    canon = np.asarray(canonical_positions, dtype=np.float64)
    n = current_translations.shape[0]
    cur = canon[None, :, :] + current_translations[:, None, :]
    goal = canon[None, :, :] + goal_translations[:, None, :]
    return np.concatenate([cur.reshape(n, -1), goal.reshape(n, -1)], axis=1)


# ---------------------------------------------------------------------------
# hashing


def encode(hasher: StateHasher, states: Array) -> Array:
    """(B, D) codes in (0, 1)."""
    codes, _ = nn.forward(hasher.encoder, states)
    return codes


def binarize(codes: Array) -> Array:
    """Threshold at 0.5; exactly 0.5 maps to 0."""
    return (codes > 0.5).astype(np.float64)


def hash_bits(hasher: StateHasher, bits: Array) -> Array:
    """SimHash the (B, D) binary codes to (B,) indices in [0, 2^H)."""
    signs = 2.0 * bits - 1.0
    dots = signs @ hasher.projection.T
    h = dots > 0.0  # exact zero maps to bit 0
    weights = (1 << np.arange(hasher.n_bits, dtype=np.int64))
    return h @ weights


def hash_states(hasher: StateHasher, states: Array) -> Array:
    return hash_bits(hasher, binarize(encode(hasher, states)))


def hash_state(hasher: StateHasher, state: Array) -> int:
    """Single-state convenience wrapper; returns a Python int."""
    return int(hash_states(hasher, np.asarray(state, dtype=np.float64)[None, :])[0])


# ---------------------------------------------------------------------------
# autoencoder training


def ae_loss_and_grads(hasher: StateHasher, states: Array):
    """Mean reconstruction + binarization loss and exact gradients.

    loss = mean_b[ |decode(encode(s)) - s|^2
                   + (bin_weight / D) * sum_i min((1-b_i)^2, b_i^2) ]

    Returns (loss, encoder grads, decoder grads) in nn.params order.
    """
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2 or states.shape[0] == 0:
        raise ValueError("states must be a nonempty (batch, dim) array")
    batch = states.shape[0]
    d_lat = hasher.latent_dim

    codes, enc_cache = nn.forward(hasher.encoder, states)
    recon, dec_cache = nn.forward(hasher.decoder, codes)

    diff = recon - states
    loss_rec = float((diff * diff).sum()) / batch
    pen = np.minimum((1.0 - codes) ** 2, codes ** 2)
    loss_pen = hasher.bin_weight / d_lat * float(pen.sum()) / batch

    dec_grads, d_codes = nn.backward(hasher.decoder, dec_cache, 2.0 * diff / batch)
    scale = hasher.bin_weight / (d_lat * batch)
    d_pen = np.where(codes > 0.5, -2.0 * (1.0 - codes), 2.0 * codes) * scale
    enc_grads, _ = nn.backward(hasher.encoder, enc_cache, d_codes + d_pen)

    return loss_rec + loss_pen, enc_grads, dec_grads


def binarization_penalty(hasher: StateHasher, states: Array) -> float:
    """Mean per-state binarization penalty (diagnostic for training)."""
    codes = encode(hasher, np.asarray(states, dtype=np.float64))
    pen = np.minimum((1.0 - codes) ** 2, codes ** 2)
    return hasher.bin_weight / hasher.latent_dim * float(pen.sum()) / states.shape[0]


def train_step(hasher: StateHasher, states: Array, opt_state: nn.AdamState,
               lr: float) -> float:
    """One Adam step on the autoencoder; the projection never changes."""
    loss, enc_grads, dec_grads = ae_loss_and_grads(hasher, states)
    nn.adam_step(hasher.params, enc_grads + dec_grads, opt_state, lr)
    return loss


# ---------------------------------------------------------------------------
# checkpointing


def to_npz_dict(hasher: StateHasher) -> dict:
    out = nn.params_to_npz_dict("hasher_enc", hasher.encoder)
    out.update(nn.params_to_npz_dict("hasher_dec", hasher.decoder))
    out["hasher_projection"] = hasher.projection
    out["hasher_meta"] = np.array([hasher.bin_weight, hasher.projection_seed,
                                   hasher.encoder.sizes[0], hasher.encoder.sizes[1],
                                   hasher.latent_dim], dtype=np.float64)
    return out


def from_npz_dict(data) -> StateHasher:
    meta = data["hasher_meta"]
    bin_weight = float(meta[0])
    projection_seed = int(meta[1])
    input_dim, hidden, latent = int(meta[2]), int(meta[3]), int(meta[4])
    encoder = nn.net_from_npz("hasher_enc", data, [input_dim, hidden, latent],
                              ["tanh", "sigmoid"])
    decoder = nn.net_from_npz("hasher_dec", data, [latent, hidden, input_dim],
                              ["tanh", "identity"])
    projection = np.array(data["hasher_projection"], dtype=np.float64)
    projection.setflags(write=False)
    return StateHasher(encoder, decoder, projection, bin_weight, projection_seed)
