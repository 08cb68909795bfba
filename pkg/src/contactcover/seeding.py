"""Deterministic RNG fan-out.

Every random stream in a run is derived from the root seed plus a fixed
stream constant (and optional per-instance indices) via
``np.random.SeedSequence((root, stream, *idx))``. Adding a new stream
means appending a new constant; existing streams never shift.
"""
from __future__ import annotations

import numpy as np

# stream constants: append only, never renumber
STREAM_ENV = 0          # per-env episode randomness, + env index
STREAM_POLICY = 1       # policy net init (actor, critic, log_std)
STREAM_HASHER_ENC = 2   # autoencoder encoder init
STREAM_HASHER_DEC = 3   # autoencoder decoder init
STREAM_PROJECTION = 4   # hash projection matrix
STREAM_ROLLOUT = 5      # action sampling noise
STREAM_SHUFFLE = 6      # PPO minibatch permutations
STREAM_AE_SAMPLE = 7    # autoencoder minibatch sampling
STREAM_EVAL_ENV = 8     # eval-time env randomness, + env index
STREAM_REGIONS = 9      # surface region clustering


def seed_sequence(root_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(tuple(int(v) for v in (root_seed, *key)))


def rng(root_seed: int, *key: int) -> np.random.Generator:
    """Generator for stream (root, *key)."""
    return np.random.default_rng(seed_sequence(root_seed, *key))


def seed_int(root_seed: int, *key: int) -> int:
    """A plain integer seed derived from the same keyed scheme."""
    return int(seed_sequence(root_seed, *key).generate_state(1, np.uint64)[0])
