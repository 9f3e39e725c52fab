"""Seeded random streams.

Every consumer asks for a stream by ``(master_seed, label)``. The label is
hashed together with the seed into a 128-bit Philox key, so streams are
independent of the order in which they are requested and concurrent tasks
never share generator state.
"""
from __future__ import annotations

import hashlib

import numpy as np

RNG_ALGORITHM = (
    "numpy Philox4x64-10; key = blake2b-128('<seed>/<label>'); "
    "normal deviates by numpy ziggurat"
)


def stream_key(master_seed: int, stream_label: str) -> int:
    digest = hashlib.blake2b(
        f"{int(master_seed)}/{stream_label}".encode(), digest_size=16
    ).digest()
    return int.from_bytes(digest, "little")


def seeded_rng(master_seed: int, stream_label: str) -> np.random.Generator:
    """Return the generator for one named stream of a run."""
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, stream_label)))
