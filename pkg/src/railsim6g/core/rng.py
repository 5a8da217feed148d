"""Named random streams derived from a run seed.

Every stochastic component draws from its own Philox stream keyed by
``(seed, stream_id)``. Philox is counter-based, so a stream's sequence does
not depend on how many values any other stream consumed.
"""
from __future__ import annotations

import hashlib

import numpy as np

MAX_SEED = (1 << 64) - 1


def _id_words(stream_id: str) -> tuple[int, ...]:
    digest = hashlib.blake2b(stream_id.encode("utf-8"), digest_size=16).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


def stream_id(*parts: object) -> str:
    """Join ``parts`` into a canonical stream identifier (``"a/b/3"``)."""
    return "/".join(str(p) for p in parts)


def stream(seed: int, *parts: object) -> np.random.Generator:
    """Return the generator for stream ``parts`` under ``seed``.

    The same ``(seed, parts)`` always replays bit-identically; distinct
    ``parts`` give statistically independent streams.
    """
    if not 0 <= int(seed) <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    sid = stream_id(*parts)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=_id_words(sid))
    return np.random.Generator(np.random.Philox(ss))


def trial_seeds(seed: int, label: str, count: int) -> list[int]:
    """Derive ``count`` child integer seeds for a labelled family of trials."""
    g = stream(seed, "seeds", label)
    return [int(x) for x in g.integers(0, 2**63 - 1, size=count, dtype=np.int64)]
