"""Pedersen commitments and model signatures for authenticated parameter upload."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from sympy import isprime


@dataclass(frozen=True)
class CommitmentParams:
    p: int        # safe prime, p = 2q + 1
    q: int        # prime order of the subgroup
    g: int
    h: int

    def validate(self) -> None:
        p, q, g, h = self.p, self.q, self.g, self.h
        if not (isprime(p) and isprime(q)) or (p - 1) % q:
            raise ValueError("need primes p, q with q | p - 1")
        for name, x in (("g", g), ("h", h)):
            if not 1 < x < p or pow(x, q, p) != 1:
                raise ValueError(f"{name} must generate the order-q subgroup")
        if g == h:
            raise ValueError("g and h must differ")


def _hash_int(*parts: bytes) -> int:
    d = hashlib.sha256()
    for part in parts:
        d.update(len(part).to_bytes(8, "big"))
        d.update(part)
    return int.from_bytes(d.digest(), "big")


def _subgroup_element(seed: bytes, label: bytes, p: int) -> int:
    """Square of a hash-derived residue; nobody knows its discrete log to another base."""
    counter = 0
    while True:
        x = _hash_int(seed, label, counter.to_bytes(4, "big")) % p
        y = pow(x, 2, p)
        if y not in (0, 1):
            return y
        counter += 1


def generate_params(bits: int, rng: np.random.Generator) -> CommitmentParams:
    """Random safe-prime group with ``bits``-bit ``q`` and independent generators."""
    if bits < 8:
        raise ValueError("use at least 8-bit groups")
    while True:
        q = int.from_bytes(rng.bytes((bits + 7) // 8), "big")
        q |= (1 << (bits - 1)) | 1
        q &= (1 << bits) - 1
        if isprime(q) and isprime(2 * q + 1):
            break
    p = 2 * q + 1
    seed = p.to_bytes((p.bit_length() + 7) // 8, "big")
    g = _subgroup_element(seed, b"g", p)
    h = _subgroup_element(seed, b"h", p)
    params = CommitmentParams(p, q, g, h)
    params.validate()
    return params


def commit(value: int, blind: int, params: CommitmentParams) -> int:
    """``g^value * h^blind mod p`` for value and blind in ``[0, q)``."""
    for name, x in (("value", value), ("blind", blind)):
        if not 0 <= x < params.q:
            raise ValueError(f"{name} must lie in [0, q)")
    return pow(params.g, value, params.p) * pow(params.h, blind, params.p) % params.p


def verify(commitment: int, value: int, blind: int, params: CommitmentParams) -> bool:
    """Check an opening; out-of-range openings are rejected rather than raised."""
    if not (0 <= value < params.q and 0 <= blind < params.q):
        return False
    return commit(value, blind, params) == commitment


def sign_model(model: bytes, dataset_digest: bytes) -> bytes:
    """SHA-256 over both inputs, each prefixed with its 8-byte length."""
    if not model:
        raise ValueError("model bytes must be non-empty")
    if not dataset_digest:
        raise ValueError("dataset digest must be non-empty")
    d = hashlib.sha256()
    for part in (model, dataset_digest):
        d.update(len(part).to_bytes(8, "big"))
        d.update(part)
    return d.digest()


def verify_update(model: bytes, dataset_digest: bytes, signature: bytes,
                  commitment: int, value: int, blind: int, params: CommitmentParams) -> bool:
    """Accept an uploaded model when both its signature and its commitment opening check out."""
    try:
        sig_ok = sign_model(model, dataset_digest) == signature
    except ValueError:
        return False
    return sig_ok and verify(commitment, value, blind, params)
