"""Deterministic randomness helpers.

Two kinds of randomness are used:

* stream randomness (sampling, scenario generation): ``random.Random``
  instances seeded from the run seed plus a string tag, so independent
  consumers never share a stream and replays are exact;
* pointwise randomness (simulated probe responses): a pure hash of
  (seed, address, tick), so any single probe can be recomputed without
  replaying history.
"""

from __future__ import annotations

import hashlib
import random
import struct
import zlib

_U64 = float(1 << 64)

# Domain tags keep the pointwise hash inputs from ever colliding across uses.
DOMAIN_PROBE = 0
DOMAIN_INJECTION = 1


def derive_seed(base_seed: int, tag: str) -> int:
    """Derive a child seed from a base seed and a short string tag."""
    return (base_seed * 1_000_003 + zlib.crc32(tag.encode("utf-8"))) & 0xFFFFFFFF


def tagged_rng(base_seed: int, tag: str) -> random.Random:
    """A fresh Random stream for one named consumer."""
    return random.Random(derive_seed(base_seed, tag))


def unit_hash(domain: int, seed: int, a: int, b: int) -> float:
    """Map (domain, seed, a, b) to a float in [0, 1) via a keyed hash.

    Stable across runs and platforms; used where a value must be
    recomputable point-by-point instead of drawn from a stream.
    """
    raw = struct.pack("<BQqq", domain & 0xFF, seed & 0xFFFFFFFFFFFFFFFF, a, b)
    digest = hashlib.blake2b(raw, digest_size=8).digest()
    return struct.unpack("<Q", digest)[0] / _U64
