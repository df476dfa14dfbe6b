from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *keys) -> int:
    """Deterministic 64-bit seed from a master seed and any hashable-by-repr keys."""
    payload = repr((int(seed) & _MASK64, keys)).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a
