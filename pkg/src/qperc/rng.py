"""Seeded randomness: per-site uniforms, trial seed derivation and the
autocorrelation acceptance test for occupation bitstreams.

Site uniforms come from numpy's counter-based Philox4x64 generator keyed by
the lattice seed.  The k-th double of the stream belongs to site k in
row-major order, so a given (seed, row, col) always sees the same uniform.
A site is occupied iff its uniform is below P, which makes occupation
monotone in P when the seed is held fixed.
"""
from __future__ import annotations

import hashlib
import struct

import numpy as np

from .errors import DomainError

UINT64_MASK = (1 << 64) - 1


def site_uniforms(seed: int, count: int) -> np.ndarray:
    """Return ``count`` uniforms in [0, 1) for lattice ``seed``."""
    gen = np.random.Generator(np.random.Philox(key=int(seed) & UINT64_MASK))
    return gen.random(count)


def derive_seed(master_seed: int, *parts: int) -> int:
    """Stable 64-bit seed from a master seed and integer parts.

    BLAKE2b (8-byte digest) over the little-endian uint64 encoding of
    ``(master_seed, *parts)``; the digest is read back as little-endian.
    """
    words = [int(master_seed) & UINT64_MASK] + [int(p) & UINT64_MASK for p in parts]
    payload = struct.pack(f"<{len(words)}Q", *words)
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return struct.unpack("<Q", digest)[0]


def autocorrelation_check(bitstream, max_lag: int) -> dict:
    """Lag-k sample autocorrelations for k = 1..max_lag.

    Passes iff every ``|r_k| < 3/sqrt(n)``.  Returns
    ``{"coefficients": {k: r_k}, "bound": 3/sqrt(n), "pass": bool}``.
    """
    x = np.asarray(bitstream, dtype=float).ravel()
    n = x.size
    max_lag = int(max_lag)
    if max_lag < 1:
        raise DomainError("max_lag must be >= 1")
    if n < 10 * max_lag:
        raise DomainError(f"sequence of length {n} too short for max_lag={max_lag}")
    d = x - x.mean()
    denom = float(d @ d)
    if denom == 0.0:
        raise DomainError("zero-variance sequence: autocorrelation undefined")
    coeffs = {k: float(d[:-k] @ d[k:]) / denom for k in range(1, max_lag + 1)}
    bound = 3.0 / np.sqrt(n)
    return {
        "coefficients": coeffs,
        "bound": float(bound),
        "pass": all(abs(r) < bound for r in coeffs.values()),
    }
