"""Pure numpy tree expansion with the counter-based hash RNG.

Semantics are shared bit-for-bit with the compiled kernel: every node carries a
64-bit key; the survival uniform of cell ``c`` and the key of child ``c`` are
splitmix64 hashes of the key salted by ``c``.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MUL1 = np.uint64(0xBF58476D1CE4E5B9)
MUL2 = np.uint64(0x94D049BB133111EB)
SALT_CHILD = 0x632BE59BD9B4E019
SALT_UNIF = 0x8CB92BA72F3D8DD7
SALT_ROOT = 0xD6E8FEB86659FD93
TO_UNIT = 2.0**-53


def mix(x):
    """splitmix64 finaliser on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(x, dtype=np.uint64) + GOLDEN
    z = (z ^ (z >> np.uint64(30))) * MUL1
    z = (z ^ (z >> np.uint64(27))) * MUL2
    return z ^ (z >> np.uint64(31))


def mix_int(x: int) -> int:
    return int(mix(np.array([x & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0])


def salts(n: int, salt: int) -> np.ndarray:
    return mix(np.arange(1, n + 1, dtype=np.uint64) ^ np.uint64(salt))


def root_key(seed: int, *stream: int) -> int:
    key = mix_int(seed ^ SALT_ROOT)
    for s in stream:
        key = mix_int(key ^ mix_int(s + 1))
    return key


def uniforms(keys: np.ndarray, salt_vals: np.ndarray) -> np.ndarray:
    """``(mix(key ^ salt) >> 11) * 2^-53`` for every (key, salt) pair (outer product)."""
    h = mix(keys[:, None] ^ salt_vals[None, :])
    return (h >> np.uint64(11)).astype(np.float64) * TO_UNIT


def expand(keys, q, mode, p, cum, masks, w, child_salts, unif_salts, limit):
    """Children of every node in ``keys``.

    ``mode`` 0: independent cells with survival probabilities ``p``;
    ``mode`` 1: mixture, atom chosen by the uniform of salt index ``d`` against
    ``cum``.  Returns ``(child_keys, child_q, parent, cell)`` in (parent, cell)
    order, or ``None`` when more than ``limit`` children would be produced.
    """
    d = len(p)
    if len(keys) == 0:
        return (
            np.empty(0, np.uint64),
            np.empty(0, np.float64),
            np.empty(0, np.int64),
            np.empty(0, np.int32),
        )
    if mode == 0:
        alive = uniforms(keys, unif_salts[:d]) < p[None, :]
    else:
        u = uniforms(keys, unif_salts[d : d + 1])[:, 0]
        atom = np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)
        alive = masks[atom].astype(bool)
    if int(alive.sum()) > limit:
        return None
    parent, cell = np.nonzero(alive)
    ckeys = mix(keys[parent] ^ child_salts[cell])
    cq = q[parent] * w[cell]
    return ckeys, cq, parent.astype(np.int64), cell.astype(np.int32)
