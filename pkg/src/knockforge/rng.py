"""Counter-based pseudo-random streams.

Every draw is a pure function of (key, counter), where the key is a 64-bit
hash of the base seed and a path of labels.  This gives replicate-parallel
streams with no sequence coupling: streams with distinct paths are
independent, and the same path always reproduces the same bytes, no matter
which backend (numpy or numba) consumes them.

The generator is SplitMix64: output_i = mix64(key + (i+1) * GOLDEN), with
mix64 the Stafford variant-13 finalizer.  Keys are derived by chaining
mix64 over the label hashes.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: int) -> int:
    """Stafford mix13 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def _label_code(label) -> int:
    if isinstance(label, (int, np.integer)):
        return mix64(int(label) ^ 0xA5A5A5A5A5A5A5A5)
    if isinstance(label, str):
        # FNV-1a over utf-8 bytes
        h = 0xCBF29CE484222325
        for b in label.encode("utf-8"):
            h = ((h ^ b) * 0x100000001B3) & MASK64
        return mix64(h)
    raise TypeError(f"stream labels must be int or str, got {type(label)!r}")


def derive_key(key: int, *labels) -> int:
    k = key & MASK64
    for lab in labels:
        k = mix64((k + GOLDEN) ^ _label_code(lab))
    return k


def raw_uint64(key: int, start: int, count: int) -> np.ndarray:
    """Outputs mix64(key + (start+1..start+count) * GOLDEN) as uint64."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = (np.uint64(key) + idx * np.uint64(GOLDEN)).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class RngStream:
    """A named, forkable random stream.

    `derive` creates an independent child stream; drawing methods advance
    this stream's counter.  Identical (seed, path) always reproduces the
    identical draw sequence.
    """

    def __init__(self, seed: int, _key: int | None = None):
        self.key = derive_key(mix64(seed), "root") if _key is None else _key
        self.counter = 0

    def derive(self, *labels) -> "RngStream":
        return RngStream(0, _key=derive_key(self.key, *labels))

    def _take(self, count: int) -> np.ndarray:
        out = raw_uint64(self.key, self.counter, count)
        self.counter += count
        return out

    def uniform(self, size=None) -> np.ndarray | float:
        """Uniform draws in [0, 1)."""
        n = int(np.prod(size)) if size is not None else 1
        u = (self._take(n) >> np.uint64(11)).astype(np.float64) * _INV53
        if size is None:
            return float(u[0])
        return u.reshape(size)

    def normal(self, size=None) -> np.ndarray | float:
        """Standard normal draws via Box-Muller."""
        n = int(np.prod(size)) if size is not None else 1
        m = (n + 1) // 2
        raw = self._take(2 * m)
        u1 = ((raw[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV53
        u2 = (raw[m:] >> np.uint64(11)).astype(np.float64) * _INV53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        if size is None:
            return float(z[0])
        return z.reshape(size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray | int:
        """Uniform integers in [low, high) by rejection-free modular scaling.

        Uses floor(u * span) on 53-bit uniforms; bias is < 2**-40 for the
        span sizes used here (all far below 2**32).
        """
        span = high - low
        if span <= 0:
            raise ValueError("high must exceed low")
        n = int(np.prod(size)) if size is not None else 1
        u = (self._take(n) >> np.uint64(11)).astype(np.float64) * _INV53
        vals = low + np.minimum((u * span).astype(np.int64), span - 1)
        if size is None:
            return int(vals[0])
        return vals.reshape(size)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of arange(n)."""
        perm = np.arange(n)
        if n > 1:
            js = np.array(
                [self.integers(0, i + 1) for i in range(n - 1, 0, -1)]
            )
            for idx, i in enumerate(range(n - 1, 0, -1)):
                j = js[idx]
                perm[i], perm[j] = perm[j], perm[i]
        return perm

    def shuffle(self, arr: np.ndarray) -> np.ndarray:
        """Returns a shuffled copy (does not mutate the input)."""
        return np.asarray(arr)[self.permutation(len(arr))]

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        """First k entries of a random permutation of arange(n)."""
        if k > n:
            raise ValueError("cannot choose more items than available")
        return self.permutation(n)[:k]
