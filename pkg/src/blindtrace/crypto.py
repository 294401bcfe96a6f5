"""Randomness primitives: the dealer's random source, the affine pairwise
independent permutation family over Z_p, and uniform position shuffles."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

from .errors import ParameterError, RandomnessError
from .field import DEFAULT_FIELD, Field

_U64 = np.uint64


def _masks_for(bounds: np.ndarray) -> np.ndarray:
    """Smallest all-ones mask covering ``bound - 1`` for each bound."""
    top = bounds - _U64(1)
    mask = top.copy()
    for shift in (1, 2, 4, 8, 16, 32):
        mask |= mask >> _U64(shift)
    return mask


class RandomSource:
    """Uniform integer draws built on an abstract byte stream.

    Every bounded draw is made by masking a 64-bit word to the bit length of
    ``bound - 1`` and rejecting values ``>= bound``, so results are exactly
    uniform. Subclasses supply :meth:`random_bytes`; the enumeration harness
    overrides :meth:`below_each` directly.
    """

    def random_bytes(self, k: int) -> bytes:
        raise NotImplementedError

    def _words(self, count: int) -> np.ndarray:
        data = self.random_bytes(8 * count)
        if len(data) != 8 * count:
            raise RandomnessError("random source returned a short read")
        return np.frombuffer(data, dtype="<u8").astype(_U64)

    def below_each(self, bounds) -> np.ndarray:
        """One uniform draw from ``[0, bounds[i])`` for every ``i``."""
        bounds = np.asarray(bounds, dtype=_U64)
        if bounds.size and int(bounds.min()) < 1:
            raise ParameterError("bounds must be positive")
        out = np.empty(bounds.shape, dtype=_U64)
        masks = _masks_for(bounds)
        pending = np.arange(bounds.size)
        while pending.size:
            w = self._words(pending.size) & masks[pending]
            ok = w < bounds[pending]
            out[pending[ok]] = w[ok]
            pending = pending[~ok]
        return out

    def below(self, bound: int, size: int) -> np.ndarray:
        return self.below_each(np.full(size, bound, dtype=_U64))

    def randbelow(self, bound: int) -> int:
        return int(self.below_each(np.array([bound], dtype=_U64))[0])


class SystemRandomSource(RandomSource):
    """Operating-system CSPRNG; the production default."""

    def random_bytes(self, k: int) -> bytes:
        try:
            return os.urandom(k)
        except OSError as exc:  # pragma: no cover - platform failure
            raise RandomnessError(str(exc)) from exc


class SeededRandomSource(RandomSource):
    """Deterministic ChaCha20 keystream keyed by a seed. Test mode only."""

    def __init__(self, seed: int | bytes | str) -> None:
        if isinstance(seed, int):
            seed = seed.to_bytes(32, "little", signed=True)
        elif isinstance(seed, str):
            seed = seed.encode()
        key = hashlib.sha256(b"blindtrace-seed" + seed).digest()
        self._stream = Cipher(algorithms.ChaCha20(key, b"\x00" * 16), mode=None).encryptor()

    def random_bytes(self, k: int) -> bytes:
        return self._stream.update(b"\x00" * k)


@dataclass(frozen=True)
class PairwisePermutation:
    """The bijection ``x -> a*x + b`` on Z_p, with ``a != 0``."""

    a: int
    b: int
    field: Field = DEFAULT_FIELD

    def __post_init__(self) -> None:
        self.field.check(self.a)
        self.field.check(self.b)
        if self.a == 0:
            raise ParameterError("multiplier a must be nonzero")

    def apply(self, x: int) -> int:
        f = self.field
        return f.add(f.mul(self.a, x), self.b)

    def invert(self, y: int) -> int:
        f = self.field
        return f.mul(f.inv(self.a), f.sub(y, self.b))

    def to_bytes(self) -> bytes:
        return self.a.to_bytes(8, "little") + self.b.to_bytes(8, "little")


def sample_pairwise(rng: RandomSource, field: Field = DEFAULT_FIELD) -> PairwisePermutation:
    a, b = sample_pairwise_arrays(rng, field, 1)
    return PairwisePermutation(int(a[0]), int(b[0]), field)


def sample_pairwise_arrays(rng: RandomSource, field: Field, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` independent family members as (multipliers, offsets) arrays."""
    a = rng.below(field.modulus - 1, n) + _U64(1)
    b = rng.below(field.modulus, n)
    return a, b


def apply(perm: PairwisePermutation, x: int) -> int:
    return perm.apply(x)


def invert(perm: PairwisePermutation, y: int) -> int:
    return perm.invert(y)


class PositionPermutation:
    """A bijection on ``{0, ..., n-1}``; ``mapping[t]`` is the image of ``t``."""

    __slots__ = ("mapping",)

    def __init__(self, mapping) -> None:
        arr = np.array(mapping, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise ParameterError("position permutation must be a non-empty 1-d sequence")
        seen = np.zeros(arr.size, dtype=bool)
        if arr.min() < 0 or arr.max() >= arr.size:
            raise ParameterError("position permutation index out of range")
        seen[arr] = True
        if not seen.all():
            raise ParameterError("position permutation is not a bijection")
        arr.flags.writeable = False
        self.mapping = arr

    def __len__(self) -> int:
        return int(self.mapping.size)

    def __getitem__(self, t: int) -> int:
        return int(self.mapping[t])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PositionPermutation):
            return NotImplemented
        return np.array_equal(self.mapping, other.mapping)

    def __hash__(self) -> int:
        return hash(self.mapping.tobytes())

    def __repr__(self) -> str:
        return f"PositionPermutation({self.mapping.tolist()})"

    def inverse(self) -> PositionPermutation:
        inv = np.empty_like(self.mapping)
        inv[self.mapping] = np.arange(self.mapping.size)
        return PositionPermutation(inv)

    def to_bytes(self) -> bytes:
        return len(self).to_bytes(4, "little") + self.mapping.astype("<u4").tobytes()


def sample_position_perm(rng: RandomSource, n: int) -> PositionPermutation:
    """Uniform element of S_n by Fisher-Yates with unbiased bounded draws."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    perm = list(range(n))
    if n > 1:
        # i runs n-1 .. 1 and swaps with a uniform j in [0, i]
        js = rng.below_each(np.arange(n, 1, -1, dtype=_U64)).tolist()
        for i, j in zip(range(n - 1, 0, -1), js):
            perm[i], perm[j] = perm[j], perm[i]
    return PositionPermutation(perm)
