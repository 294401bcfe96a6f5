"""Prime-field arithmetic for the equality-testing domain.

Scalars are plain Python ints held canonical in ``[0, p)``. Bulk kernels
operate on ``numpy.uint64`` arrays; for the default Mersenne modulus
``2**61 - 1`` the 122-bit product is assembled from 32-bit limbs so the
whole computation stays in uint64 without overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FieldMismatchError, ParameterError

M61 = (1 << 61) - 1

_U64 = np.uint64
_MASK32 = _U64(0xFFFFFFFF)
_MASK29 = _U64((1 << 29) - 1)
_M61 = _U64(M61)
_S61 = _U64(61)
_S32 = _U64(32)
_S29 = _U64(29)
_S3 = _U64(3)


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < (1 << 32):
        if n % 2 == 0:
            return n == 2
        d = 3
        while d * d <= n:
            if n % d == 0:
                return False
            d += 2
        return True
    # deterministic Miller-Rabin for n < 3.3e24
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for base in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41):
        x = pow(base, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _fold61(x: np.ndarray) -> np.ndarray:
    """Reduce uint64 values below 2**64 modulo 2**61 - 1."""
    x = (x & _M61) + (x >> _S61)
    return np.where(x >= _M61, x - _M61, x)


def mulmod_m61(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise ``a * b mod 2**61 - 1`` for canonical uint64 operands."""
    a = np.asarray(a, dtype=_U64)
    b = np.asarray(b, dtype=_U64)
    a_lo, a_hi = a & _MASK32, a >> _S32
    b_lo, b_hi = b & _MASK32, b >> _S32
    lo = a_lo * b_lo                       # < 2**64
    mid = a_lo * b_hi + a_hi * b_lo        # < 2**62
    hi = a_hi * b_hi                       # < 2**58
    # 2**64 = 8 and mid * 2**32 = (mid >> 29) * 2**61 + (mid & (2**29 - 1)) * 2**32
    acc = (hi << _S3) + (mid >> _S29) + ((mid & _MASK29) << _S32)
    acc = _fold61(acc) + _fold61(lo)
    return _fold61(acc)


@dataclass(frozen=True)
class Field:
    """The prime field Z_p.

    Any prime ``3 <= p < 2**63`` is accepted so that tiny fields can be
    enumerated exhaustively in tests; production uses ``2**61 - 1``.
    """

    modulus: int = M61

    def __post_init__(self) -> None:
        p = self.modulus
        if not isinstance(p, int) or isinstance(p, bool):
            raise ParameterError(f"modulus must be an int, got {type(p).__name__}")
        if p < 3 or p >= (1 << 63):
            raise ParameterError(f"modulus {p} outside supported range [3, 2**63)")
        if p != M61 and not _is_prime(p):
            raise ParameterError(f"modulus {p} is not prime")

    def __repr__(self) -> str:
        return "Field(2**61 - 1)" if self.modulus == M61 else f"Field({self.modulus})"

    # -- scalar operations ------------------------------------------------

    def check(self, a: int) -> int:
        if not 0 <= a < self.modulus:
            raise ParameterError(f"{a} is not a canonical element mod {self.modulus}")
        return a

    def add(self, a: int, b: int) -> int:
        s = a + b
        return s - self.modulus if s >= self.modulus else s

    def sub(self, a: int, b: int) -> int:
        s = a - b
        return s + self.modulus if s < 0 else s

    def neg(self, a: int) -> int:
        return self.modulus - a if a else 0

    def mul(self, a: int, b: int) -> int:
        return a * b % self.modulus

    def inv(self, a: int) -> int:
        if a % self.modulus == 0:
            raise ZeroDivisionError(f"0 has no inverse mod {self.modulus}")
        return pow(a, -1, self.modulus)

    def element(self, value: int) -> FieldElement:
        return FieldElement(value, self)

    # -- array operations -------------------------------------------------

    def asarray(self, values) -> np.ndarray:
        """Copy ``values`` into a canonical uint64 array, rejecting out-of-range entries."""
        if isinstance(values, np.ndarray) and values.dtype == _U64:
            arr = values.copy()
            bad = arr >= _U64(self.modulus)
        else:
            ints = [int(v) for v in values]
            bad_ints = [v for v in ints if not 0 <= v < self.modulus]
            if bad_ints:
                raise ParameterError(
                    f"{bad_ints[0]} is not a canonical element mod {self.modulus}"
                )
            return np.array(ints, dtype=_U64)
        if bad.any():
            raise ParameterError(
                f"{int(arr[bad][0])} is not a canonical element mod {self.modulus}"
            )
        return arr

    def vadd(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        p = _U64(self.modulus)
        s = a + b  # < 2**64 since p < 2**63
        return np.where(s >= p, s - p, s)

    def vsub(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        p = _U64(self.modulus)
        return np.where(a >= b, a - b, a + (p - b))

    def vmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.modulus == M61:
            return mulmod_m61(a, b)
        if self.modulus < (1 << 32):
            return (np.asarray(a, dtype=_U64) * np.asarray(b, dtype=_U64)) % _U64(self.modulus)
        prod = np.asarray(a, dtype=object) * np.asarray(b, dtype=object) % self.modulus
        return prod.astype(_U64)

    def vinv(self, a: np.ndarray) -> np.ndarray:
        if (np.asarray(a) == 0).any():
            raise ZeroDivisionError(f"0 has no inverse mod {self.modulus}")
        return np.array([pow(int(x), -1, self.modulus) for x in a], dtype=_U64)


DEFAULT_FIELD = Field(M61)


@dataclass(frozen=True)
class FieldElement:
    """A canonical element of a specific prime field."""

    value: int
    field: Field = DEFAULT_FIELD

    def __post_init__(self) -> None:
        if not 0 <= self.value < self.field.modulus:
            raise ParameterError(
                f"{self.value} is not canonical mod {self.field.modulus}"
            )

    def _other(self, other: FieldElement) -> int:
        if not isinstance(other, FieldElement):
            raise TypeError(f"expected FieldElement, got {type(other).__name__}")
        if other.field.modulus != self.field.modulus:
            raise FieldMismatchError(
                f"moduli differ: {self.field.modulus} vs {other.field.modulus}"
            )
        return other.value

    def __add__(self, other: FieldElement) -> FieldElement:
        return FieldElement(self.field.add(self.value, self._other(other)), self.field)

    def __sub__(self, other: FieldElement) -> FieldElement:
        return FieldElement(self.field.sub(self.value, self._other(other)), self.field)

    def __mul__(self, other: FieldElement) -> FieldElement:
        return FieldElement(self.field.mul(self.value, self._other(other)), self.field)

    def __neg__(self) -> FieldElement:
        return FieldElement(self.field.neg(self.value), self.field)

    def inverse(self) -> FieldElement:
        return FieldElement(self.field.inv(self.value), self.field)

    def __int__(self) -> int:
        return self.value

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(8, "little")


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def sub(a: FieldElement, b: FieldElement) -> FieldElement:
    return a - b


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def inv(a: FieldElement) -> FieldElement:
    return a.inverse()
