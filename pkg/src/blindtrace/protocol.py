"""Dealer-assisted match counting.

A trusted dealer hands the sender ``(P_t, Q)`` and the receiver
``(r_t, s)`` with ``s[Q(t)] = P_t(r_t)``. The receiver sends
``u_t = x_t + r_t``; the sender answers with ``v[Q(t)] = P_t(u_t - y_t)``;
the receiver counts positions where ``v == s``. Since
``v[Q(t)] - s[Q(t)] = a_t (x_t - y_t)`` with ``a_t != 0``, a position
matches exactly when ``x_t == y_t``.

Positions are 0-based. Keys are one-time: transports must discard them
after a single use.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .crypto import (
    PairwisePermutation,
    PositionPermutation,
    RandomSource,
    SystemRandomSource,
    sample_pairwise_arrays,
    sample_position_perm,
)
from .errors import ParameterError, ProtocolError
from .field import DEFAULT_FIELD, Field

_U64 = np.uint64


def receiver_sentinel(field: Field) -> int:
    """Label for receiver slots with no location fix."""
    return field.modulus - 1


def sender_sentinel(field: Field) -> int:
    """Label for case-database slots with no observation."""
    return field.modulus - 2


@dataclass(frozen=True)
class SessionParams:
    n: int
    field: Field = DEFAULT_FIELD
    session_id: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if not 0 <= self.session_id < 1 << 64:
            raise ParameterError("session_id must fit in 64 bits")


class _ArrayRecord:
    """Equality over dataclass fields that may hold numpy arrays."""

    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        for name in self.__dataclass_fields__:
            a, b = getattr(self, name), getattr(other, name)
            if isinstance(a, np.ndarray):
                if not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


@dataclass(eq=False)
class SenderKeys(_ArrayRecord):
    """Per-position affine maps (``a[t]``, ``b[t]``) and the position shuffle."""

    a: np.ndarray
    b: np.ndarray
    q: PositionPermutation
    field: Field = DEFAULT_FIELD
    session_id: int = 0

    def __post_init__(self) -> None:
        self.a = self.field.asarray(self.a)
        self.b = self.field.asarray(self.b)
        if not (len(self.a) == len(self.b) == len(self.q)):
            raise ParameterError("sender key lengths disagree")
        if (self.a == 0).any():
            raise ParameterError("pairwise permutation multiplier must be nonzero")

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def perms(self) -> list[PairwisePermutation]:
        return [PairwisePermutation(int(a), int(b), self.field) for a, b in zip(self.a, self.b)]


@dataclass(eq=False)
class ReceiverKeys(_ArrayRecord):
    """Pads ``r[t]`` in natural order and ``expected[k] = P_t(r_t)`` at ``k = Q(t)``."""

    pads: np.ndarray
    expected: np.ndarray
    field: Field = DEFAULT_FIELD
    session_id: int = 0

    def __post_init__(self) -> None:
        self.pads = self.field.asarray(self.pads)
        self.expected = self.field.asarray(self.expected)
        if len(self.pads) != len(self.expected):
            raise ParameterError("receiver key lengths disagree")

    @property
    def n(self) -> int:
        return len(self.pads)


@dataclass(eq=False)
class UMessage(_ArrayRecord):
    session_id: int
    values: np.ndarray = dc_field(repr=False)


@dataclass(eq=False)
class VMessage(_ArrayRecord):
    session_id: int
    values: np.ndarray = dc_field(repr=False)


def dealer_generate(
    params: SessionParams, rng: RandomSource | None = None
) -> tuple[SenderKeys, ReceiverKeys]:
    """Correlated one-time keys for one session."""
    rng = rng or SystemRandomSource()
    f, n = params.field, params.n
    a, b = sample_pairwise_arrays(rng, f, n)
    pads = rng.below(f.modulus, n)
    q = sample_position_perm(rng, n)
    expected = np.empty(n, dtype=_U64)
    expected[q.mapping] = f.vadd(f.vmul(a, pads), b)
    sid = params.session_id
    return SenderKeys(a, b, q, f, sid), ReceiverKeys(pads, expected, f, sid)


def _labels(values: Sequence[int] | np.ndarray, n: int, field: Field, who: str) -> np.ndarray:
    arr = field.asarray(values)
    if len(arr) != n:
        raise ParameterError(f"{who} has {len(arr)} positions, session has {n}")
    return arr


def receiver_encode(x: Sequence[int] | np.ndarray, keys: ReceiverKeys) -> UMessage:
    f = keys.field
    xs = _labels(x, keys.n, f, "receiver input")
    return UMessage(keys.session_id, f.vadd(xs, keys.pads))


def sender_respond(
    u: UMessage, y: Sequence[int] | np.ndarray, keys: SenderKeys
) -> VMessage:
    """Blind the difference ``u - y`` with ``P_t`` and scatter it to ``Q(t)``."""
    if u.session_id != keys.session_id:
        raise ParameterError(f"session mismatch: message {u.session_id}, keys {keys.session_id}")
    f = keys.field
    ys = _labels(y, keys.n, f, "sender input")
    us = _labels(u.values, keys.n, f, "U message")
    w = f.vadd(f.vmul(keys.a, f.vsub(us, ys)), keys.b)
    v = np.empty(keys.n, dtype=_U64)
    v[keys.q.mapping] = w
    return VMessage(keys.session_id, v)


def receiver_count(v: VMessage, keys: ReceiverKeys) -> int:
    if v.session_id != keys.session_id:
        raise ParameterError(f"session mismatch: message {v.session_id}, keys {keys.session_id}")
    vs = _labels(v.values, keys.n, keys.field, "V message")
    return int(np.count_nonzero(vs == keys.expected))


def ideal_functionality(x: Sequence[int] | np.ndarray, y: Sequence[int] | np.ndarray) -> int:
    """Plaintext match count: the only value the protocol may reveal."""
    xs, ys = np.asarray(x), np.asarray(y)
    if xs.shape != ys.shape:
        raise ParameterError(f"length mismatch: {xs.shape} vs {ys.shape}")
    return int(np.count_nonzero(xs == ys))


def run_local(
    x: Sequence[int] | np.ndarray,
    y: Sequence[int] | np.ndarray,
    params: SessionParams,
    rng: RandomSource | None = None,
) -> int:
    """One complete in-process session; returns the receiver's count."""
    skeys, rkeys = dealer_generate(params, rng)
    return receiver_count(sender_respond(receiver_encode(x, rkeys), y, skeys), rkeys)


# -- simulators ---------------------------------------------------------------
#
# Both simulators hold the full dealer transcript and interact with the
# corrupt party only through its message function.

SenderStrategy = Callable[[UMessage], VMessage]
ReceiverStrategy = Callable[[ReceiverKeys], UMessage]
PositionOracle = Callable[[int, int], bool]


def _checked_values(msg, n: int, field: Field, who: str) -> np.ndarray:
    values = np.asarray(msg.values)
    if values.shape != (n,):
        raise ProtocolError(f"{who} sent {values.size} values, expected {n}; aborting")
    try:
        return field.asarray(values.astype(_U64))
    except ParameterError as exc:
        raise ProtocolError(f"{who} sent a non-canonical element; aborting") from exc


def simulate_malicious_sender(
    adversary: SenderStrategy,
    sender_keys: SenderKeys,
    rng: RandomSource,
) -> np.ndarray:
    """Feed the adversary uniform ``u`` and extract its effective input.

    Returns ``y_t = u_t - P_t^{-1}(v[Q(t)])``, the input the ideal
    functionality must be called with.
    """
    f, n = sender_keys.field, sender_keys.n
    u = UMessage(sender_keys.session_id, rng.below(f.modulus, n))
    v = _checked_values(adversary(u), n, f, "sender")
    v_at_t = v[sender_keys.q.mapping]
    preimage = f.vmul(f.vinv(sender_keys.a), f.vsub(v_at_t, sender_keys.b))
    return f.vsub(u.values, preimage)


def simulate_malicious_receiver(
    adversary: ReceiverStrategy,
    receiver_keys: ReceiverKeys,
    q: PositionPermutation,
    oracle: PositionOracle,
    rng: RandomSource,
) -> VMessage:
    """Answer the adversary's ``u`` using only per-position ideal outputs.

    Of the dealer transcript only the receiver's keys and ``Q`` are needed.
    A matching position gets ``s[Q(t)]``; any other gets a uniform element
    of ``Z_p`` minus ``s[Q(t)]``.
    """
    f, n = receiver_keys.field, receiver_keys.n
    u = _checked_values(adversary(receiver_keys), n, f, "receiver")
    x = f.vsub(u, receiver_keys.pads)
    v = np.empty(n, dtype=_U64)
    for t in range(n):
        k = q[t]
        s = int(receiver_keys.expected[k])
        if oracle(t, int(x[t])):
            v[k] = s
        else:
            d = rng.randbelow(f.modulus - 1)
            v[k] = d if d < s else d + 1
    return VMessage(receiver_keys.session_id, v)


def positionwise_oracle(y: Sequence[int] | np.ndarray) -> PositionOracle:
    """Ideal functionality restricted to position ``t``, with the sender's input bound."""
    ys = [int(v) for v in y]
    return lambda t, xt: ideal_functionality([xt], [ys[t]]) == 1
