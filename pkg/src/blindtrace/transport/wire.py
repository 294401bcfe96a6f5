"""Binary framing for dealer, sender and receiver traffic.

Frame layout, all integers little-endian::

    magic      4 bytes  b"BCT1"
    version    1 byte   0x01
    msg_type   1 byte
    session_id 8 bytes
    length     4 bytes  payload length
    payload    `length` bytes

Field elements are 8-byte words, permutation indices 4-byte words, and
every list carries a 4-byte count. Key bundles are split into chunks of
at most ``CHUNK_POSITIONS`` positions; each chunk names the session total
and its starting offset, and chunks must arrive in order.

KeyRequest payload is one 4-byte word: bits 0-29 hold ``n`` and bits 30-31
the requesting role (1 = sender, 2 = receiver).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field
from enum import IntEnum
from typing import Union

import numpy as np

from ..crypto import PositionPermutation
from ..errors import EncodingError, NeedMoreData, ParameterError, ProtocolError, ValidationError
from ..field import DEFAULT_FIELD, Field
from ..protocol import ReceiverKeys, SenderKeys, UMessage, VMessage, _ArrayRecord

MAGIC = b"BCT1"
VERSION = 0x01
HEADER = struct.Struct("<4sBBQI")
HEADER_SIZE = HEADER.size  # 18
MAX_PAYLOAD = 1 << 31
CHUNK_POSITIONS = 65_536
MAX_N = (1 << 30) - 1

_U32 = struct.Struct("<I")


class MsgType(IntEnum):
    KEY_REQUEST = 0x01
    RECEIVER_KEY_BUNDLE = 0x02
    SENDER_KEY_BUNDLE = 0x03
    U_MESSAGE = 0x04
    V_MESSAGE = 0x05
    ABORT = 0x06


class Role(IntEnum):
    DEALER = 0
    SENDER = 1
    RECEIVER = 2


ALLOWED_SENDS = {
    Role.DEALER: {MsgType.RECEIVER_KEY_BUNDLE, MsgType.SENDER_KEY_BUNDLE, MsgType.ABORT},
    Role.SENDER: {MsgType.KEY_REQUEST, MsgType.V_MESSAGE, MsgType.ABORT},
    Role.RECEIVER: {MsgType.KEY_REQUEST, MsgType.U_MESSAGE, MsgType.ABORT},
}


@dataclass(frozen=True)
class KeyRequest:
    session_id: int
    n: int
    role: Role


@dataclass(frozen=True)
class Abort:
    session_id: int
    reason: str = ""


@dataclass(eq=False)
class ReceiverKeyChunk(_ArrayRecord):
    session_id: int
    total: int
    offset: int
    pads: np.ndarray = dc_field(repr=False)
    expected: np.ndarray = dc_field(repr=False)


@dataclass(eq=False)
class SenderKeyChunk(_ArrayRecord):
    session_id: int
    total: int
    offset: int
    a: np.ndarray = dc_field(repr=False)
    b: np.ndarray = dc_field(repr=False)
    q: np.ndarray = dc_field(repr=False)


Message = Union[KeyRequest, Abort, ReceiverKeyChunk, SenderKeyChunk, UMessage, VMessage]

MESSAGE_TYPES = {
    KeyRequest: MsgType.KEY_REQUEST,
    ReceiverKeyChunk: MsgType.RECEIVER_KEY_BUNDLE,
    SenderKeyChunk: MsgType.SENDER_KEY_BUNDLE,
    UMessage: MsgType.U_MESSAGE,
    VMessage: MsgType.V_MESSAGE,
    Abort: MsgType.ABORT,
}


def message_type(msg: Message) -> MsgType:
    try:
        return MESSAGE_TYPES[type(msg)]
    except KeyError:
        raise EncodingError(f"not a wire message: {type(msg).__name__}") from None


# -- encoding -----------------------------------------------------------------

def _u64_list(values) -> bytes:
    arr = np.asarray(values, dtype="<u8")
    return _U32.pack(arr.size) + arr.tobytes()


def _u32_list(values) -> bytes:
    arr = np.asarray(values)
    if arr.size and (arr.min() < 0 or arr.max() >= 1 << 32):
        raise EncodingError("index does not fit in 4 bytes")
    return _U32.pack(arr.size) + arr.astype("<u4").tobytes()


def _payload(msg: Message) -> bytes:
    if isinstance(msg, KeyRequest):
        if not 1 <= msg.n <= MAX_N:
            raise EncodingError(f"n={msg.n} outside [1, {MAX_N}]")
        if msg.role not in (Role.SENDER, Role.RECEIVER):
            raise EncodingError(f"role {msg.role!r} cannot request keys")
        return _U32.pack(msg.n | (int(msg.role) << 30))
    if isinstance(msg, (UMessage, VMessage)):
        return _u64_list(msg.values)
    if isinstance(msg, ReceiverKeyChunk):
        return struct.pack("<II", msg.total, msg.offset) + _u64_list(msg.pads) + _u64_list(msg.expected)
    if isinstance(msg, SenderKeyChunk):
        return (
            struct.pack("<II", msg.total, msg.offset)
            + _u64_list(msg.a)
            + _u64_list(msg.b)
            + _u32_list(msg.q)
        )
    if isinstance(msg, Abort):
        text = msg.reason.encode("utf-8")
        return _U32.pack(len(text)) + text
    raise EncodingError(f"not a wire message: {type(msg).__name__}")


def encode_frame(msg: Message) -> bytes:
    mtype = message_type(msg)
    if not 0 <= msg.session_id < 1 << 64:
        raise EncodingError("session_id must fit in 8 bytes")
    body = _payload(msg)
    if len(body) > MAX_PAYLOAD:
        raise EncodingError(f"payload of {len(body)} bytes exceeds 2**31")
    return HEADER.pack(MAGIC, VERSION, mtype, msg.session_id, len(body)) + body


# -- decoding -----------------------------------------------------------------

class _Reader:
    def __init__(self, data: memoryview) -> None:
        self.data = data
        self.pos = 0

    def take(self, k: int) -> memoryview:
        if self.pos + k > len(self.data):
            raise ProtocolError("payload shorter than its declared structure")
        out = self.data[self.pos:self.pos + k]
        self.pos += k
        return out

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def elements(self, field: Field) -> np.ndarray:
        count = self.u32()
        arr = np.frombuffer(self.take(8 * count), dtype="<u8").astype(np.uint64)
        if count and int(arr.max()) >= field.modulus:
            raise ValidationError(f"non-canonical field element >= {field.modulus}")
        return arr

    def indices(self) -> np.ndarray:
        count = self.u32()
        return np.frombuffer(self.take(4 * count), dtype="<u4").astype(np.int64)

    def done(self) -> None:
        if self.pos != len(self.data):
            raise ProtocolError("trailing bytes after payload")


def parse_header(buf) -> tuple[MsgType, int, int]:
    """Validate a header; returns ``(msg_type, session_id, payload_len)``."""
    if len(buf) < HEADER_SIZE:
        raise NeedMoreData(HEADER_SIZE - len(buf))
    magic, version, mtype, sid, length = HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {bytes(magic)!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported version {version}")
    try:
        mtype = MsgType(mtype)
    except ValueError:
        raise ProtocolError(f"unknown message type 0x{mtype:02x}") from None
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"declared payload of {length} bytes exceeds 2**31")
    return mtype, sid, length


def decode_payload(mtype: MsgType, sid: int, payload, field: Field = DEFAULT_FIELD) -> Message:
    r = _Reader(memoryview(payload))
    if mtype is MsgType.KEY_REQUEST:
        word = r.u32()
        role_code, n = word >> 30, word & MAX_N
        if role_code not in (Role.SENDER, Role.RECEIVER) or n == 0:
            raise ProtocolError(f"malformed key request word 0x{word:08x}")
        msg: Message = KeyRequest(sid, n, Role(role_code))
    elif mtype in (MsgType.U_MESSAGE, MsgType.V_MESSAGE):
        values = r.elements(field)
        msg = (UMessage if mtype is MsgType.U_MESSAGE else VMessage)(sid, values)
    elif mtype is MsgType.RECEIVER_KEY_BUNDLE:
        total, offset = r.u32(), r.u32()
        pads, expected = r.elements(field), r.elements(field)
        if len(pads) != len(expected):
            raise ProtocolError("receiver key chunk lists differ in length")
        msg = ReceiverKeyChunk(sid, total, offset, pads, expected)
    elif mtype is MsgType.SENDER_KEY_BUNDLE:
        total, offset = r.u32(), r.u32()
        a, b, q = r.elements(field), r.elements(field), r.indices()
        if not (len(a) == len(b) == len(q)):
            raise ProtocolError("sender key chunk lists differ in length")
        if (a == 0).any():
            raise ValidationError("zero multiplier in pairwise permutation")
        if len(q) and int(q.max()) >= total:
            raise ValidationError("position index beyond session length")
        msg = SenderKeyChunk(sid, total, offset, a, b, q)
    else:
        length = r.u32()
        try:
            msg = Abort(sid, bytes(r.take(length)).decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise ProtocolError("abort reason is not UTF-8") from exc
    r.done()
    return msg


def decode_frame(buf, field: Field = DEFAULT_FIELD) -> tuple[Message, int]:
    """Decode one frame from the front of ``buf``.

    Returns ``(message, bytes_consumed)``. Raises :class:`NeedMoreData`
    without consuming anything when the frame is incomplete.
    """
    mtype, sid, length = parse_header(buf)
    end = HEADER_SIZE + length
    if len(buf) < end:
        raise NeedMoreData(end - len(buf))
    return decode_payload(mtype, sid, bytes(buf[HEADER_SIZE:end]), field), end


class FrameDecoder:
    """Incremental decoder for a byte stream of concatenated frames."""

    def __init__(self, field: Field = DEFAULT_FIELD) -> None:
        self.field = field
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Message]:
        self._buf += data
        out = []
        while True:
            try:
                msg, used = decode_frame(self._buf, self.field)
            except NeedMoreData:
                return out
            del self._buf[:used]
            out.append(msg)

    @property
    def pending(self) -> int:
        return len(self._buf)


# -- key bundles --------------------------------------------------------------

def _spans(n: int, chunk: int):
    for start in range(0, n, chunk):
        yield start, min(start + chunk, n)


def receiver_chunks(keys: ReceiverKeys, chunk: int = CHUNK_POSITIONS) -> list[ReceiverKeyChunk]:
    return [
        ReceiverKeyChunk(keys.session_id, keys.n, lo, keys.pads[lo:hi], keys.expected[lo:hi])
        for lo, hi in _spans(keys.n, chunk)
    ]


def sender_chunks(keys: SenderKeys, chunk: int = CHUNK_POSITIONS) -> list[SenderKeyChunk]:
    q = keys.q.mapping
    return [
        SenderKeyChunk(keys.session_id, keys.n, lo, keys.a[lo:hi], keys.b[lo:hi], q[lo:hi])
        for lo, hi in _spans(keys.n, chunk)
    ]


class BundleAssembler:
    """Rebuild one role's keys from in-order chunks."""

    def __init__(self, session_id: int, n: int, field: Field = DEFAULT_FIELD) -> None:
        self.session_id, self.n, self.field = session_id, n, field
        self._parts: list = []
        self._received = 0
        self._kind: type | None = None

    @property
    def complete(self) -> bool:
        return self._received == self.n

    def add(self, chunk: ReceiverKeyChunk | SenderKeyChunk) -> bool:
        if chunk.session_id != self.session_id:
            raise ProtocolError(f"chunk for session {chunk.session_id}, expected {self.session_id}")
        if chunk.total != self.n:
            raise ProtocolError(f"chunk declares n={chunk.total}, requested {self.n}")
        if chunk.offset != self._received:
            raise ProtocolError(f"chunk offset {chunk.offset}, expected {self._received}")
        if self._kind is None:
            self._kind = type(chunk)
        elif type(chunk) is not self._kind:
            raise ProtocolError("mixed key bundle kinds in one session")
        size = len(chunk.pads) if isinstance(chunk, ReceiverKeyChunk) else len(chunk.a)
        if size == 0 or self._received + size > self.n:
            raise ProtocolError("chunk size inconsistent with session length")
        self._parts.append(chunk)
        self._received += size
        return self.complete

    def keys(self) -> SenderKeys | ReceiverKeys:
        if not self.complete:
            raise ProtocolError("key bundle incomplete")
        parts, f, sid = self._parts, self.field, self.session_id
        try:
            if self._kind is ReceiverKeyChunk:
                return ReceiverKeys(
                    np.concatenate([c.pads for c in parts]),
                    np.concatenate([c.expected for c in parts]),
                    f,
                    sid,
                )
            return SenderKeys(
                np.concatenate([c.a for c in parts]),
                np.concatenate([c.b for c in parts]),
                PositionPermutation(np.concatenate([c.q for c in parts])),
                f,
                sid,
            )
        except ParameterError as exc:
            raise ValidationError(str(exc)) from exc
