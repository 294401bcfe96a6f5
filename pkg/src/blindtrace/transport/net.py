"""Dealer, sender and receiver as separate processes over TCP.

Dealer-to-party links are assumed to run inside mutually authenticated,
encrypted tunnels; nothing here performs key agreement. A party's role is
taken from its KeyRequest.
"""

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass
from typing import Awaitable, Callable, Sequence

import numpy as np

from ..crypto import RandomSource, SystemRandomSource
from ..errors import BCTError, ParameterError, ProtocolError, SessionError
from ..field import DEFAULT_FIELD, Field
from ..protocol import (
    ReceiverKeys,
    SenderKeys,
    SessionParams,
    UMessage,
    VMessage,
    dealer_generate,
    receiver_count,
    receiver_encode,
    sender_respond,
)
from .wire import (
    ALLOWED_SENDS,
    HEADER_SIZE,
    Abort,
    BundleAssembler,
    KeyRequest,
    Message,
    ReceiverKeyChunk,
    Role,
    SenderKeyChunk,
    decode_payload,
    encode_frame,
    message_type,
    parse_header,
    receiver_chunks,
    sender_chunks,
)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 120.0


@dataclass(frozen=True)
class Endpoint:
    host: str
    port: int
    role: Role = Role.DEALER

    @classmethod
    def parse(cls, text: str, role: Role = Role.DEALER) -> Endpoint:
        host, sep, port = text.rpartition(":")
        if not sep or not port.isdigit():
            raise ParameterError(f"expected HOST:PORT, got {text!r}")
        return cls(host or "127.0.0.1", int(port), role)


async def read_message(reader: asyncio.StreamReader, field: Field) -> Message:
    try:
        header = await reader.readexactly(HEADER_SIZE)
        mtype, sid, length = parse_header(header)
        payload = await reader.readexactly(length)
    except asyncio.IncompleteReadError as exc:
        raise SessionError("connection closed mid-session") from exc
    except ConnectionError as exc:
        raise SessionError(f"connection lost: {exc}") from exc
    return decode_payload(mtype, sid, payload, field)


async def send_message(writer: asyncio.StreamWriter, msg: Message, role: Role) -> None:
    if message_type(msg) not in ALLOWED_SENDS[role]:
        raise ProtocolError(f"{role.name.lower()} may not send {message_type(msg).name}")
    writer.write(encode_frame(msg))
    try:
        await writer.drain()
    except ConnectionError as exc:
        raise SessionError(f"connection lost: {exc}") from exc


async def _close(writer: asyncio.StreamWriter) -> None:
    writer.close()
    try:
        await writer.wait_closed()
    except (ConnectionError, OSError):
        pass


async def _connect(ep: Endpoint) -> tuple[asyncio.StreamReader, asyncio.StreamWriter]:
    try:
        return await asyncio.open_connection(ep.host, ep.port)
    except OSError as exc:
        raise SessionError(f"cannot reach {ep.host}:{ep.port}: {exc}") from exc


# -- dealer -------------------------------------------------------------------

class DealerServer:
    """Pairs up KeyRequests by session id and delivers one bundle per role.

    Keys are dropped as soon as both bundles are written; only the set of
    used session ids is kept, so a repeated id is refused.
    """

    def __init__(self, rng: RandomSource | None = None, field: Field = DEFAULT_FIELD) -> None:
        self.rng = rng or SystemRandomSource()
        self.field = field
        self._pending: dict[int, dict[Role, tuple[int, asyncio.StreamWriter, asyncio.Future]]] = {}
        self._used: set[int] = set()
        self.sessions_served = 0

    async def handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            try:
                msg = await read_message(reader, self.field)
            except BCTError as exc:
                await self._abort(writer, 0, f"bad request: {exc}")
                return
            if not isinstance(msg, KeyRequest):
                await self._abort(writer, msg.session_id, "expected KeyRequest")
                return
            done = await self._register(msg, writer)
            if done is not None:
                await done
        finally:
            await _close(writer)

    async def _abort(self, writer, sid: int, reason: str) -> None:
        log.warning("dealer abort session %d: %s", sid, reason)
        try:
            await send_message(writer, Abort(sid, reason), Role.DEALER)
        except SessionError:
            pass

    async def _register(self, req: KeyRequest, writer) -> asyncio.Future | None:
        sid = req.session_id
        if sid in self._used:
            await self._abort(writer, sid, "duplicate session id")
            return None
        slot = self._pending.setdefault(sid, {})
        if req.role in slot:
            await self._abort(writer, sid, "duplicate session id")
            return None
        done = asyncio.get_running_loop().create_future()
        slot[req.role] = (req.n, writer, done)
        if len(slot) < 2:
            return done
        del self._pending[sid]
        self._used.add(sid)
        (n_s, w_s, f_s), (n_r, w_r, f_r) = slot[Role.SENDER], slot[Role.RECEIVER]
        try:
            if n_s != n_r:
                reason = f"position counts disagree ({n_s} vs {n_r})"
                await self._abort(w_s, sid, reason)
                await self._abort(w_r, sid, reason)
            else:
                skeys, rkeys = dealer_generate(SessionParams(n_s, self.field, sid), self.rng)
                try:
                    for chunk in sender_chunks(skeys):
                        await send_message(w_s, chunk, Role.DEALER)
                    for chunk in receiver_chunks(rkeys):
                        await send_message(w_r, chunk, Role.DEALER)
                    self.sessions_served += 1
                finally:
                    del skeys, rkeys
        finally:
            for fut in (f_s, f_r):
                if not fut.done():
                    fut.set_result(None)
        return done

    async def start(self, host: str, port: int) -> asyncio.base_events.Server:
        return await asyncio.start_server(self.handle, host, port)


def run_dealer(
    listen: Endpoint, rng: RandomSource | None = None, field: Field = DEFAULT_FIELD
) -> None:
    """Serve key requests until interrupted."""

    async def main() -> None:
        server = await DealerServer(rng, field).start(listen.host, listen.port)
        log.info("dealer listening on %s:%d", listen.host, listen.port)
        async with server:
            await server.serve_forever()

    asyncio.run(main())


async def fetch_keys(
    dealer: Endpoint, session_id: int, n: int, role: Role, field: Field = DEFAULT_FIELD
) -> SenderKeys | ReceiverKeys:
    reader, writer = await _connect(dealer)
    try:
        await send_message(writer, KeyRequest(session_id, n, role), role)
        expect = SenderKeyChunk if role is Role.SENDER else ReceiverKeyChunk
        bundle = BundleAssembler(session_id, n, field)
        while not bundle.complete:
            msg = await read_message(reader, field)
            if isinstance(msg, Abort):
                raise SessionError(f"dealer aborted session {session_id}: {msg.reason}")
            if not isinstance(msg, expect):
                raise SessionError(f"dealer sent {type(msg).__name__} to {role.name.lower()}")
            bundle.add(msg)
        return bundle.keys()
    except ProtocolError as exc:
        raise SessionError(f"bad key bundle: {exc}") from exc
    finally:
        await _close(writer)


# -- receiver -----------------------------------------------------------------

async def receiver_session(
    dealer: Endpoint,
    sender: Endpoint,
    trail: Sequence[int] | np.ndarray,
    session_id: int,
    field: Field = DEFAULT_FIELD,
    keys: ReceiverKeys | None = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> int:
    async def go() -> int:
        n = len(trail)
        rkeys = keys if keys is not None else await fetch_keys(dealer, session_id, n, Role.RECEIVER, field)
        if rkeys.n != n:
            raise SessionError(f"trail has {n} positions, keys cover {rkeys.n}")
        u = receiver_encode(trail, rkeys)
        reader, writer = await _connect(sender)
        try:
            await send_message(writer, u, Role.RECEIVER)
            reply = await read_message(reader, field)
        except ProtocolError as exc:
            raise SessionError(f"bad reply from sender: {exc}") from exc
        finally:
            await _close(writer)
        if isinstance(reply, Abort):
            raise SessionError(f"sender aborted session {session_id}: {reply.reason}")
        if not isinstance(reply, VMessage):
            raise SessionError(f"sender replied with {type(reply).__name__}")
        try:
            return receiver_count(reply, rkeys)
        except ParameterError as exc:
            raise SessionError(str(exc)) from exc

    try:
        return await asyncio.wait_for(go(), timeout)
    except asyncio.TimeoutError as exc:
        raise SessionError(f"session {session_id} timed out") from exc


def run_receiver(
    dealer: Endpoint,
    sender: Endpoint,
    trail: Sequence[int] | np.ndarray,
    session_id: int,
    field: Field = DEFAULT_FIELD,
    timeout: float = DEFAULT_TIMEOUT,
) -> int:
    """Run one session as receiver and return the match count."""
    return asyncio.run(receiver_session(dealer, sender, trail, session_id, field, timeout=timeout))


# -- sender -------------------------------------------------------------------

class SenderService:
    """Answers exactly one UMessage for one session, then refuses all others."""

    def __init__(
        self,
        session_id: int,
        database: Sequence[int] | np.ndarray,
        keys: Awaitable[SenderKeys] | SenderKeys,
        field: Field = DEFAULT_FIELD,
    ) -> None:
        self.session_id = session_id
        self.database = field.asarray(database)
        self.field = field
        self._keys = keys
        self.consumed = False
        self.finished = asyncio.Event()
        self.error: BaseException | None = None

    async def _take_keys(self) -> SenderKeys:
        keys = self._keys
        self._keys = None
        if not isinstance(keys, SenderKeys):
            keys = await keys
        return keys

    async def handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            while True:
                try:
                    msg = await read_message(reader, self.field)
                except SessionError:
                    return
                except ProtocolError as exc:
                    await self._abort(writer, self.session_id, f"bad frame: {exc}")
                    return
                if not isinstance(msg, UMessage) or msg.session_id != self.session_id:
                    await self._abort(writer, msg.session_id, "unexpected message")
                    return
                if self.consumed:
                    await self._abort(writer, msg.session_id, "keys already used for this session")
                    continue
                self.consumed = True
                try:
                    keys = await self._take_keys()
                    v = sender_respond(msg, self.database, keys)
                    del keys
                except BaseException as exc:  # noqa: BLE001 - reported via finished
                    self.error = exc
                    await self._abort(writer, msg.session_id, "session failed")
                    self.finished.set()
                    return
                await send_message(writer, v, Role.SENDER)
                self.finished.set()
        finally:
            await _close(writer)

    async def _abort(self, writer, sid: int, reason: str) -> None:
        log.warning("sender abort session %d: %s", sid, reason)
        try:
            await send_message(writer, Abort(sid, reason), Role.SENDER)
        except SessionError:
            pass


async def sender_session(
    dealer: Endpoint,
    listen: Endpoint,
    database: Sequence[int] | np.ndarray,
    session_id: int,
    field: Field = DEFAULT_FIELD,
    keys: SenderKeys | None = None,
    timeout: float = DEFAULT_TIMEOUT,
    on_listening: Callable[[int], None] | None = None,
) -> None:
    n = len(database)
    if keys is not None:
        key_source: Awaitable[SenderKeys] | SenderKeys = keys
    else:
        key_source = asyncio.ensure_future(fetch_keys(dealer, session_id, n, Role.SENDER, field))
    service = SenderService(session_id, database, key_source, field)
    try:
        server = await asyncio.start_server(service.handle, listen.host, listen.port)
    except OSError as exc:
        raise SessionError(f"cannot listen on {listen.host}:{listen.port}: {exc}") from exc
    async with server:
        if on_listening is not None:
            on_listening(server.sockets[0].getsockname()[1])
        waiters = [asyncio.ensure_future(service.finished.wait())]
        if isinstance(key_source, asyncio.Future):
            waiters.append(key_source)
        try:
            # returns early only if the key fetch fails
            done, _ = await asyncio.wait(waiters, timeout=timeout, return_when=asyncio.FIRST_EXCEPTION)
            for fut in done:
                exc = fut.exception()
                if exc is not None:
                    raise exc if isinstance(exc, SessionError) else SessionError(str(exc))
            if not service.finished.is_set():
                raise SessionError(f"session {session_id} timed out")
        finally:
            for w in waiters:
                w.cancel()
    if service.error is not None:
        raise SessionError(f"session {session_id} failed: {service.error}")


def run_sender(
    dealer: Endpoint,
    listen: Endpoint,
    database: Sequence[int] | np.ndarray,
    session_id: int,
    field: Field = DEFAULT_FIELD,
    timeout: float = DEFAULT_TIMEOUT,
) -> None:
    """Run one session as sender. Produces no output on success."""
    asyncio.run(sender_session(dealer, listen, database, session_id, field, timeout=timeout))
