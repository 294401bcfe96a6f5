"""Wire format and networked role runners."""

from .net import (
    DealerServer,
    Endpoint,
    SenderService,
    fetch_keys,
    receiver_session,
    run_dealer,
    run_receiver,
    run_sender,
    sender_session,
)
from .wire import (
    CHUNK_POSITIONS,
    HEADER_SIZE,
    Abort,
    BundleAssembler,
    FrameDecoder,
    KeyRequest,
    MsgType,
    ReceiverKeyChunk,
    Role,
    SenderKeyChunk,
    decode_frame,
    encode_frame,
    receiver_chunks,
    sender_chunks,
)

__all__ = [
    "CHUNK_POSITIONS",
    "HEADER_SIZE",
    "Abort",
    "BundleAssembler",
    "DealerServer",
    "Endpoint",
    "FrameDecoder",
    "KeyRequest",
    "MsgType",
    "ReceiverKeyChunk",
    "Role",
    "SenderKeyChunk",
    "SenderService",
    "decode_frame",
    "encode_frame",
    "fetch_keys",
    "receiver_chunks",
    "receiver_session",
    "run_dealer",
    "run_receiver",
    "run_sender",
    "sender_chunks",
    "sender_session",
]
