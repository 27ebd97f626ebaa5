"""Length-prefixed JSON wire protocol and interchangeable channels.

A frame is a 4-byte big-endian length followed by the canonical JSON body
(sorted keys, no whitespace) of exactly one message. Canonical form makes
golden byte tests and cross-transport transcript comparison exact.

Three transports share the message vocabulary:

* ``DirectChannel`` couples a session driver to an in-thread responder with
  no serialization (the fast path for Monte Carlo benches);
* ``in_process()`` returns a connected channel pair backed by queues, for
  two threads in one process;
* ``socket_listen``/``socket_connect`` speak the frame format over TCP.

One channel serves one session at a time; sends and receives strictly
alternate per the protocol turn order. Timeouts, peer closes, and frame
errors void the session rather than counting as a reject.
"""

from __future__ import annotations

import json
import queue
import socket
import struct
from collections import deque
from dataclasses import dataclass

from . import tdp
from .bits import BitString
from .errors import DecodeError, ProtocolError, SessionVoid

__all__ = [
    "BasisMessage",
    "Challenge1Message",
    "Challenge2Message",
    "Channel",
    "DirectChannel",
    "EquationMessage",
    "HashAnswerMessage",
    "HashQueryMessage",
    "InProcessChannel",
    "KeyMessage",
    "MAX_BODY_BYTES",
    "PreimageMessage",
    "RecordingChannel",
    "SocketChannel",
    "SocketListener",
    "VerdictMessage",
    "decode",
    "decode_body",
    "encode",
    "encode_body",
    "in_process",
    "serve_one",
    "socket_connect",
    "socket_listen",
]

MAX_BODY_BYTES = 1 << 20
DEFAULT_TIMEOUT = 30.0


@dataclass(frozen=True, slots=True)
class KeyMessage:
    key: tdp.Key


@dataclass(frozen=True, slots=True)
class HashQueryMessage:
    j: int
    h: BitString


@dataclass(frozen=True, slots=True)
class HashAnswerMessage:
    j: int
    c: int


@dataclass(frozen=True, slots=True)
class Challenge1Message:
    v1: int
    r: BitString


@dataclass(frozen=True, slots=True)
class PreimageMessage:
    x: BitString


@dataclass(frozen=True, slots=True)
class EquationMessage:
    d: BitString


@dataclass(frozen=True, slots=True)
class Challenge2Message:
    v2: int


@dataclass(frozen=True, slots=True)
class BasisMessage:
    eta: int


@dataclass(frozen=True, slots=True)
class VerdictMessage:
    accept: bool


Message = (
    KeyMessage
    | HashQueryMessage
    | HashAnswerMessage
    | Challenge1Message
    | PreimageMessage
    | EquationMessage
    | Challenge2Message
    | BasisMessage
    | VerdictMessage
)


def message_to_jsonable(msg: Message) -> dict:
    if isinstance(msg, KeyMessage):
        return {"t": "key", "key": tdp.key_to_jsonable(msg.key)}
    if isinstance(msg, HashQueryMessage):
        return {"t": "hq", "j": msg.j, "h": msg.h.text}
    if isinstance(msg, HashAnswerMessage):
        return {"t": "ha", "j": msg.j, "c": msg.c}
    if isinstance(msg, Challenge1Message):
        return {"t": "ch1", "v1": msg.v1, "r": msg.r.text}
    if isinstance(msg, PreimageMessage):
        return {"t": "x", "x": msg.x.text}
    if isinstance(msg, EquationMessage):
        return {"t": "d", "d": msg.d.text}
    if isinstance(msg, Challenge2Message):
        return {"t": "ch2", "v2": msg.v2}
    if isinstance(msg, BasisMessage):
        return {"t": "eta", "eta": msg.eta}
    if isinstance(msg, VerdictMessage):
        return {"t": "verdict", "accept": msg.accept}
    raise TypeError(f"not a protocol message: {type(msg).__name__}")


def _need_bit(obj: dict, name: str) -> int:
    value = obj.get(name)
    if value not in (0, 1):
        raise DecodeError(f"field {name!r} must be a bit, got {value!r}")
    return value


def _need_bitstring(obj: dict, name: str) -> BitString:
    value = obj.get(name)
    if not isinstance(value, str):
        raise DecodeError(f"field {name!r} must be a bit string")
    try:
        return BitString.from_text(value)
    except ValueError as exc:
        raise DecodeError(f"field {name!r}: {exc}") from exc


def _need_int(obj: dict, name: str) -> int:
    value = obj.get(name)
    if not isinstance(value, int) or isinstance(value, bool):
        raise DecodeError(f"field {name!r} must be an integer")
    return value


def message_from_jsonable(obj) -> Message:
    if not isinstance(obj, dict):
        raise DecodeError("message body must be a JSON object")
    tag = obj.get("t")
    if tag == "key":
        try:
            return KeyMessage(tdp.key_from_jsonable(obj.get("key")))
        except ValueError as exc:
            raise DecodeError(str(exc)) from exc
    if tag == "hq":
        return HashQueryMessage(_need_int(obj, "j"), _need_bitstring(obj, "h"))
    if tag == "ha":
        return HashAnswerMessage(_need_int(obj, "j"), _need_bit(obj, "c"))
    if tag == "ch1":
        return Challenge1Message(_need_bit(obj, "v1"), _need_bitstring(obj, "r"))
    if tag == "x":
        return PreimageMessage(_need_bitstring(obj, "x"))
    if tag == "d":
        return EquationMessage(_need_bitstring(obj, "d"))
    if tag == "ch2":
        return Challenge2Message(_need_bit(obj, "v2"))
    if tag == "eta":
        return BasisMessage(_need_bit(obj, "eta"))
    if tag == "verdict":
        accept = obj.get("accept")
        if not isinstance(accept, bool):
            raise DecodeError("field 'accept' must be a boolean")
        return VerdictMessage(accept)
    raise DecodeError(f"unknown message tag {tag!r}")


def encode_body(msg: Message) -> bytes:
    body = json.dumps(
        message_to_jsonable(msg), sort_keys=True, separators=(",", ":")
    ).encode("ascii")
    if len(body) > MAX_BODY_BYTES:
        raise ProtocolError(f"message body of {len(body)} bytes exceeds 1 MiB")
    return body


def encode(msg: Message) -> bytes:
    body = encode_body(msg)
    return struct.pack(">I", len(body)) + body


def _reject_duplicates(pairs):
    result = {}
    for key, value in pairs:
        if key in result:
            raise DecodeError(f"duplicate key {key!r} in message body")
        result[key] = value
    return result


def decode_body(body: bytes) -> Message:
    try:
        obj = json.loads(body, object_pairs_hook=_reject_duplicates)
    except DecodeError:
        raise
    except ValueError as exc:
        position = getattr(exc, "pos", None)
        where = f" at byte {position}" if position is not None else ""
        raise DecodeError(f"invalid JSON{where}: {exc}") from exc
    return message_from_jsonable(obj)


def decode(data: bytes) -> Message:
    if len(data) < 4:
        raise DecodeError(f"frame truncated: {len(data)} bytes, header needs 4")
    (length,) = struct.unpack(">I", data[:4])
    if length > MAX_BODY_BYTES:
        raise DecodeError(f"frame body of {length} bytes exceeds 1 MiB")
    if len(data) != 4 + length:
        raise DecodeError(f"frame length {length} but {len(data) - 4} body bytes present")
    return decode_body(data[4:])


class Channel:
    """Blocking, strictly alternating transport for one session."""

    def send(self, msg: Message) -> None:
        raise NotImplementedError

    def recv(self) -> Message:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class DirectChannel(Channel):
    """Couples a session driver to an in-thread responder, no serialization."""

    def __init__(self, responder):
        self._responder = responder
        self._pending = deque()

    def send(self, msg: Message) -> None:
        reply = self._responder.respond(msg)
        if reply is not None:
            self._pending.append(reply)

    def recv(self) -> Message:
        if not self._pending:
            raise ProtocolError("receive with no pending reply (alternation broken)")
        return self._pending.popleft()


class RecordingChannel(Channel):
    """Wraps a channel and records the canonical body of every message."""

    def __init__(self, inner: Channel):
        self.inner = inner
        self.records: list[tuple[str, bytes]] = []

    def send(self, msg: Message) -> None:
        self.records.append(("send", encode_body(msg)))
        self.inner.send(msg)

    def recv(self) -> Message:
        msg = self.inner.recv()
        self.records.append(("recv", encode_body(msg)))
        return msg

    def close(self) -> None:
        self.inner.close()


_CLOSED = object()


class InProcessChannel(Channel):
    """One end of a queue-backed channel pair; frames cross encoded."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue, timeout: float):
        self._inbox = inbox
        self._outbox = outbox
        self.timeout = timeout
        self._closed = False

    def send(self, msg: Message) -> None:
        if self._closed:
            raise SessionVoid("channel is closed")
        self._outbox.put(encode(msg))

    def recv(self) -> Message:
        if self._closed:
            raise SessionVoid("channel is closed")
        try:
            data = self._inbox.get(timeout=self.timeout)
        except queue.Empty:
            raise SessionVoid(f"receive timed out after {self.timeout}s") from None
        if data is _CLOSED:
            raise SessionVoid("peer closed the channel")
        return decode(data)

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(_CLOSED)


def in_process(timeout: float = DEFAULT_TIMEOUT) -> tuple[InProcessChannel, InProcessChannel]:
    a_to_b: queue.Queue = queue.Queue()
    b_to_a: queue.Queue = queue.Queue()
    return (
        InProcessChannel(b_to_a, a_to_b, timeout),
        InProcessChannel(a_to_b, b_to_a, timeout),
    )


class SocketChannel(Channel):
    def __init__(self, sock: socket.socket, timeout: float = DEFAULT_TIMEOUT):
        self._sock = sock
        self._sock.settimeout(timeout)
        self.timeout = timeout

    def send(self, msg: Message) -> None:
        try:
            self._sock.sendall(encode(msg))
        except socket.timeout:
            raise SessionVoid(f"send timed out after {self.timeout}s") from None
        except OSError as exc:
            raise SessionVoid(f"send failed: {exc}") from exc

    def _read_exact(self, count: int) -> bytes:
        chunks = []
        remaining = count
        while remaining:
            try:
                chunk = self._sock.recv(remaining)
            except socket.timeout:
                raise SessionVoid(f"receive timed out after {self.timeout}s") from None
            except OSError as exc:
                raise SessionVoid(f"receive failed: {exc}") from exc
            if not chunk:
                raise SessionVoid("peer closed the connection")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def recv(self) -> Message:
        header = self._read_exact(4)
        (length,) = struct.unpack(">I", header)
        if length > MAX_BODY_BYTES:
            raise DecodeError(f"frame body of {length} bytes exceeds 1 MiB")
        return decode_body(self._read_exact(length))

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class SocketListener:
    def __init__(self, address: tuple[str, int], timeout: float = DEFAULT_TIMEOUT):
        self.timeout = timeout
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind(address)
        self._sock.listen(4)

    @property
    def address(self) -> tuple[str, int]:
        return self._sock.getsockname()

    def accept(self) -> SocketChannel:
        conn, _ = self._sock.accept()
        return SocketChannel(conn, self.timeout)

    def close(self) -> None:
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def socket_listen(address: tuple[str, int], timeout: float = DEFAULT_TIMEOUT) -> SocketListener:
    return SocketListener(address, timeout)


def socket_connect(address: tuple[str, int], timeout: float = DEFAULT_TIMEOUT) -> SocketChannel:
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.settimeout(timeout)
    try:
        sock.connect(address)
    except OSError as exc:
        sock.close()
        raise SessionVoid(f"connect to {address} failed: {exc}") from exc
    return SocketChannel(sock, timeout)


def serve_one(channel: Channel, responder) -> None:
    """Pump one responder over a channel until its session completes."""
    while not responder.done:
        msg = channel.recv()
        reply = responder.respond(msg)
        if reply is not None:
            channel.send(reply)
