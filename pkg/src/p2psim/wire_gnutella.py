"""Gnutella v0.4 descriptor codec.

Header layout (23 bytes)::

    0-15  descriptor id
    16    payload kind
    17    ttl
    18    hops
    19-22 payload length (little-endian)

Integers are little-endian, IPv4 addresses are in network order.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterator, Union

from .errors import DecodeError, EncodeError, TruncatedError

HEADER_SIZE = 23
ID_SIZE = 16

_HEADER = struct.Struct("<16sBBBI")
_PONG = struct.Struct("<H4sII")
_QUERY_MIN_SPEED = struct.Struct("<H")
_HIT_HEAD = struct.Struct("<BH4sI")
_HIT_RESULT = struct.Struct("<II")
_PUSH = struct.Struct("<16sI4sH")


class PayloadKind(IntEnum):
    PING = 0x00
    PONG = 0x01
    PUSH = 0x40
    QUERY = 0x80
    QUERY_HIT = 0x81


# push > queryHit > query > pong > ping
PRIORITY = {
    PayloadKind.PING: 0,
    PayloadKind.PONG: 1,
    PayloadKind.QUERY: 2,
    PayloadKind.QUERY_HIT: 3,
    PayloadKind.PUSH: 4,
}

REQUEST_OF = {
    PayloadKind.PONG: PayloadKind.PING,
    PayloadKind.QUERY_HIT: PayloadKind.QUERY,
    PayloadKind.PUSH: PayloadKind.QUERY_HIT,
}


@dataclass(frozen=True)
class DescriptorHeader:
    descriptor_id: bytes
    payload_kind: PayloadKind
    ttl: int
    hops: int
    payload_length: int = 0


@dataclass(frozen=True)
class PingPayload:
    pass


@dataclass(frozen=True)
class PongPayload:
    port: int
    ip: str
    files_shared: int
    kilobytes_shared: int


@dataclass(frozen=True)
class QueryPayload:
    min_speed: int
    criteria: str


@dataclass(frozen=True)
class QueryHitResult:
    file_index: int
    file_size: int
    file_name: str


@dataclass(frozen=True)
class QueryHitPayload:
    port: int
    ip: str
    speed: int
    results: tuple[QueryHitResult, ...]
    servent_id: bytes

    @property
    def num_hits(self) -> int:
        return len(self.results)


@dataclass(frozen=True)
class PushPayload:
    servent_id: bytes
    file_index: int
    ip: str
    port: int


Payload = Union[PingPayload, PongPayload, QueryPayload, QueryHitPayload, PushPayload]

PAYLOAD_TYPES = {
    PayloadKind.PING: PingPayload,
    PayloadKind.PONG: PongPayload,
    PayloadKind.QUERY: QueryPayload,
    PayloadKind.QUERY_HIT: QueryHitPayload,
    PayloadKind.PUSH: PushPayload,
}
KIND_OF = {cls: kind for kind, cls in PAYLOAD_TYPES.items()}


@dataclass(frozen=True)
class Descriptor:
    """A header together with its typed payload."""

    header: DescriptorHeader
    payload: Payload = field(default_factory=PingPayload)

    @classmethod
    def build(cls, descriptor_id: bytes, payload: Payload, ttl: int, hops: int = 0) -> "Descriptor":
        kind = KIND_OF[type(payload)]
        length = len(encode_payload(kind, payload))
        return cls(DescriptorHeader(descriptor_id, kind, ttl, hops, length), payload)

    @property
    def kind(self) -> PayloadKind:
        return self.header.payload_kind

    @property
    def descriptor_id(self) -> bytes:
        return self.header.descriptor_id

    @property
    def ttl(self) -> int:
        return self.header.ttl

    @property
    def hops(self) -> int:
        return self.header.hops

    def hop(self) -> "Descriptor":
        """The copy a servent forwards: ttl decremented, hops incremented."""
        h = self.header
        return replace(self, header=replace(h, ttl=h.ttl - 1, hops=h.hops + 1))


def _ip_bytes(ip: str) -> bytes:
    try:
        return socket.inet_aton(ip)
    except OSError as exc:
        raise EncodeError(f"bad IPv4 address {ip!r}") from exc


def _ip_str(raw: bytes) -> str:
    return socket.inet_ntoa(raw)


def _text(value: str, what: str) -> bytes:
    raw = value.encode("utf-8")
    if b"\x00" in raw:
        raise EncodeError(f"{what} contains the terminator byte")
    return raw


def _pack(st: struct.Struct, *values) -> bytes:
    try:
        return st.pack(*values)
    except struct.error as exc:
        raise EncodeError(str(exc)) from exc


def encode_payload(kind: PayloadKind, payload: Payload) -> bytes:
    if PAYLOAD_TYPES.get(kind) is not type(payload):
        raise EncodeError(f"payload {type(payload).__name__} does not match kind {kind!r}")
    if isinstance(payload, PingPayload):
        return b""
    if isinstance(payload, PongPayload):
        return _pack(_PONG, payload.port, _ip_bytes(payload.ip), payload.files_shared, payload.kilobytes_shared)
    if isinstance(payload, QueryPayload):
        if not payload.criteria:
            raise EncodeError("query criteria must be non-empty")
        return _pack(_QUERY_MIN_SPEED, payload.min_speed) + _text(payload.criteria, "criteria") + b"\x00"
    if isinstance(payload, QueryHitPayload):
        if len(payload.servent_id) != ID_SIZE:
            raise EncodeError("servent id must be 16 bytes")
        parts = [_pack(_HIT_HEAD, payload.num_hits, payload.port, _ip_bytes(payload.ip), payload.speed)]
        for r in payload.results:
            parts.append(_pack(_HIT_RESULT, r.file_index, r.file_size))
            parts.append(_text(r.file_name, "file name") + b"\x00\x00")
        parts.append(payload.servent_id)
        return b"".join(parts)
    if len(payload.servent_id) != ID_SIZE:
        raise EncodeError("servent id must be 16 bytes")
    return _pack(_PUSH, payload.servent_id, payload.file_index, _ip_bytes(payload.ip), payload.port)


def encode_descriptor(header: DescriptorHeader, payload: Payload) -> bytes:
    """Serialize a descriptor; the payload length in ``header`` is recomputed."""
    if len(header.descriptor_id) != ID_SIZE:
        raise EncodeError("descriptor id must be 16 bytes")
    try:
        kind = PayloadKind(header.payload_kind)
    except ValueError as exc:
        raise EncodeError(f"unknown payload kind {header.payload_kind!r}") from exc
    body = encode_payload(kind, payload)
    return _pack(_HEADER, header.descriptor_id, kind, header.ttl, header.hops, len(body)) + body


def encode(desc: Descriptor) -> bytes:
    return encode_descriptor(desc.header, desc.payload)


def decode_header(data: bytes) -> DescriptorHeader:
    if len(data) < HEADER_SIZE:
        raise TruncatedError(f"need {HEADER_SIZE} header bytes, have {len(data)}")
    did, kind, ttl, hops, length = _HEADER.unpack_from(data)
    try:
        kind = PayloadKind(kind)
    except ValueError:
        raise DecodeError(f"unknown payload kind 0x{kind:02x}") from None
    return DescriptorHeader(did, kind, ttl, hops, length)


def _cstring(raw: bytes, what: str) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(f"{what} is not valid UTF-8") from exc


def decode_payload(kind: PayloadKind, body: bytes) -> Payload:
    if kind == PayloadKind.PING:
        if body:
            raise DecodeError("ping carries a payload")
        return PingPayload()
    if kind == PayloadKind.PONG:
        if len(body) != _PONG.size:
            raise DecodeError(f"pong payload must be {_PONG.size} bytes")
        port, ip, files, kb = _PONG.unpack(body)
        return PongPayload(port, _ip_str(ip), files, kb)
    if kind == PayloadKind.QUERY:
        if len(body) < 4 or body[-1] != 0 or b"\x00" in body[2:-1]:
            raise DecodeError("malformed query criteria")
        (speed,) = _QUERY_MIN_SPEED.unpack_from(body)
        return QueryPayload(speed, _cstring(body[2:-1], "criteria"))
    if kind == PayloadKind.QUERY_HIT:
        if len(body) < _HIT_HEAD.size + ID_SIZE:
            raise DecodeError("query hit payload too short")
        num_hits, port, ip, speed = _HIT_HEAD.unpack_from(body)
        pos = _HIT_HEAD.size
        end = len(body) - ID_SIZE
        results = []
        for _ in range(num_hits):
            if pos + _HIT_RESULT.size > end:
                raise DecodeError("result set shorter than num_hits")
            index, size = _HIT_RESULT.unpack_from(body, pos)
            pos += _HIT_RESULT.size
            stop = body.find(b"\x00\x00", pos, end)
            if stop < 0:
                raise DecodeError("unterminated file name in result set")
            results.append(QueryHitResult(index, size, _cstring(body[pos:stop], "file name")))
            pos = stop + 2
        if pos != end:
            raise DecodeError("result set length does not match num_hits")
        return QueryHitPayload(port, _ip_str(ip), speed, tuple(results), body[end:])
    if len(body) != _PUSH.size:
        raise DecodeError(f"push payload must be {_PUSH.size} bytes")
    sid, index, ip, port = _PUSH.unpack(body)
    return PushPayload(sid, index, _ip_str(ip), port)


def decode_descriptor(data: bytes) -> tuple[DescriptorHeader, Payload]:
    """Decode the descriptor at the start of ``data``.

    Exactly ``23 + payload_length`` bytes are consumed; anything after that
    belongs to the next descriptor.
    """
    header = decode_header(data)
    end = HEADER_SIZE + header.payload_length
    if len(data) < end:
        raise TruncatedError(
            f"payload length {header.payload_length} but only {len(data) - HEADER_SIZE} bytes follow"
        )
    return header, decode_payload(header.payload_kind, bytes(data[HEADER_SIZE:end]))


def decode(data: bytes) -> Descriptor:
    header, payload = decode_descriptor(data)
    return Descriptor(header, payload)


def iter_stream(data: bytes) -> Iterator[Descriptor]:
    """Yield back-to-back descriptors; a trailing partial descriptor raises."""
    view = memoryview(data)
    pos = 0
    while pos < len(data):
        header, payload = decode_descriptor(view[pos:])
        yield Descriptor(header, payload)
        pos += HEADER_SIZE + header.payload_length


def decode_stream(data: bytes) -> list[Descriptor]:
    return list(iter_stream(data))


def describe(desc: Descriptor) -> str:
    """Multi-line human-readable rendering used by the CLI."""
    h = desc.header
    lines = [
        f"descriptor_id  {h.descriptor_id.hex()}",
        f"payload_kind   {h.payload_kind.name} (0x{int(h.payload_kind):02x})",
        f"ttl            {h.ttl}",
        f"hops           {h.hops}",
        f"payload_length {h.payload_length}",
    ]
    p = desc.payload
    if isinstance(p, QueryHitPayload):
        lines.append(f"num_hits       {p.num_hits}")
        lines.append(f"host           {p.ip}:{p.port} speed={p.speed}")
        for r in p.results:
            lines.append(f"  [{r.file_index}] {r.file_name} ({r.file_size} bytes)")
        lines.append(f"servent_id     {p.servent_id.hex()}")
    elif not isinstance(p, PingPayload):
        for name, value in vars(p).items():
            if isinstance(value, bytes):
                value = value.hex()
            lines.append(f"{name:<14} {value}")
    return "\n".join(lines)
