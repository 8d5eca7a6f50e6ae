"""OpenFT packet codec.

Header is one little-endian 32-bit word: bits 0-15 payload length, bits
16-27 packet type, bits 28-31 flags. Payload layouts are provisional; only
nodeinfo, child, the share registry packets and search are typed, nodecap,
session and stats carry key/value lists, the rest are opaque bytes.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass
from enum import IntEnum, IntFlag
from typing import Union

from .errors import DecodeError, EncodeError, TruncatedError
from .wire_napster import SharedFileRecord

HEADER_SIZE = 4
MAX_PAYLOAD = 0xFFFF
_WORD = struct.Struct("<I")

FLAG_RESPONSE = 0x1


class PacketKind(IntEnum):
    VERSION = 0
    NODEINFO = 1
    NODELIST = 2
    NODECAP = 3
    PING = 4
    SESSION = 5
    CHILD = 6
    ADDSHARE = 7
    REMSHARE = 8
    MODSHARE = 9
    STATS = 10
    SEARCH = 11
    BROWSE = 12
    PUSH = 13


class NodeClass(IntFlag):
    USER = 1
    SEARCH = 2
    INDEX = 4


class ChildStatus(IntEnum):
    REQUEST = 0
    ACCEPT = 1
    REJECT = 2


@dataclass(frozen=True)
class NodeInfo:
    ip: str
    port: int
    http_port: int
    category: NodeClass


@dataclass(frozen=True)
class ChildPayload:
    """Request (or answer) to become a child of the search node at ``target``."""

    target_ip: str
    target_port: int
    status: ChildStatus = ChildStatus.REQUEST


@dataclass(frozen=True)
class ShareRecord:
    record: SharedFileRecord


@dataclass(frozen=True)
class KeyValues:
    items: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class SearchRequest:
    search_id: bytes
    ttl: int
    hops: int
    min_speed: int
    criteria: str


@dataclass(frozen=True)
class SearchHit:
    file_index: int
    file_size: int
    file_name: str


@dataclass(frozen=True)
class SearchResponse:
    search_id: bytes
    ttl: int
    hops: int
    ip: str
    port: int
    speed: int
    node_id: bytes
    hits: tuple[SearchHit, ...] = ()


@dataclass(frozen=True)
class Opaque:
    data: bytes = b""


OpenFTPayload = Union[NodeInfo, ChildPayload, ShareRecord, KeyValues, SearchRequest, SearchResponse, Opaque]

_TYPED = {
    PacketKind.NODEINFO: (NodeInfo,),
    PacketKind.CHILD: (ChildPayload,),
    PacketKind.ADDSHARE: (ShareRecord,),
    PacketKind.REMSHARE: (ShareRecord,),
    PacketKind.MODSHARE: (ShareRecord,),
    PacketKind.NODECAP: (KeyValues,),
    PacketKind.SESSION: (KeyValues,),
    PacketKind.STATS: (KeyValues,),
    PacketKind.SEARCH: (SearchRequest, SearchResponse),
}


def payload_types(kind: PacketKind) -> tuple[type, ...]:
    return _TYPED.get(kind, (Opaque,))


@dataclass(frozen=True)
class OpenFTPacket:
    kind: PacketKind
    payload: OpenFTPayload = Opaque()
    flags: int = 0

    @property
    def is_response(self) -> bool:
        return bool(self.flags & FLAG_RESPONSE)


# --- primitive helpers -----------------------------------------------------


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError("payload ends inside a field")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        st = struct.Struct("<" + fmt)
        return st.unpack(self.take(st.size))

    def string(self) -> str:
        (n,) = self.unpack("H")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError("string is not UTF-8") from exc

    def ip(self) -> str:
        return socket.inet_ntoa(self.take(4))

    def done(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError(f"{len(self.data) - self.pos} unexpected trailing payload bytes")


def _string(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise EncodeError("string too long")
    return struct.pack("<H", len(raw)) + raw


def _ip(ip: str) -> bytes:
    try:
        return socket.inet_aton(ip)
    except OSError as exc:
        raise EncodeError(f"bad IPv4 address {ip!r}") from exc


def _id16(b: bytes) -> bytes:
    if len(b) != 16:
        raise EncodeError("identifiers are 16 bytes")
    return b


def _encode_payload(p: OpenFTPayload) -> bytes:
    try:
        if isinstance(p, Opaque):
            return bytes(p.data)
        if isinstance(p, NodeInfo):
            return _ip(p.ip) + struct.pack("<HHH", p.port, p.http_port, int(p.category))
        if isinstance(p, ChildPayload):
            return _ip(p.target_ip) + struct.pack("<HB", p.target_port, int(p.status))
        if isinstance(p, ShareRecord):
            r = p.record
            return (
                bytes.fromhex(r.md5)
                + struct.pack("<QIII", r.size_bytes, r.bitrate_kbps, r.frequency_hz, r.duration_s)
                + _string(r.filename)
            )
        if isinstance(p, KeyValues):
            out = [struct.pack("<H", len(p.items))]
            for k, v in p.items:
                out += [_string(k), _string(v)]
            return b"".join(out)
        if isinstance(p, SearchRequest):
            return _id16(p.search_id) + struct.pack("<BBH", p.ttl, p.hops, p.min_speed) + _string(p.criteria)
        if isinstance(p, SearchResponse):
            out = [
                _id16(p.search_id),
                struct.pack("<BB", p.ttl, p.hops),
                _ip(p.ip),
                struct.pack("<HI", p.port, p.speed),
                _id16(p.node_id),
                struct.pack("<H", len(p.hits)),
            ]
            for h in p.hits:
                out += [struct.pack("<II", h.file_index, h.file_size), _string(h.file_name)]
            return b"".join(out)
    except struct.error as exc:
        raise EncodeError(str(exc)) from exc
    raise EncodeError(f"unsupported payload {type(p).__name__}")


def _decode_payload(kind: PacketKind, flags: int, data: bytes) -> OpenFTPayload:
    if kind not in _TYPED:
        return Opaque(data)
    r = _Reader(data)
    if kind == PacketKind.NODEINFO:
        ip = r.ip()
        port, http_port, cat = r.unpack("HHH")
        out: OpenFTPayload = NodeInfo(ip, port, http_port, NodeClass(cat))
    elif kind == PacketKind.CHILD:
        ip = r.ip()
        port, status = r.unpack("HB")
        try:
            out = ChildPayload(ip, port, ChildStatus(status))
        except ValueError:
            raise DecodeError(f"unknown child status {status}") from None
    elif kind in (PacketKind.ADDSHARE, PacketKind.REMSHARE, PacketKind.MODSHARE):
        md5 = r.take(16).hex()
        size, bitrate, freq, dur = r.unpack("QIII")
        out = ShareRecord(SharedFileRecord(r.string(), md5, size, bitrate, freq, dur))
    elif kind == PacketKind.SEARCH and flags & FLAG_RESPONSE:
        sid = r.take(16)
        ttl, hops = r.unpack("BB")
        ip = r.ip()
        port, speed = r.unpack("HI")
        node_id = r.take(16)
        (n,) = r.unpack("H")
        hits = []
        for _ in range(n):
            index, size = r.unpack("II")
            hits.append(SearchHit(index, size, r.string()))
        out = SearchResponse(sid, ttl, hops, ip, port, speed, node_id, tuple(hits))
    elif kind == PacketKind.SEARCH:
        sid = r.take(16)
        ttl, hops, speed = r.unpack("BBH")
        out = SearchRequest(sid, ttl, hops, speed, r.string())
    else:
        (n,) = r.unpack("H")
        out = KeyValues(tuple((r.string(), r.string()) for _ in range(n)))
    r.done()
    return out


def encode_packet(p: OpenFTPacket) -> bytes:
    try:
        kind = PacketKind(p.kind)
    except ValueError as exc:
        raise EncodeError(f"unknown packet kind {p.kind!r}") from exc
    if not isinstance(p.payload, payload_types(kind)):
        raise EncodeError(f"{type(p.payload).__name__} is not a payload for {kind.name.lower()}")
    if isinstance(p.payload, SearchResponse) != bool(p.flags & FLAG_RESPONSE) and kind == PacketKind.SEARCH:
        raise EncodeError("search responses must carry the response flag and requests must not")
    if not 0 <= p.flags <= 0xF:
        raise EncodeError("flags are 4 bits")
    body = _encode_payload(p.payload)
    if len(body) > MAX_PAYLOAD:
        raise EncodeError(f"payload of {len(body)} bytes exceeds {MAX_PAYLOAD}")
    return _WORD.pack(len(body) | (int(kind) << 16) | (p.flags << 28)) + body


def decode_packet(data: bytes) -> OpenFTPacket:
    """Decode the packet at the start of ``data``; consumes ``4 + length`` bytes."""
    if len(data) < HEADER_SIZE:
        raise TruncatedError("need 4 header bytes")
    (word,) = _WORD.unpack_from(data)
    length = word & 0xFFFF
    code = (word >> 16) & 0xFFF
    flags = word >> 28
    try:
        kind = PacketKind(code)
    except ValueError:
        raise DecodeError(f"unknown packet type {code}") from None
    body = bytes(data[HEADER_SIZE : HEADER_SIZE + length])
    if len(body) < length:
        raise TruncatedError(f"length field says {length} bytes, {len(body)} available")
    try:
        payload = _decode_payload(kind, flags, body)
    except ValueError as exc:
        if isinstance(exc, DecodeError):
            raise
        raise DecodeError(str(exc)) from exc
    return OpenFTPacket(kind, payload, flags)


def packet_size(data: bytes) -> int:
    if len(data) < HEADER_SIZE:
        raise TruncatedError("need 4 header bytes")
    return HEADER_SIZE + (_WORD.unpack_from(data)[0] & 0xFFFF)


def decode_stream(data: bytes) -> list[OpenFTPacket]:
    out = []
    pos = 0
    while pos < len(data):
        size = packet_size(data[pos:])
        out.append(decode_packet(data[pos : pos + size]))
        pos += size
    return out


def describe(p: OpenFTPacket) -> str:
    lines = [f"kind   {p.kind.name.lower()} ({int(p.kind)})", f"flags  0x{p.flags:x}"]
    for name, value in vars(p.payload).items():
        if isinstance(value, bytes):
            value = value.hex()
        lines.append(f"{name:<6} {value}")
    return "\n".join(lines)
