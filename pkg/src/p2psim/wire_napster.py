"""Napster client/server message codec.

Each message is a 4-byte header (payload length, function code; both
little-endian 16-bit) followed by a blank-separated ASCII payload. Fields
containing blanks are wrapped in double quotes.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional, Union

from .errors import DecodeError, EncodeError, TruncatedError

HEADER_SIZE = 4
MAX_PAYLOAD = 0xFFFF
_HEADER = struct.Struct("<HH")
_MD5_RE = re.compile(r"[0-9a-f]{32}")

ANON_EMAIL = "anon@napster"


class Function(IntEnum):
    ERROR = 0x00
    LOGIN = 0x02
    LOGIN_ACK = 0x03
    NEW_USER_LOGIN = 0x06
    SHARE = 0x64
    SEARCH = 0xC8
    SEARCH_RESPONSE = 0xC9
    DOWNLOAD_REQUEST = 0xCB
    DOWNLOAD_ACK = 0xCC
    BROWSE = 0xD3
    BROWSE_RESPONSE = 0xD4
    DOWNLOADING_FILE = 0xDA
    DOWNLOAD_COMPLETE = 0xDB
    ALT_DOWNLOAD_REQUEST = 0x1F4
    ALT_DOWNLOAD_ACK = 0x1F5


KNOWN_KINDS = tuple(f for f in Function if f is not Function.ERROR)

LINK_TYPES = {
    0: "unknown",
    1: "14.4 kbps",
    2: "28.8 kbps",
    3: "33.6 kbps",
    4: "56.7 kbps",
    5: "64k ISDN",
    6: "128k ISDN",
    7: "Cable",
    8: "DSL",
    9: "T1",
    10: "T3 or greater",
}


def link_type_label(code: int) -> str:
    return LINK_TYPES.get(code, "unknown")


# --- field rendering -------------------------------------------------------


def render_fields(fields) -> bytes:
    out = []
    for f in fields:
        if not isinstance(f, str):
            f = str(f)
        if '"' in f:
            raise EncodeError(f"field {f!r} contains a double quote")
        if "\n" in f or "\r" in f:
            raise EncodeError(f"field {f!r} contains a newline")
        if not f.isascii():
            raise EncodeError(f"field {f!r} is not ASCII")
        out.append(f'"{f}"' if (" " in f or not f) else f)
    return " ".join(out).encode("ascii")


def split_fields(payload: bytes) -> tuple[str, ...]:
    try:
        text = payload.decode("ascii")
    except UnicodeDecodeError as exc:
        raise DecodeError("payload is not ASCII") from exc
    fields: list[str] = []
    cur: list[str] = []
    quoted = False
    started = False
    for ch in text:
        if ch == '"':
            quoted = not quoted
            started = True
        elif ch == " " and not quoted:
            if started:
                fields.append("".join(cur))
                cur, started = [], False
        else:
            cur.append(ch)
            started = True
    if quoted:
        raise DecodeError("unbalanced quotes in payload")
    if started:
        fields.append("".join(cur))
    return tuple(fields)


# --- typed payloads ---------------------------------------------------------


def _int(value: str, what: str) -> int:
    if not value.isdigit():
        raise DecodeError(f"{what} is not an unsigned integer: {value!r}")
    return int(value)


def _expect(fields, n: int, what: str) -> None:
    if len(fields) != n:
        raise DecodeError(f"{what} expects {n} fields, got {len(fields)}")


@dataclass(frozen=True)
class LoginInfo:
    nick: str
    password: str
    port: int
    client_info: str
    link_type: int
    email: Optional[str] = None

    def __post_init__(self):
        if not 0 <= self.link_type <= 10:
            raise ValueError(f"link type {self.link_type} outside 0..10")
        if not 0 <= self.port <= 0xFFFF:
            raise ValueError(f"port {self.port} outside 0..65535")

    def fields(self):
        base = [self.nick, self.password, self.port, self.client_info, self.link_type]
        return base if self.email is None else base + [self.email]

    @classmethod
    def parse(cls, f, new_user: bool = False):
        _expect(f, 6 if new_user else 5, "login")
        try:
            return cls(f[0], f[1], _int(f[2], "port"), f[3], _int(f[4], "link type"), f[5] if new_user else None)
        except ValueError as exc:
            if isinstance(exc, DecodeError):
                raise
            raise DecodeError(str(exc)) from exc


@dataclass(frozen=True)
class LoginAck:
    email: str

    def fields(self):
        return [self.email]

    @classmethod
    def parse(cls, f):
        _expect(f, 1, "login ack")
        return cls(f[0])


@dataclass(frozen=True)
class SharedFileRecord:
    filename: str
    md5: str
    size_bytes: int
    bitrate_kbps: int = 128
    frequency_hz: int = 44100
    duration_s: int = 0

    def __post_init__(self):
        if not _MD5_RE.fullmatch(self.md5):
            raise ValueError(f"md5 must be 32 lowercase hex chars, got {self.md5!r}")
        if min(self.size_bytes, self.bitrate_kbps, self.frequency_hz, self.duration_s) < 0:
            raise ValueError("numeric fields must be non-negative")

    def fields(self):
        return [self.filename, self.md5, self.size_bytes, self.bitrate_kbps, self.frequency_hz, self.duration_s]

    @classmethod
    def parse(cls, f):
        _expect(f, 6, "shared file")
        try:
            return cls(f[0], f[1], *(_int(v, "file field") for v in f[2:6]))
        except DecodeError:
            raise
        except ValueError as exc:
            raise DecodeError(str(exc)) from exc


Range = Optional[tuple[int, int]]


@dataclass(frozen=True)
class SearchQuery:
    """Search constraints; the clause keywords on the wire are our own syntax."""

    artist: Optional[str] = None
    title: Optional[str] = None
    bitrate_range: Range = None
    max_results: int = 100
    link_type_range: Range = None
    frequency_range: Range = None

    def __post_init__(self):
        if self.max_results < 1:
            raise ValueError("max_results must be at least 1")
        for r in (self.bitrate_range, self.link_type_range, self.frequency_range):
            if r is not None and r[0] > r[1]:
                raise ValueError(f"range {r} is not ordered")

    def fields(self):
        out: list = []
        if self.artist is not None:
            out += ["ARTIST", self.artist]
        if self.title is not None:
            out += ["TITLE", self.title]
        if self.bitrate_range is not None:
            out += ["BITRATE", *self.bitrate_range]
        out += ["MAX_RESULTS", self.max_results]
        if self.link_type_range is not None:
            out += ["LINKTYPE", *self.link_type_range]
        if self.frequency_range is not None:
            out += ["FREQ", *self.frequency_range]
        return out

    @classmethod
    def parse(cls, f):
        kw: dict = {}
        i = 0
        order = ["ARTIST", "TITLE", "BITRATE", "MAX_RESULTS", "LINKTYPE", "FREQ"]
        last = -1
        while i < len(f):
            key = f[i]
            if key not in order or order.index(key) <= last:
                raise DecodeError(f"unexpected search clause {key!r}")
            last = order.index(key)
            arity = 2 if key in ("BITRATE", "LINKTYPE", "FREQ") else 1
            vals = f[i + 1 : i + 1 + arity]
            if len(vals) != arity:
                raise DecodeError(f"search clause {key} is truncated")
            if key == "ARTIST":
                kw["artist"] = vals[0]
            elif key == "TITLE":
                kw["title"] = vals[0]
            elif key == "MAX_RESULTS":
                kw["max_results"] = _int(vals[0], "max results")
            else:
                name = {"BITRATE": "bitrate_range", "LINKTYPE": "link_type_range", "FREQ": "frequency_range"}[key]
                kw[name] = (_int(vals[0], key), _int(vals[1], key))
            i += 1 + arity
        if "max_results" not in kw:
            raise DecodeError("search lacks MAX_RESULTS")
        try:
            return cls(**kw)
        except ValueError as exc:
            raise DecodeError(str(exc)) from exc


@dataclass(frozen=True)
class SearchResult:
    """One row of a search or browse response."""

    record: SharedFileRecord
    nick: str
    ip: int
    link_type: int

    def fields(self):
        return self.record.fields() + [self.nick, self.ip, self.link_type]

    @classmethod
    def parse(cls, f):
        _expect(f, 9, "search response")
        return cls(SharedFileRecord.parse(f[:6]), f[6], _int(f[7], "ip"), _int(f[8], "link type"))


@dataclass(frozen=True)
class BrowseRequest:
    nick: str

    def fields(self):
        return [self.nick]

    @classmethod
    def parse(cls, f):
        _expect(f, 1, "browse")
        return cls(f[0])


@dataclass(frozen=True)
class BrowseResponse:
    """All shared files of ``nick`` in one message: nick, count, then rows."""

    nick: str
    entries: tuple[SearchResult, ...] = ()

    def fields(self):
        out = [self.nick, len(self.entries)]
        for e in self.entries:
            out += e.fields()
        return out

    @classmethod
    def parse(cls, f):
        if len(f) < 2:
            raise DecodeError("browse response lacks nick/count")
        count = _int(f[1], "count")
        _expect(f, 2 + 9 * count, "browse response")
        rows = tuple(SearchResult.parse(f[2 + 9 * i : 11 + 9 * i]) for i in range(count))
        return cls(f[0], rows)


@dataclass(frozen=True)
class DownloadRequest:
    nick: str
    filename: str

    def fields(self):
        return [self.nick, self.filename]

    @classmethod
    def parse(cls, f):
        _expect(f, 2, "download request")
        return cls(f[0], f[1])


@dataclass(frozen=True)
class DownloadAck:
    """Payload of 0xCC (naming the uploader) and 0x1F5 (naming the downloader)."""

    nick: str
    ip: int
    port: int
    filename: str
    md5: str
    link_type: int

    def fields(self):
        return [self.nick, self.ip, self.port, self.filename, self.md5, self.link_type]

    @classmethod
    def parse(cls, f):
        _expect(f, 6, "download ack")
        return cls(f[0], _int(f[1], "ip"), _int(f[2], "port"), f[3], f[4], _int(f[5], "link type"))


@dataclass(frozen=True)
class TransferNotice:
    """Payload of 0xDA / 0xDB: who the file comes from and which file."""

    nick: str
    filename: str

    def fields(self):
        return [self.nick, self.filename]

    @classmethod
    def parse(cls, f):
        _expect(f, 2, "transfer notice")
        return cls(f[0], f[1])


@dataclass(frozen=True)
class ErrorMessage:
    text: str

    def fields(self):
        return [self.text]

    @classmethod
    def parse(cls, f):
        return cls(" ".join(f))


Body = Union[
    LoginInfo, LoginAck, SharedFileRecord, SearchQuery, SearchResult, BrowseRequest,
    BrowseResponse, DownloadRequest, DownloadAck, TransferNotice, ErrorMessage,
]

BODY_TYPES = {
    Function.ERROR: ErrorMessage,
    Function.LOGIN: LoginInfo,
    Function.NEW_USER_LOGIN: LoginInfo,
    Function.LOGIN_ACK: LoginAck,
    Function.SHARE: SharedFileRecord,
    Function.SEARCH: SearchQuery,
    Function.SEARCH_RESPONSE: SearchResult,
    Function.BROWSE: BrowseRequest,
    Function.BROWSE_RESPONSE: BrowseResponse,
    Function.DOWNLOAD_REQUEST: DownloadRequest,
    Function.DOWNLOAD_ACK: DownloadAck,
    Function.ALT_DOWNLOAD_REQUEST: DownloadRequest,
    Function.ALT_DOWNLOAD_ACK: DownloadAck,
    Function.DOWNLOADING_FILE: TransferNotice,
    Function.DOWNLOAD_COMPLETE: TransferNotice,
}


@dataclass(frozen=True)
class NapsterMessage:
    function: int
    fields: tuple[str, ...] = ()
    # raw payload of a message with an unrecognised function code, kept so
    # re-encoding is byte-identical
    raw: Optional[bytes] = field(default=None, compare=False)

    @classmethod
    def of(cls, function: int, body: Body) -> "NapsterMessage":
        if function == Function.LOGIN and getattr(body, "email", None) is not None:
            raise EncodeError("LOGIN carries no email; use NEW_USER_LOGIN")
        if function == Function.NEW_USER_LOGIN and getattr(body, "email", None) is None:
            raise EncodeError("NEW_USER_LOGIN requires an email")
        expected = BODY_TYPES.get(function)
        if expected is not None and not isinstance(body, expected):
            raise EncodeError(f"{type(body).__name__} is not a payload for function 0x{function:x}")
        return cls(int(function), tuple(str(v) for v in body.fields()))

    @property
    def known(self) -> bool:
        return self.function in BODY_TYPES

    @property
    def name(self) -> str:
        try:
            return Function(self.function).name
        except ValueError:
            return f"UNKNOWN_0x{self.function:04x}"

    def body(self) -> Union[Body, tuple[str, ...]]:
        """Typed view of the payload; unknown codes give the raw field list."""
        cls = BODY_TYPES.get(self.function)
        if cls is None:
            return self.fields
        if cls is LoginInfo:
            return LoginInfo.parse(self.fields, new_user=self.function == Function.NEW_USER_LOGIN)
        return cls.parse(self.fields)


def encode_message(msg: NapsterMessage) -> bytes:
    if not 0 <= msg.function <= 0xFFFF:
        raise EncodeError(f"function code {msg.function} out of range")
    payload = msg.raw if msg.raw is not None else render_fields(msg.fields)
    if len(payload) > MAX_PAYLOAD:
        raise EncodeError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    return _HEADER.pack(len(payload), msg.function) + payload


def message_size(data: bytes) -> int:
    if len(data) < HEADER_SIZE:
        raise TruncatedError("need 4 header bytes")
    length, _ = _HEADER.unpack_from(data)
    return HEADER_SIZE + length


def decode_message(data: bytes) -> NapsterMessage:
    """Decode the message at the start of ``data`` (trailing bytes ignored)."""
    if len(data) < HEADER_SIZE:
        raise TruncatedError("need 4 header bytes")
    length, function = _HEADER.unpack_from(data)
    payload = bytes(data[HEADER_SIZE : HEADER_SIZE + length])
    if len(payload) < length:
        raise TruncatedError(f"length field says {length} bytes, {len(payload)} available")
    if function in BODY_TYPES:
        msg = NapsterMessage(function, split_fields(payload))
        msg.body()  # validate field count and types
        return msg
    try:
        fields = split_fields(payload)
    except DecodeError:
        fields = ()
    return NapsterMessage(function, fields, raw=payload)


def decode_stream(data: bytes) -> list[NapsterMessage]:
    out = []
    pos = 0
    while pos < len(data):
        size = message_size(data[pos:])
        out.append(decode_message(data[pos : pos + size]))
        pos += size
    return out


def describe(msg: NapsterMessage) -> str:
    lines = [f"function 0x{msg.function:04x} {msg.name}"]
    body = msg.body()
    if isinstance(body, tuple):
        lines.append("fields   " + " | ".join(body))
    else:
        for name, value in vars(body).items():
            lines.append(f"{name:<8} {value}")
        if hasattr(body, "link_type"):
            lines.append(f"link     {link_type_label(body.link_type)}")
    return "\n".join(lines)
