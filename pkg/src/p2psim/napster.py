"""Napster central index server, metaserver and peer transfer dialogues."""

from __future__ import annotations

import enum
import hashlib
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Optional, Sequence, Union

from .servent import name_matches
from .wire_napster import (
    ANON_EMAIL,
    BrowseResponse,
    DownloadAck,
    ErrorMessage,
    Function,
    LoginAck,
    NapsterMessage,
    SearchQuery,
    SearchResult,
    SharedFileRecord,
    TransferNotice,
    encode_message,
)

SERVER_CAPACITY = 15_000
LIGHT_LOAD_TOLERANCE = 0.10


class AllServersFull(RuntimeError):
    pass


# --- metaserver ---------------------------------------------------------------


@dataclass
class ServerSlot:
    address: str
    current_load: int = 0
    capacity: int = SERVER_CAPACITY


@dataclass
class MetaserverState:
    servers: list[ServerSlot] = field(default_factory=list)


def metaserver_assign(ms: MetaserverState, seed: Union[int, random.Random, None] = None) -> str:
    """Pick uniformly among non-full servers within 10% of the lightest load."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    open_ = [s for s in ms.servers if s.current_load < s.capacity]
    if not open_:
        raise AllServersFull("every index server is at capacity")
    floor = min(s.current_load for s in open_)
    tier = [s for s in open_ if s.current_load <= floor * (1 + LIGHT_LOAD_TOLERANCE)]
    return rng.choice(tier).address


# --- index server -------------------------------------------------------------


@dataclass
class UserEntry:
    password: str
    email: str
    link_type: int = 0
    data_port: int = 0
    ip: int = 0
    online: bool = False


@dataclass
class ServerState:
    users: dict[str, UserEntry] = field(default_factory=dict)
    files: dict[str, list[SharedFileRecord]] = field(default_factory=dict)
    downloads_in_progress: Counter = field(default_factory=Counter)
    sessions: dict = field(default_factory=dict)  # conn -> nick

    def conn_of(self, nick: str):
        for conn, n in self.sessions.items():
            if n == nick:
                return conn
        return None

    def logoff(self, conn) -> Optional[str]:
        """Forget a closed connection and purge its user's index entries."""
        nick = self.sessions.pop(conn, None)
        if nick is not None:
            self.users[nick].online = False
            self.files.pop(nick, None)
        return nick

    def index(self):
        for nick, records in self.files.items():
            for r in records:
                yield nick, r


Reply = tuple[Hashable, NapsterMessage]


def _error(conn, text: str) -> list[Reply]:
    return [(conn, NapsterMessage.of(Function.ERROR, ErrorMessage(text)))]


def _in(value: int, rng) -> bool:
    return rng is None or rng[0] <= value <= rng[1]


def match_search(q: SearchQuery, index, link_types: Optional[dict] = None) -> list[tuple[str, SharedFileRecord]]:
    """Filename-only matching of artist/title tokens plus numeric range filters."""
    words = " ".join(t for t in (q.artist, q.title) if t)
    out = []
    for nick, rec in index:
        if words and not name_matches(words, rec.filename):
            continue
        if not _in(rec.bitrate_kbps, q.bitrate_range) or not _in(rec.frequency_hz, q.frequency_range):
            continue
        if q.link_type_range is not None and not _in((link_types or {}).get(nick, 0), q.link_type_range):
            continue
        out.append((nick, rec))
        if len(out) >= q.max_results:
            break
    return out


def server_handle(state: ServerState, from_conn, msg: NapsterMessage, peer_ip: int = 0) -> list[Reply]:
    """Process one client message; returns (connection, message) replies."""
    fn = msg.function
    body = msg.body()

    if fn in (Function.LOGIN, Function.NEW_USER_LOGIN):
        user = state.users.get(body.nick)
        if fn == Function.NEW_USER_LOGIN:
            if user is not None:
                return _error(from_conn, "nick already registered")
            user = UserEntry(body.password, body.email)
            state.users[body.nick] = user
        elif user is not None and user.password != body.password:
            return _error(from_conn, "invalid password")
        if user is not None and user.online:
            return _error(from_conn, "nick already logged in")
        if user is None:
            user = UserEntry(body.password, ANON_EMAIL)
            state.users[body.nick] = user
            email = ANON_EMAIL
        else:
            email = user.email
        user.link_type, user.data_port, user.ip, user.online = body.link_type, body.port, peer_ip, True
        state.sessions[from_conn] = body.nick
        state.files.setdefault(body.nick, [])
        return [(from_conn, NapsterMessage.of(Function.LOGIN_ACK, LoginAck(email)))]

    nick = state.sessions.get(from_conn)
    if nick is None:
        return _error(from_conn, "not logged in")

    if fn == Function.SHARE:
        state.files[nick].append(body)
        return []

    if fn == Function.SEARCH:
        links = {n: u.link_type for n, u in state.users.items()}
        return [
            (from_conn, NapsterMessage.of(Function.SEARCH_RESPONSE, _row(state, n, r)))
            for n, r in match_search(body, state.index(), links)
        ]

    if fn == Function.BROWSE:
        target = body.nick
        if target not in state.users or not state.users[target].online:
            return _error(from_conn, f"user {target} is not online")
        rows = tuple(_row(state, target, r) for r in state.files.get(target, []))
        return [(from_conn, NapsterMessage.of(Function.BROWSE_RESPONSE, BrowseResponse(target, rows)))]

    if fn in (Function.DOWNLOAD_REQUEST, Function.ALT_DOWNLOAD_REQUEST):
        up = state.users.get(body.nick)
        if up is None or not up.online:
            return _error(from_conn, f"user {body.nick} is not online")
        rec = next((r for r in state.files.get(body.nick, []) if r.filename == body.filename), None)
        if rec is None:
            return _error(from_conn, f"{body.nick} does not share {body.filename}")
        if fn == Function.DOWNLOAD_REQUEST:
            if up.data_port == 0:
                return _error(from_conn, f"{body.nick} is firewalled; use an alternate download request")
            ack = DownloadAck(body.nick, up.ip, up.data_port, rec.filename, rec.md5, up.link_type)
            return [(from_conn, NapsterMessage.of(Function.DOWNLOAD_ACK, ack))]
        if up.data_port != 0:
            return _error(from_conn, f"{body.nick} is not firewalled; use a download request")
        me = state.users[nick]
        ack = DownloadAck(nick, me.ip, me.data_port, rec.filename, rec.md5, me.link_type)
        return [(state.conn_of(body.nick), NapsterMessage.of(Function.ALT_DOWNLOAD_ACK, ack))]

    if fn == Function.DOWNLOADING_FILE:
        state.downloads_in_progress[(nick, body.nick, body.filename)] += 1
        return []

    if fn == Function.DOWNLOAD_COMPLETE:
        key = (nick, body.nick, body.filename)
        if state.downloads_in_progress[key] > 0:
            state.downloads_in_progress[key] -= 1
            if not state.downloads_in_progress[key]:
                del state.downloads_in_progress[key]
        return []

    return _error(from_conn, f"unsupported function 0x{fn:x}")


def _row(state: ServerState, nick: str, rec: SharedFileRecord) -> SearchResult:
    u = state.users[nick]
    return SearchResult(rec, nick, u.ip, u.link_type)


# --- file content ------------------------------------------------------------


def synthetic_content(filename: str, size: int) -> bytes:
    """Deterministic stand-in bytes for a shared file."""
    if size == 0:
        return b""
    return random.Random(f"{filename}:{size}").randbytes(size)


def make_record(filename: str, size: int, bitrate: int = 128, frequency: int = 44100, duration: int = 0) -> SharedFileRecord:
    md5 = hashlib.md5(synthetic_content(filename, size)).hexdigest()
    return SharedFileRecord(filename, md5, size, bitrate, frequency, duration)


# --- transfer dialogues ------------------------------------------------------


class Phase(enum.IntEnum):
    GREET = 0
    REQUEST = 1
    OFFSET = 2
    STREAM = 3
    DONE = 4
    FAILED = 5


@dataclass
class WireExchange:
    sender: str  # "downloader", "uploader" or "server"
    receiver: str
    data: bytes
    note: str = ""


@dataclass
class TransferDialogue:
    direction: str = "normal"  # or "firewalled"
    phase: Phase = Phase.GREET
    offset: int = 0
    opened_by: Optional[str] = None
    exchanges: list[WireExchange] = field(default_factory=list)

    def advance(self, phase: Phase) -> None:
        if phase < self.phase:
            raise RuntimeError(f"phase cannot go back from {self.phase.name} to {phase.name}")
        self.phase = phase

    def say(self, sender: str, receiver: str, data: bytes, note: str = "") -> None:
        self.exchanges.append(WireExchange(sender, receiver, data, note))

    def fail(self) -> None:
        self.phase = Phase.FAILED

    @property
    def stream(self) -> bytes:
        return b"".join(x.data for x in self.exchanges if x.note == "stream")

    def sent_by(self, sender: str) -> list[bytes]:
        return [x.data for x in self.exchanges if x.sender == sender and x.note != "stream"]


def _request_line(nick: str, filename: str, number: int) -> bytes:
    return f'{nick} "{filename}" {number}'.encode("ascii")


def _stream(dlg: TransferDialogue, content: bytes, offset: int, uploader: str, filename: str) -> None:
    dlg.offset = offset
    dlg.advance(Phase.STREAM)
    notice = TransferNotice(uploader, filename)
    dlg.say("downloader", "server", encode_message(NapsterMessage.of(Function.DOWNLOADING_FILE, notice)), "0xDA")
    dlg.say("uploader", "downloader", content[offset:], "stream")
    dlg.say("downloader", "server", encode_message(NapsterMessage.of(Function.DOWNLOAD_COMPLETE, notice)), "0xDB")
    dlg.advance(Phase.DONE)


def client_transfer_normal(
    dialogue: TransferDialogue,
    nick: str,
    filename: str,
    offset: int,
    uploader_files: dict[str, bytes],
    uploader_nick: str = "uploader",
) -> TransferDialogue:
    """Downloader connects to the uploader's data port and sends GET."""
    dialogue.direction = "normal"
    dialogue.opened_by = "downloader"
    dialogue.say("downloader", "uploader", b"", "connect")
    dialogue.advance(Phase.REQUEST)
    dialogue.say("downloader", "uploader", b"GET")
    dialogue.say("downloader", "uploader", _request_line(nick, filename, offset))
    content = uploader_files.get(filename)
    if content is None:
        dialogue.say("uploader", "downloader", b"FILE NOT SHARED")
        dialogue.fail()
        return dialogue
    if not 0 <= offset <= len(content):
        dialogue.say("uploader", "downloader", b"INVALID REQUEST")
        dialogue.fail()
        return dialogue
    dialogue.advance(Phase.OFFSET)
    dialogue.say("uploader", "downloader", str(len(content)).encode("ascii"))
    _stream(dialogue, content, offset, uploader_nick, filename)
    return dialogue


def client_transfer_firewalled(
    dialogue: TransferDialogue,
    uploader_nick: str,
    filename: str,
    uploader_files: dict[str, bytes],
    downloader_reply: Union[int, str],
) -> TransferDialogue:
    """Uploader behind a firewall connects out to the downloader after 0x1F5.

    ``downloader_reply`` is the byte offset the downloader asks for, or an
    error string such as ``"INVALID REQUEST"``.
    """
    dialogue.direction = "firewalled"
    dialogue.opened_by = "uploader"
    dialogue.say("uploader", "downloader", b"", "connect")
    dialogue.say("downloader", "uploader", b"1")
    dialogue.advance(Phase.REQUEST)
    dialogue.say("uploader", "downloader", b"SEND")
    content = uploader_files.get(filename)
    if content is None:
        dialogue.fail()
        return dialogue
    dialogue.say("uploader", "downloader", _request_line(uploader_nick, filename, len(content)))
    reply = str(downloader_reply)
    dialogue.say("downloader", "uploader", reply.encode("ascii"))
    if not reply.isdigit() or int(reply) > len(content):
        dialogue.fail()
        return dialogue
    dialogue.advance(Phase.OFFSET)
    _stream(dialogue, content, int(reply), uploader_nick, filename)
    return dialogue


def downloader_offset_reply(requested_offset: Optional[int], size: int) -> str:
    """What a downloader answers after SEND: an ASCII offset or INVALID REQUEST."""
    if requested_offset is None or not 0 <= requested_offset <= size:
        return "INVALID REQUEST"
    return str(requested_offset)


def transfer_checks(dialogue: TransferDialogue, size: int) -> bool:
    return dialogue.phase == Phase.DONE and len(dialogue.stream) == size - dialogue.offset


__all__: Sequence[str] = [
    "AllServersFull", "MetaserverState", "ServerSlot", "metaserver_assign", "ServerState", "UserEntry",
    "match_search", "server_handle", "synthetic_content", "make_record", "Phase", "TransferDialogue",
    "WireExchange", "client_transfer_normal", "client_transfer_firewalled", "downloader_offset_reply",
]
