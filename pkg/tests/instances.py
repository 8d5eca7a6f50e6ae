"""Seeded random message instances for codec round-trip checks.

Plain ``random.Random`` generators rather than hypothesis strategies so the
acceptance run can draw tens of thousands of instances in well under a second.
"""

from __future__ import annotations

import random
import string

from p2psim import wire_gnutella as gw
from p2psim import wire_napster as nw
from p2psim import wire_openft as ow

ASCII_FIELD = string.ascii_letters + string.digits + " -_.()[]&'!,+=#@"
UNICODE_EXTRA = "éüñßøæ日本語音楽🎵Ωж"


def text(rng: random.Random, lo: int = 0, hi: int = 24, alphabet: str = ASCII_FIELD) -> str:
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(lo, hi)))


def utext(rng: random.Random, lo: int = 0, hi: int = 24) -> str:
    return text(rng, lo, hi, ASCII_FIELD + UNICODE_EXTRA)


def ip(rng: random.Random) -> str:
    return ".".join(str(rng.randrange(256)) for _ in range(4))


def ident(rng: random.Random) -> bytes:
    return rng.randbytes(16)


def md5(rng: random.Random) -> str:
    return rng.randbytes(16).hex()


# --- gnutella -----------------------------------------------------------------


def gnutella_payload(rng: random.Random, kind: gw.PayloadKind):
    if kind == gw.PayloadKind.PING:
        return gw.PingPayload()
    if kind == gw.PayloadKind.PONG:
        return gw.PongPayload(rng.randrange(1 << 16), ip(rng), rng.randrange(1 << 32), rng.randrange(1 << 32))
    if kind == gw.PayloadKind.QUERY:
        return gw.QueryPayload(rng.randrange(1 << 16), utext(rng, 1, 40))
    if kind == gw.PayloadKind.QUERY_HIT:
        results = tuple(
            gw.QueryHitResult(rng.randrange(1 << 32), rng.randrange(1 << 32), utext(rng, 0, 30))
            for _ in range(rng.randint(0, 5))
        )
        return gw.QueryHitPayload(rng.randrange(1 << 16), ip(rng), rng.randrange(1 << 32), results, ident(rng))
    return gw.PushPayload(ident(rng), rng.randrange(1 << 32), ip(rng), rng.randrange(1 << 16))


def gnutella_instance(rng: random.Random, kind=None) -> gw.Descriptor:
    kind = kind if kind is not None else rng.choice(list(gw.PayloadKind))
    return gw.Descriptor.build(ident(rng), gnutella_payload(rng, kind), rng.randrange(256), rng.randrange(256))


# --- napster ------------------------------------------------------------------


def _range(rng: random.Random, hi: int):
    if rng.random() < 0.5:
        return None
    a, b = sorted((rng.randrange(hi), rng.randrange(hi)))
    return (a, b)


def shared_record(rng: random.Random) -> nw.SharedFileRecord:
    return nw.SharedFileRecord(
        text(rng, 0, 30), md5(rng), rng.randrange(1 << 32),
        rng.choice([64, 128, 192, 320]), rng.choice([22050, 44100, 48000]), rng.randrange(3600),
    )


def search_result(rng: random.Random) -> nw.SearchResult:
    return nw.SearchResult(shared_record(rng), text(rng, 1, 12), rng.randrange(1 << 32), rng.randint(0, 10))


def napster_body(rng: random.Random, fn: nw.Function):
    F = nw.Function
    if fn in (F.LOGIN, F.NEW_USER_LOGIN):
        email = text(rng, 1, 20) if fn == F.NEW_USER_LOGIN else None
        return nw.LoginInfo(text(rng, 1, 12), text(rng, 0, 12), rng.randrange(1 << 16), text(rng, 0, 16), rng.randint(0, 10), email)
    if fn == F.LOGIN_ACK:
        return nw.LoginAck(text(rng, 0, 20))
    if fn == F.SHARE:
        return shared_record(rng)
    if fn == F.SEARCH:
        return nw.SearchQuery(
            text(rng, 0, 12) if rng.random() < 0.5 else None,
            text(rng, 0, 12) if rng.random() < 0.7 else None,
            _range(rng, 400), rng.randint(1, 500), _range(rng, 11), _range(rng, 50000),
        )
    if fn == F.SEARCH_RESPONSE:
        return search_result(rng)
    if fn == F.BROWSE:
        return nw.BrowseRequest(text(rng, 1, 12))
    if fn == F.BROWSE_RESPONSE:
        return nw.BrowseResponse(text(rng, 1, 12), tuple(search_result(rng) for _ in range(rng.randint(0, 4))))
    if fn in (F.DOWNLOAD_REQUEST, F.ALT_DOWNLOAD_REQUEST):
        return nw.DownloadRequest(text(rng, 1, 12), text(rng, 0, 30))
    if fn in (F.DOWNLOAD_ACK, F.ALT_DOWNLOAD_ACK):
        return nw.DownloadAck(text(rng, 1, 12), rng.randrange(1 << 32), rng.randrange(1 << 16), text(rng, 0, 30), md5(rng), rng.randint(0, 10))
    if fn in (F.DOWNLOADING_FILE, F.DOWNLOAD_COMPLETE):
        return nw.TransferNotice(text(rng, 1, 12), text(rng, 0, 30))
    return nw.ErrorMessage(text(rng, 0, 40))


def napster_instance(rng: random.Random, fn=None) -> tuple[nw.Function, object]:
    fn = fn if fn is not None else rng.choice(nw.KNOWN_KINDS)
    return fn, napster_body(rng, fn)


# --- openft -------------------------------------------------------------------


def openft_payload(rng: random.Random, kind: ow.PacketKind, response: bool):
    K = ow.PacketKind
    if kind == K.NODEINFO:
        return ow.NodeInfo(ip(rng), rng.randrange(1 << 16), rng.randrange(1 << 16), ow.NodeClass(rng.randint(1, 7)))
    if kind == K.CHILD:
        return ow.ChildPayload(ip(rng), rng.randrange(1 << 16), rng.choice(list(ow.ChildStatus)))
    if kind in (K.ADDSHARE, K.REMSHARE, K.MODSHARE):
        r = nw.SharedFileRecord(utext(rng, 0, 30), md5(rng), rng.randrange(1 << 64), rng.randrange(1 << 32),
                                rng.randrange(1 << 32), rng.randrange(1 << 32))
        return ow.ShareRecord(r)
    if kind in (K.NODECAP, K.SESSION, K.STATS):
        return ow.KeyValues(tuple((utext(rng, 0, 10), utext(rng, 0, 10)) for _ in range(rng.randint(0, 4))))
    if kind == K.SEARCH and response:
        hits = tuple(
            ow.SearchHit(rng.randrange(1 << 32), rng.randrange(1 << 32), utext(rng, 0, 30))
            for _ in range(rng.randint(0, 4))
        )
        return ow.SearchResponse(ident(rng), rng.randrange(256), rng.randrange(256), ip(rng),
                                 rng.randrange(1 << 16), rng.randrange(1 << 32), ident(rng), hits)
    if kind == K.SEARCH:
        return ow.SearchRequest(ident(rng), rng.randrange(256), rng.randrange(256), rng.randrange(1 << 16), utext(rng, 0, 30))
    return ow.Opaque(rng.randbytes(rng.randint(0, 32)))


def openft_instance(rng: random.Random, kind=None) -> ow.OpenFTPacket:
    kind = kind if kind is not None else rng.choice(list(ow.PacketKind))
    flags = rng.randrange(16)
    payload = openft_payload(rng, kind, bool(flags & ow.FLAG_RESPONSE))
    return ow.OpenFTPacket(kind, payload, flags)
