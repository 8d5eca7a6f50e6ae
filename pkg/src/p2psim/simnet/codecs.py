"""How each protocol's messages travel through the simulator.

Wire protocols are encoded to bytes on send and decoded on delivery, so every
simulated hop also exercises the codec. The FastTrack-style overlay has no
public wire format and travels as plain objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

from .. import wire_gnutella as gw
from .. import wire_napster as nw
from .. import wire_openft as ow

KIND_NAMES = {
    gw.PayloadKind.PING: "Ping",
    gw.PayloadKind.PONG: "Pong",
    gw.PayloadKind.PUSH: "Push",
    gw.PayloadKind.QUERY: "Query",
    gw.PayloadKind.QUERY_HIT: "QueryHit",
}


@dataclass(frozen=True)
class Meta:
    kind: str
    mid: Optional[str]  # None: the simulator numbers the message
    ttl: Optional[int] = None
    hops: Optional[int] = None
    key: Optional[str] = None
    payload_kind: Optional[gw.PayloadKind] = None


@dataclass(frozen=True)
class Adapter:
    encode: Callable[[Any], Any]
    decode: Callable[[Any], Any]
    meta: Callable[[Any], Meta]


def descriptor_meta(d: gw.Descriptor) -> Meta:
    key = None
    if isinstance(d.payload, (gw.QueryHitPayload, gw.PushPayload)):
        key = d.payload.servent_id.hex()
    return Meta(KIND_NAMES[d.kind], d.descriptor_id.hex(), d.ttl, d.hops, key, d.kind)


# --- OpenFT search <-> descriptor ---------------------------------------------


def descriptor_to_openft(d: gw.Descriptor) -> ow.OpenFTPacket:
    p = d.payload
    if isinstance(p, gw.QueryPayload):
        return ow.OpenFTPacket(ow.PacketKind.SEARCH, ow.SearchRequest(d.descriptor_id, d.ttl, d.hops, p.min_speed, p.criteria))
    if isinstance(p, gw.QueryHitPayload):
        hits = tuple(ow.SearchHit(r.file_index, r.file_size, r.file_name) for r in p.results)
        body = ow.SearchResponse(d.descriptor_id, d.ttl, d.hops, p.ip, p.port, p.speed, p.servent_id, hits)
        return ow.OpenFTPacket(ow.PacketKind.SEARCH, body, flags=ow.FLAG_RESPONSE)
    raise ValueError(f"no OpenFT form for {d.kind!r}")


def openft_to_descriptor(pkt: ow.OpenFTPacket) -> gw.Descriptor:
    p = pkt.payload
    if isinstance(p, ow.SearchRequest):
        return gw.Descriptor.build(p.search_id, gw.QueryPayload(p.min_speed, p.criteria), p.ttl, p.hops)
    if isinstance(p, ow.SearchResponse):
        results = tuple(gw.QueryHitResult(h.file_index, h.file_size, h.file_name) for h in p.hits)
        payload = gw.QueryHitPayload(p.port, p.ip, p.speed, results, p.node_id)
        return gw.Descriptor.build(p.search_id, payload, p.ttl, p.hops)
    raise ValueError(f"{pkt.kind.name} is not a search packet")


def _openft_encode(msg):
    if isinstance(msg, gw.Descriptor):
        msg = descriptor_to_openft(msg)
    return ow.encode_packet(msg)


def _openft_decode(raw):
    pkt = ow.decode_packet(raw)
    if pkt.kind == ow.PacketKind.SEARCH:
        return openft_to_descriptor(pkt)
    return pkt


def _openft_meta(msg) -> Meta:
    if isinstance(msg, gw.Descriptor):
        return descriptor_meta(msg)
    return Meta(msg.kind.name.lower(), None)


def _object_meta(msg) -> Meta:
    if isinstance(msg, gw.Descriptor):
        return descriptor_meta(msg)
    return Meta(type(msg).__name__, None)


def _identity(x):
    return x


ADAPTERS: dict[str, Adapter] = {
    "gnutella": Adapter(gw.encode, gw.decode, descriptor_meta),
    "napster": Adapter(nw.encode_message, nw.decode_message, lambda m: Meta(m.name.lower(), None)),
    "openft": Adapter(_openft_encode, _openft_decode, _openft_meta),
    "ft": Adapter(_identity, _identity, _object_meta),
    "handshake": Adapter(lambda s: s.encode("ascii"), lambda b: b.decode("ascii"), lambda s: Meta("handshake", None)),
    "control": Adapter(_identity, _identity, lambda m: Meta(type(m).__name__, None)),
}
