"""Gnutella servent: handshake, descriptor routing, pong cache, queue priority."""

from __future__ import annotations

import enum
import os
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Hashable, Optional, Sequence

from .wire_gnutella import (
    PRIORITY,
    REQUEST_OF,
    Descriptor,
    PayloadKind,
    PingPayload,
    PongPayload,
    PushPayload,
    QueryHitPayload,
    QueryHitResult,
    QueryPayload,
)
from .wire_napster import SharedFileRecord

PROTOCOL_VERSION = "0.4"
CONNECT_PREFIX = "GNUTELLA CONNECT/"
ACCEPT_RESPONSE = "GNUTELLA OK\n\n"

HEALTH_TIMEOUT_MS = 10_000
COVERAGE_CAP = 2**64 - 1

FAULTS = ("rule1", "rule2", "rule3", "rule4", "rule5")


class _Local:
    def __repr__(self) -> str:
        return "LOCAL"


LOCAL = _Local()  # connection handle standing for the servent itself

Conn = Hashable


def ordered(conns) -> list:
    try:
        return sorted(conns)
    except TypeError:
        return sorted(conns, key=repr)


def new_id(rng=None) -> bytes:
    if rng is None:
        return os.urandom(16)
    return rng.getrandbits(128).to_bytes(16, "little")


@dataclass
class ServentConfig:
    initial_ttl: int = 7
    max_neighbors: int = 8
    ping_period_ms: int = 3000
    # ping only while the neighbour count is at or below this; None pings always
    ping_threshold: Optional[int] = 2
    pong_caching: bool = False
    seen_capacity: int = 65536
    speed: int = 56
    fault: Optional[str] = None

    def __post_init__(self):
        if self.fault is not None and self.fault not in FAULTS:
            raise ValueError(f"unknown fault {self.fault!r}; expected one of {FAULTS}")


@dataclass
class ConnHealth:
    last_received_at: int = 0
    last_sent_at: int = 0


@dataclass
class ServentState:
    servent_id: bytes
    ip: str = "127.0.0.1"
    port: int = 6346
    config: ServentConfig = field(default_factory=ServentConfig)
    neighbors: set = field(default_factory=set)
    local_index: list[SharedFileRecord] = field(default_factory=list)
    seen: OrderedDict = field(default_factory=OrderedDict)
    push_routes: OrderedDict = field(default_factory=OrderedDict)
    pong_cache: dict = field(default_factory=dict)
    conn_health: dict = field(default_factory=dict)

    def remember(self, key, conn) -> bool:
        """Record ``key -> conn`` unless already known (first wins)."""
        if key in self.seen:
            self.seen.move_to_end(key)
            return False
        self.seen[key] = conn
        if len(self.seen) > self.config.seen_capacity:
            self.seen.popitem(last=False)
        return True

    def remember_push_route(self, servent_id: bytes, conn) -> None:
        if servent_id not in self.push_routes:
            self.push_routes[servent_id] = conn
            if len(self.push_routes) > self.config.seen_capacity:
                self.push_routes.popitem(last=False)

    def reachable(self, conn) -> bool:
        return conn in self.neighbors

    def own_pong(self) -> PongPayload:
        kb = sum(r.size_bytes for r in self.local_index) // 1024
        return PongPayload(self.port, self.ip, len(self.local_index), kb)

    def local_hits(self, query: QueryPayload) -> list[QueryHitPayload]:
        hit = answer_query(
            query.criteria, query.min_speed, self.local_index, self.config.speed,
            servent_id=self.servent_id, ip=self.ip, port=self.port,
        )
        return [] if hit is None else [hit]

    def cache_pong(self, pong: PongPayload, hops_observed: int) -> None:
        if (pong.ip, pong.port) == (self.ip, self.port):
            return
        key = (pong.ip, pong.port)
        old = self.pong_cache.get(key)
        if old is None or hops_observed < old[1]:
            self.pong_cache[key] = (pong, hops_observed)


# --- handshake --------------------------------------------------------------


@dataclass(frozen=True)
class HandshakeResult:
    accepted: bool
    response: str
    reason: Optional[str] = None


def handshake(request_line: str, free_slots: int, version: str = PROTOCOL_VERSION) -> HandshakeResult:
    line = request_line.strip()
    if not line.startswith(CONNECT_PREFIX):
        return HandshakeResult(False, "GNUTELLA 400 Bad Request\n\n", "malformed")
    if line[len(CONNECT_PREFIX):] != version:
        return HandshakeResult(False, "GNUTELLA 505 Version Not Supported\n\n", "version")
    if free_slots <= 0:
        return HandshakeResult(False, "GNUTELLA 503 Service Unavailable\n\n", "slots")
    return HandshakeResult(True, ACCEPT_RESPONSE)


def connect_line(version: str = PROTOCOL_VERSION) -> str:
    return f"{CONNECT_PREFIX}{version}\n\n"


# --- routing ----------------------------------------------------------------


class Verb(enum.Enum):
    FORWARD = "forward"
    REPLY_BACK = "reply_back"
    DELIVER = "deliver"
    DROP = "drop"


class DropReason(enum.Enum):
    DUPLICATE = "duplicate"
    TTL_EXPIRED = "ttl_expired"
    NO_REVERSE_ROUTE = "no_reverse_route"
    UNKNOWN_KIND = "unknown_kind"


@dataclass(frozen=True)
class RoutingAction:
    verb: Verb
    target: object
    descriptor: Descriptor
    drop_reason: Optional[DropReason] = None


def _drop(desc, reason) -> RoutingAction:
    return RoutingAction(Verb.DROP, LOCAL, desc, reason)


def _reply(request: Descriptor, payload, hops: int = 0) -> Descriptor:
    # a reply has to travel back request.hops + 1 edges
    return Descriptor.build(request.descriptor_id, payload, ttl=request.hops + 1, hops=hops)


def handle_descriptor(state: ServentState, arrival: Conn, desc: Descriptor) -> list[RoutingAction]:
    """Apply the routing rules to one incoming descriptor.

    Duplicate suppression covers the flooded and originated kinds (Ping,
    Query, Push). Pongs and QueryHits legitimately share their request's id,
    so several of them with the same id are routed, not dropped.
    """
    fault = state.config.fault
    kind = desc.kind
    if kind not in PRIORITY:
        return [_drop(desc, DropReason.UNKNOWN_KIND)]

    if kind in (PayloadKind.PING, PayloadKind.QUERY):
        fresh = state.remember((desc.descriptor_id, kind), arrival)
        if not fresh and fault != "rule5":
            return [_drop(desc, DropReason.DUPLICATE)]
        actions: list[RoutingAction] = []
        caching = kind == PayloadKind.PING and state.config.pong_caching
        if kind == PayloadKind.PING:
            if caching:
                for pong, hops in pong_cache_answer(state, desc.header, with_hops=True):
                    actions.append(RoutingAction(Verb.REPLY_BACK, arrival, _reply(desc, pong, hops)))
            else:
                actions.append(RoutingAction(Verb.REPLY_BACK, arrival, _reply(desc, state.own_pong())))
        else:
            for hit in state.local_hits(desc.payload):
                actions.append(RoutingAction(Verb.REPLY_BACK, arrival, _reply(desc, hit)))
        if caching:
            return actions
        out = desc.hop()
        if fault == "rule4":
            out = replace(desc, header=replace(desc.header, hops=desc.hops + 1))
        elif out.ttl <= 0:
            actions.append(_drop(out, DropReason.TTL_EXPIRED))
            return actions
        for conn in ordered(state.neighbors):
            if conn == arrival and fault != "rule3":
                continue
            actions.append(RoutingAction(Verb.FORWARD, conn, out))
        return actions

    if kind == PayloadKind.PUSH:
        fresh = state.remember((desc.descriptor_id, kind), arrival)
        if not fresh and fault != "rule5":
            return [_drop(desc, DropReason.DUPLICATE)]
        sid = desc.payload.servent_id
        if sid == state.servent_id:
            return [RoutingAction(Verb.DELIVER, LOCAL, desc)]
        route = state.push_routes.get(sid)
        return _route_back(state, desc, route)

    # Pong / QueryHit: reverse path of the request
    if kind == PayloadKind.PONG and state.config.pong_caching:
        state.cache_pong(desc.payload, desc.hops + 1)
    route = state.seen.get((desc.descriptor_id, REQUEST_OF[kind]))
    if kind == PayloadKind.QUERY_HIT and route is not None:
        state.remember_push_route(desc.payload.servent_id, arrival)
    if route is LOCAL:
        return [RoutingAction(Verb.DELIVER, LOCAL, desc)]
    if fault == "rule2" and route is not None:
        others = [c for c in ordered(state.neighbors) if c != route]
        if others:
            route = others[0]
    return _route_back(state, desc, route)


def _route_back(state: ServentState, desc: Descriptor, route) -> list[RoutingAction]:
    if route is None or route is LOCAL or not state.reachable(route):
        return [_drop(desc, DropReason.NO_REVERSE_ROUTE)]
    out = desc.hop()
    if out.ttl <= 0:
        return [_drop(out, DropReason.TTL_EXPIRED)]
    return [RoutingAction(Verb.REPLY_BACK, route, out)]


def originate(state: ServentState, payload, rng=None, ttl: Optional[int] = None) -> Descriptor:
    """Create a Ping or Query and memorize it as originated here."""
    desc = Descriptor.build(new_id(rng), payload, ttl=state.config.initial_ttl if ttl is None else ttl)
    if state.config.fault != "rule1":
        state.remember((desc.descriptor_id, desc.kind), LOCAL)
    return desc


def originate_query(state: ServentState, criteria: str, min_speed: int = 0, rng=None, ttl=None) -> Descriptor:
    return originate(state, QueryPayload(min_speed, criteria), rng, ttl)


def originate_ping(state: ServentState, rng=None, ttl=None) -> Descriptor:
    return originate(state, PingPayload(), rng, ttl)


def initiate_push(state: ServentState, queryhit: QueryHitPayload, file_index: int, rng=None) -> Descriptor:
    if all(r.file_index != file_index for r in queryhit.results):
        raise ValueError(f"file index {file_index} is not in the query hit's result set")
    payload = PushPayload(queryhit.servent_id, file_index, state.ip, state.port)
    desc = Descriptor.build(new_id(rng), payload, ttl=state.config.initial_ttl)
    state.remember((desc.descriptor_id, PayloadKind.PUSH), LOCAL)
    return desc


def push_first_hop(state: ServentState, push: Descriptor) -> Optional[Conn]:
    """Connection an originated Push leaves on, or None without a route."""
    route = state.push_routes.get(push.payload.servent_id)
    return route if route is not LOCAL and state.reachable(route) else None


# --- local search -----------------------------------------------------------


def _tokens(text: str) -> list[str]:
    return [t for t in text.lower().split() if t]


def name_matches(criteria: str, name: str) -> bool:
    toks = _tokens(criteria)
    low = name.lower()
    return bool(toks) and all(t in low for t in toks)


def answer_query(
    criteria: str,
    min_speed: int,
    local_index: Sequence[SharedFileRecord],
    own_speed: int,
    *,
    servent_id: bytes = bytes(16),
    ip: str = "127.0.0.1",
    port: int = 6346,
) -> Optional[QueryHitPayload]:
    if own_speed < min_speed:
        return None
    results = tuple(
        QueryHitResult(i, r.size_bytes, r.filename)
        for i, r in enumerate(local_index)
        if name_matches(criteria, r.filename)
    )[:255]
    if not results:
        return None
    return QueryHitPayload(port, ip, own_speed, results, servent_id)


# --- pong caching -----------------------------------------------------------


def pong_cache_answer(state: ServentState, ping_header, with_hops: bool = False):
    """Own pong plus every cached pong seen at fewer than ``ping.ttl`` hops."""
    n = ping_header.ttl
    own = (state.own_pong(), 0)
    cached = sorted(
        (entry for entry in state.pong_cache.values() if entry[1] < n),
        key=lambda e: (e[1], e[0].ip, e[0].port),
    )
    out = [own, *cached]
    return out if with_hops else [p for p, _ in out]


# --- priority dropping --------------------------------------------------------


def _kind_of(item) -> PayloadKind:
    if isinstance(item, Descriptor):
        return item.kind
    return PayloadKind(getattr(item, "payload_kind", item))


def select_drop(queue: Sequence) -> int:
    """Index of the lowest-priority entry; the oldest one among equals."""
    if not queue:
        raise ValueError("select_drop called on an empty queue")
    return min(range(len(queue)), key=lambda i: (PRIORITY[_kind_of(queue[i])], i))


class OutboundQueue:
    """Bounded send queue; on overflow drops by priority or, if disabled, the newcomer."""

    def __init__(self, capacity: int, priority_drop: bool = True):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.priority_drop = priority_drop
        self.items: list = []

    def __len__(self) -> int:
        return len(self.items)

    def offer(self, item):
        """Enqueue ``item``; return the evicted entry, if any."""
        self.items.append(item)
        if len(self.items) <= self.capacity:
            return None
        idx = select_drop(self.items) if self.priority_drop else len(self.items) - 1
        return self.items.pop(idx)

    def pop(self):
        return self.items.pop(0)


# --- connection health --------------------------------------------------------


class Health(enum.Enum):
    KEEP = "keep"
    DROP = "drop"


def connection_health(
    entry: ConnHealth, now: int, ping_ttl1_answered: bool, timeout_ms: int = HEALTH_TIMEOUT_MS
) -> Health:
    if now - entry.last_received_at >= timeout_ms:
        return Health.DROP
    if now - entry.last_sent_at >= timeout_ms and not ping_ttl1_answered:
        return Health.DROP
    return Health.KEEP


# --- coverage arithmetic ------------------------------------------------------


def coverage_estimate_checked(degree: int, ttl: int, share_fraction, cap: int = COVERAGE_CAP) -> tuple[int, bool]:
    """``floor(degree**ttl * share_fraction)`` and whether it saturated at ``cap``."""
    if degree < 1 or ttl < 0:
        raise ValueError("need degree >= 1 and ttl >= 0")
    frac = Fraction(str(share_fraction)) if isinstance(share_fraction, float) else Fraction(share_fraction)
    if not 0 <= frac <= 1:
        raise ValueError("share_fraction must lie in [0, 1]")
    value = (degree**ttl * frac.numerator) // frac.denominator
    if value > cap:
        return cap, True
    return value, False


def coverage_estimate(degree: int, ttl: int, share_fraction=1.0) -> int:
    return coverage_estimate_checked(degree, ttl, share_fraction)[0]

