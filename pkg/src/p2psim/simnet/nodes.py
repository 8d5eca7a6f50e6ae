"""Protocol state machines hosted by the simulator."""

from __future__ import annotations

import hashlib
import ipaddress
from dataclasses import dataclass, field
from typing import Optional

from .. import wire_openft as ow
from ..napster import ServerState, server_handle
from ..servent import (
    ACCEPT_RESPONSE,
    DropReason,
    ServentConfig,
    ServentState,
    Verb,
    connect_line,
    handle_descriptor,
    handshake,
    initiate_push,
    name_matches,
    new_id,
    originate_ping,
    originate_query,
    push_first_hop,
)
from ..superpeer import (
    CapacityError,
    RegistryOp,
    SuperNodeState,
    UnknownChild,
    _SuperRouter,
    failover_reassign,
    registry_update,
    route_query,
)
from ..wire_gnutella import Descriptor, PayloadKind, QueryPayload
from ..wire_napster import (
    DownloadRequest,
    Function,
    LoginInfo,
    NapsterMessage,
    SearchQuery,
    SharedFileRecord,
    TransferNotice,
)
from .config import ProtocolConfig, QuerySpec
from .engine import SimNode, Simulator
from .topology import Topology
from .trace import DropRecord, QueryRecord, TransferRecord
from .workload import Workload

GNUTELLA_PORT = 6346
NAPSTER_PORT = 6699
OPENFT_PORT = 1215


def ip_of(node_id: int) -> str:
    return f"10.{(node_id >> 16) & 255}.{(node_id >> 8) & 255}.{node_id & 255}"


def node_of_ip(ip: str) -> int:
    _, b, c, d = (int(x) for x in ip.split("."))
    return (b << 16) | (c << 8) | d


def ip_int(ip: str) -> int:
    return int(ipaddress.IPv4Address(ip))


def servent_id_for(ip: str, port: int) -> bytes:
    return hashlib.md5(f"{ip}:{port}".encode()).digest()


def nick_of(node_id: int) -> str:
    return f"user{node_id}"


def node_of_nick(nick: str) -> int:
    return int(nick[4:])


@dataclass
class Context:
    """Everything the nodes of one run share: configuration and bookkeeping."""

    protocol: ProtocolConfig
    topology: Topology
    workload: Workload
    sim: Simulator
    # origin -> [(qid, criteria)], most recent last; used only for trace attribution
    open_queries: dict = field(default_factory=dict)

    @property
    def trace(self):
        return self.sim.trace

    def role(self, node: int) -> str:
        if node < len(self.topology.nodes):
            return self.topology.nodes[node].role
        return getattr(self.sim.nodes.get(node), "role", "peer")

    def record_query(self, qid: str, proto: str, origin: int, q: QuerySpec) -> None:
        holders = tuple(
            n for n, recs in sorted(self.workload.shares.items())
            if self.sim.is_alive(n) and any(r.filename == q.filename for r in recs)
        )
        self.trace.query_issued(QueryRecord(qid, proto, origin, self.sim.now, q.criteria, holders))
        self.open_queries.setdefault(origin, []).append((qid, q.criteria))

    def match_query(self, origin: int, filename: str) -> Optional[str]:
        for qid, criteria in reversed(self.open_queries.get(origin, [])):
            if name_matches(criteria, filename):
                return qid
        return None

    def latest_query(self, origin: int) -> Optional[str]:
        entries = self.open_queries.get(origin)
        return entries[-1][0] if entries else None

    def transfer_delay(self, size: int) -> int:
        return max(1, size * 8 // self.protocol.bandwidth_kbps)

    def drop(self, node: int, kind: str, mid: str, reason: str) -> None:
        self.trace.drops.append(DropRecord(self.sim.now, node, kind, mid, reason))


def _is_duplicate(actions) -> bool:
    return len(actions) == 1 and actions[0].verb == Verb.DROP and actions[0].drop_reason == DropReason.DUPLICATE


KIND_NAME = {
    PayloadKind.PING: "Ping", PayloadKind.PONG: "Pong", PayloadKind.QUERY: "Query",
    PayloadKind.QUERY_HIT: "QueryHit", PayloadKind.PUSH: "Push",
}


# --- Gnutella ----------------------------------------------------------------------


class GnutellaNode(SimNode):
    def __init__(self, node_id: int, ctx: Context, shares=(), firewalled: bool = False, bootstrap=()):
        super().__init__(node_id)
        self.ctx = ctx
        p = ctx.protocol
        cfg = ServentConfig(
            initial_ttl=p.ttl, max_neighbors=p.max_neighbors, ping_period_ms=p.ping_period_ms,
            ping_threshold=None if p.ping_mode == "periodic" else p.ping_threshold,
            pong_caching=p.pong_caching, speed=p.speed, fault=p.fault,
        )
        ip = ip_of(node_id)
        self.state = ServentState(servent_id_for(ip, GNUTELLA_PORT), ip, GNUTELLA_PORT, cfg, local_index=list(shares))
        self.firewalled = firewalled
        self.bootstrap = list(bootstrap)
        self.downloading: set[str] = set()

    def on_start(self) -> None:
        sim = self.sim
        self.state.neighbors.update(sim.neighbors(self.node_id))
        for peer in self.bootstrap:
            if sim.is_alive(peer):
                sim.link(self.node_id, peer)
                sim.send(self.node_id, peer, connect_line(), "handshake")
        if self.ctx.protocol.ping_mode != "off":
            period = self.ctx.protocol.ping_period_ms
            sim.set_timer(self.node_id, sim.rng.randrange(period), "ping")

    def on_timer(self, name: str, data) -> None:
        if name == "ping":
            p = self.ctx.protocol
            if p.ping_mode == "periodic" or len(self.state.neighbors) <= p.ping_threshold:
                self._flood(originate_ping(self.state, self.sim.rng))
            self.sim.set_timer(self.node_id, p.ping_period_ms, "ping")
        elif name == "query":
            desc = originate_query(self.state, data.criteria, rng=self.sim.rng)
            self.ctx.record_query(desc.descriptor_id.hex(), "gnutella", self.node_id, data)
            self._flood(desc)

    def _flood(self, desc: Descriptor) -> None:
        for peer in sorted(self.state.neighbors):
            self.sim.send(self.node_id, peer, desc, "gnutella")

    def on_link_down(self, peer: int) -> None:
        self.state.neighbors.discard(peer)

    def on_message(self, src: int, msg, index: int) -> None:
        if isinstance(msg, str):
            self._on_handshake(src, msg)
            return
        sim, ctx = self.sim, self.ctx
        actions = handle_descriptor(self.state, src, msg)
        mid = msg.descriptor_id.hex()
        if _is_duplicate(actions):
            ctx.trace.counters["drop:duplicate"] += 1
            return
        if msg.kind == PayloadKind.QUERY:
            ctx.trace.examined(mid, [self.node_id])
        for a in actions:
            if a.verb in (Verb.FORWARD, Verb.REPLY_BACK):
                if a.target in sim.links.get(self.node_id, {}):
                    sim.send(self.node_id, a.target, a.descriptor, "gnutella", cause=index)
                else:
                    ctx.drop(self.node_id, KIND_NAME[a.descriptor.kind], mid, "link_down")
            elif a.verb == Verb.DELIVER:
                self._deliver_local(a.descriptor, index)
            else:
                ctx.drop(self.node_id, KIND_NAME[a.descriptor.kind], mid, a.drop_reason.value)

    def _deliver_local(self, desc: Descriptor, index: int) -> None:
        sim, ctx = self.sim, self.ctx
        if desc.kind == PayloadKind.QUERY_HIT:
            qid = desc.descriptor_id.hex()
            hit = desc.payload
            responder = node_of_ip(hit.ip)
            ctx.trace.hit(qid, sim.now, responder, sim.trace.path_to(index))
            if ctx.workload.cfg.download and qid not in self.downloading and hit.results:
                self.downloading.add(qid)
                self._download(hit, responder)
        elif desc.kind == PayloadKind.PUSH:
            push = desc.payload
            rec = next((r for i, r in enumerate(self.state.local_index) if i == push.file_index), None)
            if rec is not None:
                delay = ctx.transfer_delay(rec.size_bytes)
                ctx.trace.transfers.append(TransferRecord(
                    sim.now, sim.now + delay, self.node_id, node_of_ip(push.ip), rec.filename,
                    rec.size_bytes, self.node_id, "push",
                ))

    def _download(self, hit, responder: int) -> None:
        sim, ctx = self.sim, self.ctx
        first = hit.results[0]
        if responder in ctx.workload.firewalled:
            push = initiate_push(self.state, hit, first.file_index, sim.rng)
            hop = push_first_hop(self.state, push)
            if hop is None:
                ctx.drop(self.node_id, "Push", push.descriptor_id.hex(), "no_push_route")
            else:
                sim.send(self.node_id, hop, push, "gnutella")
            return
        delay = ctx.transfer_delay(first.file_size)
        ctx.trace.transfers.append(TransferRecord(
            sim.now, sim.now + delay, responder, self.node_id, first.file_name, first.file_size, self.node_id, "direct",
        ))

    def _on_handshake(self, src: int, line: str) -> None:
        if line.startswith("GNUTELLA CONNECT"):
            free = self.state.config.max_neighbors - len(self.state.neighbors)
            result = handshake(line, free)
            self.sim.send(self.node_id, src, result.response, "handshake")
            if result.accepted:
                self.state.neighbors.add(src)
            else:
                self.sim.unlink(self.node_id, src)
        elif line == ACCEPT_RESPONSE:
            self.state.neighbors.add(src)
        else:
            self.sim.unlink(self.node_id, src)


# --- Napster -----------------------------------------------------------------------


@dataclass(frozen=True)
class TransferOpen:
    """Out-of-band notice that an uploader opened a data connection (firewalled flow)."""

    uploader: str
    filename: str
    size: int


class NapsterServerNode(SimNode):
    role = "server"

    def __init__(self, node_id: int, ctx: Context):
        super().__init__(node_id)
        self.ctx = ctx
        self.state = ServerState()

    def on_message(self, src: int, msg: NapsterMessage, index: int) -> None:
        if msg.function == Function.SEARCH:
            qid = self.ctx.latest_query(src)
            if qid is not None:
                online = [node_of_nick(n) for n in self.state.sessions.values()]
                self.ctx.trace.examined(qid, [self.node_id, *online])
        for conn, reply in server_handle(self.state, src, msg, peer_ip=ip_int(ip_of(src))):
            self.sim.send(self.node_id, conn, reply, "napster", cause=index)

    def on_link_down(self, peer: int) -> None:
        self.state.logoff(peer)


class NapsterClientNode(SimNode):
    role = "client"

    def __init__(self, node_id: int, ctx: Context, shares=(), firewalled: bool = False):
        super().__init__(node_id)
        self.ctx = ctx
        self.nick = nick_of(node_id)
        self.shares = list(shares)
        self.firewalled = firewalled
        self.server: Optional[int] = None
        self.pending: dict = {}  # (uploader nick, filename) -> qid
        self.downloading: set[str] = set()

    def _send(self, function: Function, body, dst: Optional[int] = None) -> None:
        dst = self.server if dst is None else dst
        if dst is not None:
            self.sim.send(self.node_id, dst, NapsterMessage.of(function, body), "napster")

    def on_start(self) -> None:
        servers = [n for n in self.sim.neighbors(self.node_id) if self.ctx.role(n) == "server"]
        if not servers:
            return
        self.server = servers[0]
        link = 4 if self.sim.latency(self.node_id, self.server) > 10 else 8
        port = 0 if self.firewalled else NAPSTER_PORT
        self._send(Function.LOGIN, LoginInfo(self.nick, "secret", port, "p2psim 0.1", link))

    def on_timer(self, name: str, data) -> None:
        if name == "query":
            qid = f"n{self.node_id}.{len(self.ctx.open_queries.get(self.node_id, []))}"
            self.ctx.record_query(qid, "napster", self.node_id, data)
            self._send(Function.SEARCH, SearchQuery(title=data.criteria))
        elif name == "complete":
            self._send(Function.DOWNLOAD_COMPLETE, TransferNotice(*data))

    def on_message(self, src: int, msg, index: int) -> None:
        ctx, sim = self.ctx, self.sim
        if isinstance(msg, TransferOpen):
            self._start_transfer(msg.uploader, msg.filename, msg.size, opened_by=node_of_nick(msg.uploader), via="firewalled")
            return
        fn, body = msg.function, msg.body()
        if fn == Function.LOGIN_ACK:
            for rec in self.shares:
                self._send(Function.SHARE, rec)
        elif fn == Function.SEARCH_RESPONSE:
            qid = ctx.match_query(self.node_id, body.record.filename)
            if qid is None:
                return
            ctx.trace.hit(qid, sim.now, node_of_nick(body.nick), sim.trace.path_to(index))
            if ctx.workload.cfg.download and qid not in self.downloading:
                self.downloading.add(qid)
                self.pending[(body.nick, body.record.filename)] = qid
                self._send(Function.DOWNLOAD_REQUEST, DownloadRequest(body.nick, body.record.filename))
        elif fn == Function.ERROR:
            text = body.text
            for nick, filename in list(self.pending):
                if nick in text and "firewalled" in text:
                    self._send(Function.ALT_DOWNLOAD_REQUEST, DownloadRequest(nick, filename))
        elif fn == Function.DOWNLOAD_ACK:
            self.pending.pop((body.nick, body.filename), None)
            rec = next((r for recs in [ctx.workload.shares.get(node_of_nick(body.nick), [])] for r in recs
                        if r.filename == body.filename), None)
            size = rec.size_bytes if rec else 0
            self._start_transfer(body.nick, body.filename, size, opened_by=self.node_id, via="direct")
        elif fn == Function.ALT_DOWNLOAD_ACK:
            # we are the firewalled uploader; open the connection ourselves
            rec = next((r for r in self.shares if r.filename == body.filename), None)
            if rec is not None:
                sim.send(self.node_id, node_of_nick(body.nick), TransferOpen(self.nick, rec.filename, rec.size_bytes), "control")

    def _start_transfer(self, uploader: str, filename: str, size: int, opened_by: int, via: str) -> None:
        ctx, sim = self.ctx, self.sim
        self.pending.pop((uploader, filename), None)
        delay = ctx.transfer_delay(size)
        ctx.trace.transfers.append(TransferRecord(
            sim.now, sim.now + delay, node_of_nick(uploader), self.node_id, filename, size, opened_by, via,
        ))
        self._send(Function.DOWNLOADING_FILE, TransferNotice(uploader, filename))
        sim.set_timer(self.node_id, delay, "complete", (uploader, filename))

    def on_link_down(self, peer: int) -> None:
        if peer == self.server:
            self.server = None


# --- super-peer overlay ---------------------------------------------------------------


@dataclass(frozen=True)
class Register:
    """FastTrack-style registration of a child's address and share list."""

    ip: str
    port: int
    records: tuple[SharedFileRecord, ...] = ()


@dataclass(frozen=True)
class RegisterAck:
    accepted: bool


@dataclass(frozen=True)
class Reassign:
    """Bootstrap node telling an orphaned child where to re-register."""

    parent: int


class SuperNode(SimNode):
    role = "super"

    def __init__(self, node_id: int, ctx: Context, index_node: Optional[int] = None):
        super().__init__(node_id)
        self.ctx = ctx
        self.proto = "openft" if ctx.protocol.protocol == "superpeer-openft" else "ft"
        ip = ip_of(node_id)
        cfg = ServentConfig(initial_ttl=ctx.protocol.ttl, ping_threshold=None, fault=ctx.protocol.fault)
        router = _SuperRouter(servent_id=servent_id_for(ip, OPENFT_PORT), ip=ip, port=OPENFT_PORT, config=cfg)
        self.state = SuperNodeState(node_id, ctx.protocol.super_capacity, router=router)
        self.index_node = index_node
        self.infos: dict[int, ow.NodeInfo] = {}

    def on_start(self) -> None:
        self.state.router.neighbors.update(
            n for n in self.sim.neighbors(self.node_id) if self.ctx.role(n) == "super"
        )
        if self.index_node is not None and self.ctx.protocol.index_period_ms > 0:
            self.sim.set_timer(self.node_id, self.ctx.protocol.index_period_ms, "stats")

    def on_timer(self, name: str, data) -> None:
        if name == "stats":
            shares = sum(len(v) for v in self.state.children.values())
            kv = ow.KeyValues((("users", str(self.state.load)), ("shares", str(shares))))
            self.sim.send(self.node_id, self.index_node, ow.OpenFTPacket(ow.PacketKind.STATS, kv), "openft")
            self.sim.set_timer(self.node_id, self.ctx.protocol.index_period_ms, "stats")

    def _child_info(self, ip: str, port: int) -> dict:
        return {"ip": ip, "port": port, "servent_id": servent_id_for(ip, port), "speed": self.ctx.protocol.speed}

    def on_message(self, src: int, msg, index: int) -> None:
        if isinstance(msg, Descriptor):
            self._route(src, msg, index)
        elif isinstance(msg, Register):
            try:
                self.state.accept_child(src, msg.records, **self._child_info(msg.ip, msg.port))
                ok = True
            except CapacityError:
                ok = False
            self.sim.send(self.node_id, src, RegisterAck(ok), "ft", cause=index)
        elif isinstance(msg, ow.OpenFTPacket):
            self._openft(src, msg, index)

    def _openft(self, src: int, pkt: ow.OpenFTPacket, index: int) -> None:
        kind = pkt.kind
        if kind == ow.PacketKind.NODEINFO:
            self.infos[src] = pkt.payload
        elif kind == ow.PacketKind.CHILD:
            info = self.infos.get(src)
            ip, port = (info.ip, info.port) if info else (ip_of(src), OPENFT_PORT)
            try:
                self.state.accept_child(src, self.state.children.get(src, ()), **self._child_info(ip, port))
                status = ow.ChildStatus.ACCEPT
            except CapacityError:
                status = ow.ChildStatus.REJECT
            answer = ow.ChildPayload(self.state.router.ip, OPENFT_PORT, status)
            self.sim.send(self.node_id, src, ow.OpenFTPacket(ow.PacketKind.CHILD, answer, ow.FLAG_RESPONSE), "openft", cause=index)
        elif kind in (ow.PacketKind.ADDSHARE, ow.PacketKind.REMSHARE, ow.PacketKind.MODSHARE):
            op = {ow.PacketKind.ADDSHARE: RegistryOp.ADD, ow.PacketKind.REMSHARE: RegistryOp.REM}.get(kind, RegistryOp.MOD)
            try:
                registry_update(self.state, src, op, [pkt.payload.record])
            except UnknownChild:
                self.ctx.drop(self.node_id, kind.name.lower(), "", "unknown_child")

    def _route(self, src: int, desc: Descriptor, index: int) -> None:
        sim, ctx = self.sim, self.ctx
        actions = route_query(self.state, src, desc)
        mid = desc.descriptor_id.hex()
        if _is_duplicate(actions):
            ctx.trace.counters["drop:duplicate"] += 1
            return
        if desc.kind == PayloadKind.QUERY:
            ctx.trace.examined(mid, self.state.examined_nodes())
        for a in actions:
            if a.verb in (Verb.FORWARD, Verb.REPLY_BACK) and a.target in sim.links.get(self.node_id, {}):
                sim.send(self.node_id, a.target, a.descriptor, self.proto, cause=index)
            elif a.verb == Verb.DROP:
                ctx.drop(self.node_id, KIND_NAME[a.descriptor.kind], mid, a.drop_reason.value)
            elif a.verb != Verb.DELIVER:
                ctx.drop(self.node_id, KIND_NAME[a.descriptor.kind], mid, "link_down")

    def on_link_down(self, peer: int) -> None:
        if peer in self.state.children:
            self.state.drop_child(peer)
        self.state.router.neighbors.discard(peer)


class ChildNode(SimNode):
    role = "child"

    def __init__(self, node_id: int, ctx: Context, shares=()):
        super().__init__(node_id)
        self.ctx = ctx
        self.proto = "openft" if ctx.protocol.protocol == "superpeer-openft" else "ft"
        self.shares = list(shares)
        self.parents: set[int] = set()
        self.ip = ip_of(node_id)

    def on_start(self) -> None:
        for p in self.sim.neighbors(self.node_id):
            if self.ctx.role(p) == "super":
                self._register(p)

    def _register(self, parent: int) -> None:
        send = self.sim.send
        if self.proto == "ft":
            send(self.node_id, parent, Register(self.ip, OPENFT_PORT, tuple(self.shares)), "ft")
            return
        info = ow.NodeInfo(self.ip, OPENFT_PORT, OPENFT_PORT + 1, ow.NodeClass.USER)
        send(self.node_id, parent, ow.OpenFTPacket(ow.PacketKind.NODEINFO, info), "openft")
        send(self.node_id, parent, ow.OpenFTPacket(ow.PacketKind.CHILD, ow.ChildPayload(ip_of(parent), OPENFT_PORT)), "openft")
        for rec in self.shares:
            send(self.node_id, parent, ow.OpenFTPacket(ow.PacketKind.ADDSHARE, ow.ShareRecord(rec)), "openft")

    def on_timer(self, name: str, data) -> None:
        if name != "query":
            return
        desc = Descriptor.build(new_id(self.sim.rng), QueryPayload(0, data.criteria), ttl=self.ctx.protocol.ttl)
        self.ctx.record_query(desc.descriptor_id.hex(), self.ctx.protocol.protocol, self.node_id, data)
        for p in sorted(self.parents):
            self.sim.send(self.node_id, p, desc, self.proto)

    def on_message(self, src: int, msg, index: int) -> None:
        if isinstance(msg, RegisterAck):
            if msg.accepted:
                self.parents.add(src)
        elif isinstance(msg, ow.OpenFTPacket):
            if msg.kind == ow.PacketKind.CHILD and msg.payload.status == ow.ChildStatus.ACCEPT:
                self.parents.add(src)
        elif isinstance(msg, Reassign):
            self.sim.link(self.node_id, msg.parent)
            self._register(msg.parent)
        elif isinstance(msg, Descriptor) and msg.kind == PayloadKind.QUERY_HIT:
            self.ctx.trace.hit(msg.descriptor_id.hex(), self.sim.now, node_of_ip(msg.payload.ip), self.sim.trace.path_to(index))

    def on_link_down(self, peer: int) -> None:
        self.parents.discard(peer)


class BootstrapNode(SimNode):
    """Always-on node that re-homes the children of a failed super node."""

    role = "bootstrap"

    def __init__(self, node_id: int, ctx: Context):
        super().__init__(node_id)
        self.ctx = ctx

    def supers(self) -> list[SuperNode]:
        return [n for _, n in sorted(self.sim.nodes.items()) if isinstance(n, SuperNode)]

    def observe(self, failed: int) -> None:
        sim = self.sim
        dead = sim.nodes.get(failed)
        if not isinstance(dead, SuperNode):
            return
        live = [s for s in self.supers() if s.alive]
        parents: dict = {}
        for s in live:
            for child in s.state.children:
                parents.setdefault(child, set()).add(s.node_id)
        orphans = {
            c: (recs, dead.state.child_info.get(c, {}))
            for c, recs in sorted(dead.state.children.items()) if sim.is_alive(c)
        }
        result = failover_reassign([s.state for s in live], failed, orphans, parents)
        self.ctx.trace.orphans["reassigned"] += len(result.assignments)
        self.ctx.trace.orphans["unattached"] += len(result.unattached)
        self.ctx.trace.events.append({
            "time": sim.now, "event": "failover", "node": failed,
            "reassigned": len(result.assignments), "unattached": len(result.unattached),
        })
        for child, parent in sorted(result.assignments.items()):
            sim.send(self.node_id, child, Reassign(parent), "control")


class IndexNode(SimNode):
    """Third-tier node collecting statistics from search nodes."""

    role = "index"

    def __init__(self, node_id: int, ctx: Context):
        super().__init__(node_id)
        self.ctx = ctx

    def on_message(self, src: int, msg, index: int) -> None:
        if isinstance(msg, ow.OpenFTPacket) and msg.kind == ow.PacketKind.STATS:
            snap = {"time": self.sim.now, "node": src, **{k: int(v) for k, v in msg.payload.items}}
            self.ctx.trace.snapshots.append(snap)
