"""Single-threaded discrete-event loop with integer-millisecond time."""

from __future__ import annotations

import enum
import heapq
import itertools
import random
from dataclasses import dataclass, replace
from typing import Any, Optional

from .codecs import ADAPTERS, Meta
from .trace import DropRecord, SimTrace, TraceRecord

DEFAULT_LATENCY_MS = 10
MODEM_LATENCY_MS = 50


class EventKind(enum.IntEnum):
    DELIVER = 0
    TIMER_FIRE = 1
    NODE_JOIN = 2
    NODE_LEAVE = 3
    LINK_FAIL = 4


@dataclass(frozen=True)
class SimEvent:
    time_ms: int
    kind: EventKind
    payload: Any = None


@dataclass
class Envelope:
    src: int
    dst: int
    proto: str
    wire: Any
    meta: Meta
    born_ttl: Optional[int]
    cause: int
    sent_at: int
    size: int

    @property
    def payload_kind(self):
        return self.meta.payload_kind


class SimNode:
    """Base class for anything hosted by the simulator."""

    def __init__(self, node_id: int):
        self.node_id = node_id
        self.sim: Optional["Simulator"] = None
        self.alive = True

    def on_start(self) -> None:
        pass

    def on_message(self, src: int, msg, index: int) -> None:
        pass

    def on_timer(self, name: str, data) -> None:
        pass

    def on_link_down(self, peer: int) -> None:
        pass

    def on_leave(self) -> None:
        pass


@dataclass
class _LinkQueue:
    queue: Any
    active: bool = False


class Simulator:
    def __init__(self, seed: int = 0, default_latency_ms: int = DEFAULT_LATENCY_MS):
        self.now = 0
        self.rng = random.Random(seed)
        self.default_latency_ms = default_latency_ms
        self.nodes: dict[int, SimNode] = {}
        self.links: dict[int, dict[int, int]] = {}
        self.node_latency: dict[int, int] = {}
        self.trace = SimTrace()
        self.left_at: dict[int, int] = {}
        self.observers: list = []
        self._heap: list = []
        self._seq = itertools.count()
        self._mids = itertools.count()
        # per-link send queues; None disables queueing
        self.queue_factory = None
        self.service_ms = 0
        self._queues: dict[tuple[int, int], _LinkQueue] = {}

    # --- topology ---------------------------------------------------------------

    def add_node(self, node: SimNode, latency_ms: Optional[int] = None) -> None:
        node.sim = self
        self.nodes[node.node_id] = node
        self.links.setdefault(node.node_id, {})
        if latency_ms is not None:
            self.node_latency[node.node_id] = latency_ms

    def link(self, a: int, b: int, latency_ms: Optional[int] = None) -> None:
        lat = self.latency(a, b) if latency_ms is None else latency_ms
        self.links.setdefault(a, {})[b] = lat
        self.links.setdefault(b, {})[a] = lat

    def unlink(self, a: int, b: int) -> None:
        self.links.get(a, {}).pop(b, None)
        self.links.get(b, {}).pop(a, None)

    def neighbors(self, node: int) -> list[int]:
        return sorted(self.links.get(node, {}))

    def latency(self, a: int, b: int) -> int:
        lat = self.links.get(a, {}).get(b)
        if lat is not None:
            return lat
        return max(self.node_latency.get(a, self.default_latency_ms), self.node_latency.get(b, self.default_latency_ms))

    def is_alive(self, node: int) -> bool:
        n = self.nodes.get(node)
        return n is not None and n.alive

    def alive_nodes(self) -> list[int]:
        return sorted(i for i, n in self.nodes.items() if n.alive)

    # --- scheduling -------------------------------------------------------------

    def schedule(self, time_ms: int, kind: EventKind, payload=None) -> None:
        if time_ms < self.now:
            raise ValueError("cannot schedule in the past")
        heapq.heappush(self._heap, (int(time_ms), next(self._seq), SimEvent(int(time_ms), kind, payload)))

    def set_timer(self, node: int, delay_ms: int, name: str, data=None) -> None:
        self.schedule(self.now + max(0, int(delay_ms)), EventKind.TIMER_FIRE, (node, name, data))

    def send(self, src: int, dst: int, msg, proto: str, cause: int = -1) -> None:
        adapter = ADAPTERS[proto]
        meta = adapter.meta(msg)
        if meta.mid is None:
            meta = replace(meta, mid=f"{proto[0]}{next(self._mids)}")
        born = None
        if meta.ttl is not None:
            born = meta.ttl + meta.hops
            if cause >= 0:
                prev = self.trace.records[cause]
                if (prev.mid, prev.kind) == (meta.mid, meta.kind) and prev.born_ttl is not None:
                    born = prev.born_ttl
        wire = adapter.encode(msg)
        size = len(wire) if isinstance(wire, (bytes, bytearray)) else 0
        env = Envelope(src, dst, proto, wire, meta, born, cause, self.now, size)
        self.trace.sent += 1
        if self.queue_factory is not None and meta.payload_kind is not None:
            self._enqueue(env)
        else:
            self.schedule(self.now + self.latency(src, dst), EventKind.DELIVER, env)

    def _enqueue(self, env: Envelope) -> None:
        key = (env.src, env.dst)
        lq = self._queues.get(key)
        if lq is None:
            lq = self._queues[key] = _LinkQueue(self.queue_factory())
        evicted = lq.queue.offer(env)
        if evicted is not None:
            queued = tuple(sorted(e.meta.kind for e in lq.queue.items))
            m = evicted.meta
            self.trace.drops.append(DropRecord(self.now, env.src, m.kind, m.mid, "queue_overflow", queued))
        if not lq.active:
            self._service(key)

    def _service(self, key) -> None:
        lq = self._queues[key]
        if not lq.queue.items:
            lq.active = False
            return
        lq.active = True
        env = lq.queue.pop()
        depart = self.now + self.service_ms
        self.schedule(depart + self.latency(env.src, env.dst), EventKind.DELIVER, env)
        self.schedule(depart, EventKind.TIMER_FIRE, (None, "_service", key))

    # --- lifecycle ----------------------------------------------------------------

    def kill(self, node: int, reason: str = "leave") -> None:
        n = self.nodes.get(node)
        if n is None or not n.alive:
            return
        n.alive = False
        self.left_at[node] = self.now
        self.trace.events.append({"time": self.now, "event": reason, "node": node})
        n.on_leave()
        for peer in list(self.links.get(node, {})):
            self.unlink(node, peer)
            if self.is_alive(peer):
                self.nodes[peer].on_link_down(node)
        for obs in self.observers:
            obs(node)

    def fail_link(self, a: int, b: int) -> None:
        if b not in self.links.get(a, {}):
            return
        self.unlink(a, b)
        self.trace.events.append({"time": self.now, "event": "link_fail", "node": a, "peer": b})
        for x, y in ((a, b), (b, a)):
            if self.is_alive(x):
                self.nodes[x].on_link_down(y)

    def run(self, t_end: int) -> SimTrace:
        for nid in sorted(self.nodes):
            if self.nodes[nid].alive:
                self.nodes[nid].on_start()
        while self._heap and self._heap[0][0] <= t_end:
            time, _, ev = heapq.heappop(self._heap)
            self.now = time
            self._dispatch(ev)
        self.now = max(self.now, t_end)
        pending = sum(1 for _, _, ev in self._heap if ev.kind == EventKind.DELIVER)
        pending += sum(len(lq.queue) for lq in self._queues.values())
        self.trace.meta["in_flight"] = pending
        return self.trace

    def _dispatch(self, ev: SimEvent) -> None:
        # NODE_LEAVE payload: a node id, a list of ids, or a callable choosing
        # them at fire time, optionally paired with a reason string
        # NODE_JOIN payload: callable(sim) -> (node, latency_ms)
        if ev.kind == EventKind.DELIVER:
            self._deliver(ev.payload)
        elif ev.kind == EventKind.TIMER_FIRE:
            node, name, data = ev.payload
            if node is None:
                self._service(data)
            elif self.is_alive(node):
                self.nodes[node].on_timer(name, data)
        elif ev.kind == EventKind.NODE_LEAVE:
            target, reason = ev.payload if isinstance(ev.payload, tuple) else (ev.payload, "leave")
            if callable(target):
                target = target(self)
            for node in [target] if isinstance(target, int) else list(target or ()):
                self.kill(node, reason)
        elif ev.kind == EventKind.NODE_JOIN:
            node, latency = ev.payload(self)
            self.add_node(node, latency)
            self.trace.events.append({"time": self.now, "event": "join", "node": node.node_id})
            node.on_start()
        elif ev.kind == EventKind.LINK_FAIL:
            a, b = ev.payload
            self.fail_link(a, b)

    def _deliver(self, env: Envelope) -> None:
        src_gone = env.src in self.left_at
        if src_gone or not self.is_alive(env.dst):
            self.trace.lost.append({
                "time": self.now, "src": env.src, "dst": env.dst, "kind": env.meta.kind, "mid": env.meta.mid,
                "why": "sender_left" if src_gone else "receiver_down",
            })
            return
        msg = ADAPTERS[env.proto].decode(env.wire)
        m = env.meta
        rec = TraceRecord(
            seq=len(self.trace.records), time=self.now, src=env.src, dst=env.dst, proto=env.proto,
            kind=m.kind, mid=m.mid, ttl=m.ttl, hops=m.hops, born_ttl=env.born_ttl, cause=env.cause,
            key=m.key, size=env.size, sent_at=env.sent_at,
        )
        index = self.trace.append(rec)
        self.nodes[env.dst].on_message(env.src, msg, index)

