"""Trace-level enforcement of the five routing rules plus conservation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .trace import SimTrace, TraceRecord

REQUESTS = ("Ping", "Query", "Push")
FLOODED = ("Ping", "Query")
REPLIES = {"Pong": "Ping", "QueryHit": "Query"}


@dataclass(frozen=True)
class Violation:
    rule: str
    descriptor_id: str
    edge: tuple[int, int]
    detail: str = ""
    seq: Optional[int] = None


def _relay_of(recs, r: TraceRecord) -> Optional[TraceRecord]:
    """The delivery ``r`` continues, when ``r`` is the same descriptor one hop on."""
    if r.cause < 0:
        return None
    prev = recs[r.cause]
    return prev if (prev.mid, prev.kind) == (r.mid, r.kind) else None


def check_invariants(trace: SimTrace) -> list[Violation]:
    recs = trace.records
    out: list[Violation] = []
    first: dict = {}  # (node, mid, kind) -> seq of first delivery there
    first_hit_from: dict = {}  # (node, key) -> source of first QueryHit for that servent
    origin: dict = {}  # (mid, kind) -> originating node
    for r in recs:
        if not r.routed:
            continue
        first.setdefault((r.dst, r.mid, r.kind), r.seq)
        if r.kind == "QueryHit" and r.key is not None:
            first_hit_from.setdefault((r.dst, r.key), r.src)
        if r.kind in FLOODED and r.cause < 0:
            origin.setdefault((r.mid, r.kind), r.src)

    for r in recs:
        if not r.routed:
            continue
        edge = (r.src, r.dst)
        relay = _relay_of(recs, r)

        # rule 4: the ttl/hops ledger
        if r.born_ttl is not None and r.ttl + r.hops != r.born_ttl:
            out.append(Violation("rule4", r.mid, edge, f"ttl {r.ttl} + hops {r.hops} != {r.born_ttl}", r.seq))
        elif r.ttl < 1:
            out.append(Violation("rule4", r.mid, edge, f"delivered with ttl {r.ttl}", r.seq))
        elif relay is not None and (r.hops != relay.hops + 1 or r.ttl != relay.ttl - 1):
            out.append(Violation("rule4", r.mid, edge, "hop did not move one unit from ttl to hops", r.seq))

        if r.kind in REQUESTS and relay is not None:
            # rule 5: only the first copy of a request is passed on
            if first.get((r.src, r.mid, r.kind)) != relay.seq:
                out.append(Violation("rule5", r.mid, edge, f"forwarded duplicate delivery #{relay.seq}", r.seq))
            # rule 3: never back out of the arrival connection
            if r.kind in FLOODED and r.dst == relay.src:
                out.append(Violation("rule3", r.mid, edge, "forwarded back to arrival connection", r.seq))
            # rule 1: an originator never relays its own descriptor
            if r.kind in FLOODED and origin.get((r.mid, r.kind)) == r.src:
                out.append(Violation("rule1", r.mid, edge, "originator relayed its own descriptor", r.seq))

        # rule 2: replies retrace the request path
        if r.kind in REPLIES:
            req = first.get((r.src, r.mid, REPLIES[r.kind]))
            if req is None:
                out.append(Violation("rule2", r.mid, edge, "reply from a node that never saw the request", r.seq))
            elif recs[req].src != r.dst:
                out.append(Violation("rule2", r.mid, edge, f"reply sent to {r.dst}, request came from {recs[req].src}", r.seq))
        elif r.kind == "Push":
            want = first_hit_from.get((r.src, r.key))
            if want is not None and want != r.dst:
                out.append(Violation("rule2", r.mid, edge, f"push left via {r.dst}, query hit came from {want}", r.seq))

    # rule 1 again: a reply that reaches the originator must find the id memorized
    arrivals = {(r.dst, r.mid, r.kind, r.time): r.src for r in recs if r.kind in REPLIES}
    for d in trace.drops:
        if d.kind in REPLIES and d.reason == "no_reverse_route" and origin.get((d.mid, REPLIES[d.kind])) == d.node:
            src = arrivals.get((d.node, d.mid, d.kind, d.time), -1)
            out.append(Violation("rule1", d.mid, (src, d.node), "originator did not memorize its own descriptor id"))

    out.extend(_conservation(trace))
    return out


def _conservation(trace: SimTrace) -> list[Violation]:
    out = []
    left = {}
    for e in trace.events:
        if e["event"] in ("leave", "failure", "churn"):
            left.setdefault(e["node"], e["time"])
    for r in trace.records:
        t = left.get(r.src)
        if t is not None and r.time > t:
            out.append(Violation("conservation", r.mid, (r.src, r.dst), "delivered after its sender left", r.seq))
    queue_drops = sum(1 for d in trace.drops if d.reason == "queue_overflow")
    accounted = len(trace.records) + len(trace.lost) + queue_drops + trace.meta.get("in_flight", 0)
    if trace.sent != accounted:
        out.append(Violation("conservation", "", (-1, -1), f"{trace.sent} sent but {accounted} accounted for"))
    return out
