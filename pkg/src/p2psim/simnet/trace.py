"""Append-only record of a simulation run."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Optional


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    time: int
    src: int
    dst: int
    proto: str
    kind: str
    mid: str
    ttl: Optional[int] = None
    hops: Optional[int] = None
    born_ttl: Optional[int] = None
    cause: int = -1
    key: Optional[str] = None
    size: int = 0
    sent_at: int = 0

    @property
    def routed(self) -> bool:
        return self.ttl is not None


@dataclass
class QueryRecord:
    qid: str
    proto: str
    origin: int
    issued_at: int
    criteria: str
    holders: tuple = ()
    examined: set = field(default_factory=set)
    hits: list = field(default_factory=list)  # (time, responder, reply path)

    @property
    def success(self) -> bool:
        return bool(self.hits)

    @property
    def first_hit_at(self) -> Optional[int]:
        return min((t for t, _, _ in self.hits), default=None)

    @property
    def reached(self) -> int:
        return len(self.examined - {self.origin})


@dataclass(frozen=True)
class DropRecord:
    time: int
    node: int
    kind: str
    mid: str
    reason: str
    queued: tuple = ()


@dataclass(frozen=True)
class TransferRecord:
    start: int
    end: int
    uploader: int
    downloader: int
    filename: str
    size: int
    opened_by: int
    via: str


@dataclass
class SimTrace:
    records: list[TraceRecord] = field(default_factory=list)
    queries: dict[str, QueryRecord] = field(default_factory=dict)
    drops: list[DropRecord] = field(default_factory=list)
    lost: list[dict] = field(default_factory=list)
    transfers: list[TransferRecord] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    snapshots: list[dict] = field(default_factory=list)
    orphans: dict = field(default_factory=lambda: {"reassigned": 0, "unattached": 0})
    sent: int = 0
    counters: Counter = field(default_factory=Counter)
    meta: dict = field(default_factory=dict)

    def append(self, rec: TraceRecord) -> int:
        self.records.append(rec)
        self.counters[rec.kind] += 1
        return len(self.records) - 1

    def query_issued(self, q: QueryRecord) -> None:
        self.queries[q.qid] = q

    def examined(self, qid: str, nodes) -> None:
        q = self.queries.get(qid)
        if q is not None:
            q.examined.update(nodes)

    def hit(self, qid: str, time: int, responder, path=()) -> None:
        q = self.queries.get(qid)
        if q is not None:
            q.hits.append((time, responder, tuple(path)))

    def path_to(self, index: int) -> list[tuple[int, int]]:
        """Edges walked by one descriptor up to and including ``records[index]``."""
        edges = []
        rec = self.records[index]
        while True:
            edges.append((rec.src, rec.dst))
            if rec.cause < 0:
                break
            prev = self.records[rec.cause]
            if (prev.mid, prev.kind) != (rec.mid, rec.kind):
                break
            rec = prev
        edges.reverse()
        return edges

    # --- export ---------------------------------------------------------------

    def iter_lines(self):
        dump = lambda obj: json.dumps(obj, sort_keys=True, separators=(",", ":"))  # noqa: E731
        yield dump({"type": "meta", **self.meta})
        for r in self.records:
            yield dump({"type": "msg", **asdict(r)})
        for d in self.drops:
            yield dump({"type": "drop", **asdict(d)})
        for x in self.lost:
            yield dump({"type": "lost", **x})
        for t in self.transfers:
            yield dump({"type": "transfer", **asdict(t)})
        for e in self.events:
            yield dump({"type": "event", **e})
        for s in self.snapshots:
            yield dump({"type": "snapshot", **s})
        for q in self.queries.values():
            yield dump({
                "type": "query", "qid": q.qid, "proto": q.proto, "origin": q.origin,
                "issued_at": q.issued_at, "criteria": q.criteria, "holders": list(q.holders),
                "examined": sorted(q.examined), "hits": [[t, r, [list(e) for e in p]] for t, r, p in q.hits],
            })
        yield dump({"type": "orphans", **self.orphans})

    def to_jsonl(self) -> str:
        return "\n".join(self.iter_lines()) + "\n"

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for line in self.iter_lines():
                fh.write(line + "\n")
