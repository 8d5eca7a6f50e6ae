"""Shared files, query schedules and churn for a scenario."""

from __future__ import annotations

import functools
import random
from dataclasses import dataclass, field
from typing import Iterator

from ..napster import make_record
from ..wire_napster import SharedFileRecord
from .config import QuerySpec, WorkloadConfig
from .engine import EventKind, SimEvent
from .topology import Topology

SHARING_ROLES = ("peer", "client", "child", "node", "root")
ARTISTS = 50


def catalog_name(i: int) -> str:
    return f"artist{i % ARTISTS:03d} - title{i:04d}.mp3"


def file_size(filename: str, cfg: WorkloadConfig) -> int:
    rng = random.Random(f"size:{filename}")
    return rng.randint(cfg.min_file_size, cfg.max_file_size)


def record_for(filename: str, cfg: WorkloadConfig) -> SharedFileRecord:
    return _record(filename, file_size(filename, cfg))


@functools.lru_cache(maxsize=4096)
def _record(filename: str, size: int) -> SharedFileRecord:
    return make_record(filename, size)


@dataclass
class Workload:
    cfg: WorkloadConfig
    shares: dict[int, list[SharedFileRecord]] = field(default_factory=dict)
    queries: list[QuerySpec] = field(default_factory=list)
    firewalled: set[int] = field(default_factory=set)

    def holders(self, filename: str) -> list[int]:
        return sorted(n for n, recs in self.shares.items() if any(r.filename == filename for r in recs))

    def random_shares(self, rng: random.Random) -> list[SharedFileRecord]:
        if rng.random() >= self.cfg.share_fraction:
            return []
        k = min(self.cfg.files_per_node, self.cfg.catalog_size)
        picks = sorted(rng.sample(range(self.cfg.catalog_size), k))
        return [record_for(catalog_name(i), self.cfg) for i in picks]


def sharing_nodes(topo: Topology) -> list[int]:
    return [n.node_id for n in topo.nodes if n.role in SHARING_ROLES]


def generate_workload(cfg: WorkloadConfig, topo: Topology, seed: int) -> Workload:
    """Assign shares, firewall flags and a query schedule.

    A ``share_fraction`` below one leaves the remaining peers as free riders
    with nothing to share. Explicit placements are added on top.
    """
    rng = random.Random(f"{seed}:workload")
    wl = Workload(cfg)
    peers = sharing_nodes(topo)
    for n in peers:
        wl.shares[n] = wl.random_shares(rng)
    for node, filename in cfg.placements:
        wl.shares.setdefault(int(node), []).append(record_for(filename, cfg))
    wl.firewalled = {n for n in peers if rng.random() < cfg.firewalled_fraction}

    if cfg.queries:
        wl.queries = sorted(cfg.queries, key=lambda q: (q.time_ms, q.origin))
        return wl
    held: dict[str, set[int]] = {}
    for n, recs in wl.shares.items():
        for r in recs:
            held.setdefault(r.filename, set()).add(n)
    shared = sorted(held)
    if not shared or not peers:
        return wl
    for i in range(cfg.n_queries):
        origin = rng.choice(peers)
        # prefer files held elsewhere so a hit means the network found it
        remote = [f for f in shared if held[f] - {origin}] or shared
        wl.queries.append(QuerySpec(cfg.query_start_ms + i * cfg.query_interval_ms, origin, rng.choice(remote)))
    return wl


def churn_process(
    rate_join: float,
    rate_leave: float,
    seed: int,
    t_end: int,
    start_ms: int = 0,
) -> Iterator[SimEvent]:
    """Poisson joins and leaves (rates per second), merged in time order.

    Payloads are left empty; the scenario decides who joins or leaves when
    the event fires.
    """
    if rate_join < 0 or rate_leave < 0:
        raise ValueError("churn rates must be non-negative")
    streams = []
    for kind, rate in ((EventKind.NODE_JOIN, rate_join), (EventKind.NODE_LEAVE, rate_leave)):
        if rate <= 0:
            continue
        rng = random.Random(f"{seed}:churn:{kind.name}")
        t = float(start_ms)
        times = []
        while True:
            t += rng.expovariate(rate) * 1000.0
            if t > t_end:
                break
            times.append(int(t))
        streams.extend((ms, int(kind)) for ms in times)
    for ms, kind in sorted(streams):
        yield SimEvent(ms, EventKind(kind))


def pick_victims(rng: random.Random, candidates: list[int], fraction: float, at_least: int = 1) -> list[int]:
    if not candidates:
        return []
    k = max(at_least, int(round(fraction * len(candidates))))
    return sorted(rng.sample(candidates, min(k, len(candidates))))


__all__ = [
    "Workload",
    "catalog_name",
    "churn_process",
    "file_size",
    "generate_workload",
    "pick_victims",
    "record_for",
    "sharing_nodes",
]
