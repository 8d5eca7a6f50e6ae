"""Topology generators: the four basic shapes and three hybrids."""

from __future__ import annotations

import enum
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx

from .engine import DEFAULT_LATENCY_MS, MODEM_LATENCY_MS


class TopologyKind(enum.Enum):
    CENTRALIZED = "centralized"
    RING = "ring"
    HIERARCHICAL = "hierarchical"
    DECENTRALIZED = "decentralized"
    CENTRALIZED_RING = "centralized-ring"
    CENTRALIZED_CENTRALIZED = "centralized-centralized"
    CENTRALIZED_DECENTRALIZED = "centralized-decentralized"


class InfeasibleTopology(ValueError):
    pass


@dataclass(frozen=True)
class NodeSpec:
    node_id: int
    role: str
    latency_ms: int = DEFAULT_LATENCY_MS


@dataclass
class Topology:
    kind: TopologyKind
    nodes: list[NodeSpec] = field(default_factory=list)
    edges: list[tuple[int, int, int]] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def adjacency(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {n.node_id: set() for n in self.nodes}
        for a, b, _ in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def with_role(self, role: str) -> list[int]:
        return [n.node_id for n in self.nodes if n.role == role]

    def role_of(self, node_id: int) -> str:
        return self.nodes[node_id].role

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        adj = self.adjacency()
        start = self.nodes[0].node_id
        seen = {start}
        todo = deque([start])
        while todo:
            for nb in adj[todo.popleft()]:
                if nb not in seen:
                    seen.add(nb)
                    todo.append(nb)
        return len(seen) == len(self.nodes)


def _regular(n: int, degree: int, rng: random.Random) -> list[tuple[int, int]]:
    if n == 1:
        return []
    if degree >= n:
        raise InfeasibleTopology(f"degree {degree} must be below node count {n}")
    if degree < 1:
        raise InfeasibleTopology("degree must be at least 1")
    if (n * degree) % 2:
        raise InfeasibleTopology(f"no {degree}-regular graph on {n} nodes (n*degree is odd)")
    if degree == n - 1:
        return [(a, b) for a in range(n) for b in range(a + 1, n)]
    for _ in range(100):
        g = nx.random_regular_graph(degree, n, seed=rng.getrandbits(32))
        if nx.is_connected(g):
            return sorted(tuple(sorted(e)) for e in g.edges())
    raise InfeasibleTopology(f"could not draw a connected {degree}-regular graph on {n} nodes")


def build_topology(kind, params: Optional[dict] = None, seed: int = 0) -> Topology:
    """Build a topology deterministically from ``(kind, params, seed)``.

    Recognised params: ``n``, ``degree``, ``branching``, ``servers``,
    ``clients_per_server``, ``supers``, ``children_per_super``,
    ``super_degree``, ``parents``, ``latency_ms``, ``modem_fraction``.
    """
    kind = TopologyKind(kind)
    p = dict(params or {})
    rng = random.Random(seed)
    roles: list[str]
    edges: list[tuple[int, int]]

    if kind in (TopologyKind.CENTRALIZED, TopologyKind.RING, TopologyKind.HIERARCHICAL, TopologyKind.DECENTRALIZED):
        n = int(p.get("n", 10))
        if n < 1:
            raise InfeasibleTopology("need at least one node")
    if kind == TopologyKind.CENTRALIZED:
        roles = ["server"] + ["client"] * (n - 1)
        edges = [(0, i) for i in range(1, n)]
    elif kind == TopologyKind.RING:
        roles = ["peer"] * n
        edges = sorted({tuple(sorted((i, (i + 1) % n))) for i in range(n) if n > 1})
    elif kind == TopologyKind.HIERARCHICAL:
        b = int(p.get("branching", 3))
        if b < 1:
            raise InfeasibleTopology("branching must be at least 1")
        roles = ["root"] + ["node"] * (n - 1)
        edges = [((i - 1) // b, i) for i in range(1, n)]
    elif kind == TopologyKind.DECENTRALIZED:
        roles = ["peer"] * n
        edges = _regular(n, int(p.get("degree", 4)), rng)
    elif kind == TopologyKind.CENTRALIZED_RING:
        k, m = int(p.get("servers", 3)), int(p.get("clients_per_server", 5))
        if k < 1 or m < 0:
            raise InfeasibleTopology("need servers >= 1 and clients_per_server >= 0")
        roles = ["server"] * k + ["client"] * (k * m)
        edges = sorted({tuple(sorted((i, (i + 1) % k))) for i in range(k) if k > 1})
        edges += [(i // m if m else 0, k + i) for i in range(k * m)]
    elif kind == TopologyKind.CENTRALIZED_CENTRALIZED:
        k, m = int(p.get("servers", 3)), int(p.get("clients_per_server", 5))
        if k < 1 or m < 0:
            raise InfeasibleTopology("need servers >= 1 and clients_per_server >= 0")
        roles = ["server"] + ["server"] * k + ["client"] * (k * m)
        edges = [(0, 1 + i) for i in range(k)]
        edges += [(1 + (i // m if m else 0), 1 + k + i) for i in range(k * m)]
    else:
        k = int(p.get("supers", 5))
        m = int(p.get("children_per_super", 10))
        parents = int(p.get("parents", 1))
        if k < 1 or m < 0 or parents < 1:
            raise InfeasibleTopology("need supers >= 1, children_per_super >= 0, parents >= 1")
        if parents > k:
            raise InfeasibleTopology(f"cannot give each child {parents} parents among {k} supers")
        d = int(p.get("super_degree", min(4, k - 1)))
        roles = ["super"] * k + ["child"] * (k * m)
        edges = _regular(k, d, rng) if k > 1 else []
        for i in range(k * m):
            home = i // m
            for j in range(parents):
                edges.append(((home + j) % k, k + i))

    n_total = len(roles)
    modem_fraction = float(p.get("modem_fraction", 0.0))
    base = int(p.get("latency_ms", DEFAULT_LATENCY_MS))
    modem = set(rng.sample(range(n_total), int(round(modem_fraction * n_total)))) if modem_fraction else set()
    nodes = [NodeSpec(i, roles[i], MODEM_LATENCY_MS if i in modem else base) for i in range(n_total)]
    weighted = [(a, b, max(nodes[a].latency_ms, nodes[b].latency_ms)) for a, b in edges]
    topo = Topology(kind, nodes, weighted, p)
    if not topo.is_connected() and not p.get("allow_partition", False):
        raise InfeasibleTopology(f"{kind.value} topology with {p} is not connected")
    return topo
