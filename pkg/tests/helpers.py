"""Scenario builders and oracles shared by the simulator and acceptance tests."""

import networkx as nx

from p2psim.simnet import ProtocolConfig, QuerySpec, ScenarioSpec, WorkloadConfig
from p2psim.simnet.workload import catalog_name


def mutation_spec(fault=None, seed=1) -> ScenarioSpec:
    return ScenarioSpec(
        f"mutation-{fault}", seed, "decentralized", {"n": 20, "degree": 4},
        ProtocolConfig("gnutella", ttl=3, fault=fault), WorkloadConfig(n_queries=10), t_end=3000,
    )


def single_query_spec(topology, params, protocol="gnutella", ttl=7, origin=0, seed=1, **proto) -> ScenarioSpec:
    """One query for a file nobody holds, so reach is the whole horizon."""
    wl = WorkloadConfig(files_per_node=0, queries=[QuerySpec(100, origin, catalog_name(0))])
    return ScenarioSpec("reach", seed, topology, params, ProtocolConfig(protocol, ttl=ttl, **proto), wl, t_end=5000)


def bfs_reach(edges, origin, ttl) -> int:
    """Nodes at distance 1..ttl from ``origin``."""
    g = nx.Graph()
    g.add_edges_from((a, b) for a, b, *_ in edges)
    return len(nx.single_source_shortest_path_length(g, origin, cutoff=ttl)) - 1


ACCEPTANCE: list[str] = []


def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}" + (f": {detail}" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    return ok
