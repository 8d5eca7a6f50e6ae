"""Wire a topology, protocol stack and workload into one simulation."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Optional

from ..servent import OutboundQueue
from ..superpeer import NodeCapability, SuperInfo, bootstrap_assign, NoSuperNodeAvailable
from .config import FailureSpec, ProtocolConfig, ScenarioError, ScenarioSpec
from .engine import EventKind, Simulator
from .invariants import Violation, check_invariants
from .metrics import metrics
from .nodes import (
    BootstrapNode,
    ChildNode,
    Context,
    GnutellaNode,
    IndexNode,
    NapsterClientNode,
    NapsterServerNode,
    SuperNode,
)
from .topology import InfeasibleTopology, Topology, TopologyKind, build_topology
from .trace import SimTrace
from .workload import SHARING_ROLES, Workload, churn_process, generate_workload, pick_victims

OPENFT_PARENTS = 3


@dataclass
class RunResult:
    spec: Optional[ScenarioSpec]
    topology: Topology
    workload: Workload
    trace: SimTrace
    ctx: Context
    _violations: Optional[list] = field(default=None, repr=False)

    @property
    def report(self) -> dict:
        return metrics(self.trace)

    @property
    def violations(self) -> list[Violation]:
        if self._violations is None:
            self._violations = check_invariants(self.trace)
        return self._violations


def _check_stack(topo: Topology, protocol: ProtocolConfig) -> None:
    roles = {n.role for n in topo.nodes}
    if protocol.protocol == "napster" and "server" not in roles:
        raise ScenarioError(f"napster needs a topology with servers, not {topo.kind.value}")
    if protocol.protocol.startswith("superpeer") and topo.kind != TopologyKind.CENTRALIZED_DECENTRALIZED:
        raise ScenarioError("super-peer protocols run on the centralized-decentralized topology")


def _make_node(node_id: int, role: str, ctx: Context, wl: Workload, index_node: Optional[int]):
    proto = ctx.protocol.protocol
    shares = wl.shares.get(node_id, [])
    fw = node_id in wl.firewalled
    if proto == "gnutella":
        return GnutellaNode(node_id, ctx, shares, fw)
    if proto == "napster":
        return NapsterServerNode(node_id, ctx) if role == "server" else NapsterClientNode(node_id, ctx, shares, fw)
    return SuperNode(node_id, ctx, index_node) if role == "super" else ChildNode(node_id, ctx, shares)


def _failure_targets(spec: FailureSpec, ctx: Context, seed: int, i: int):
    def choose(sim: Simulator):
        alive = sim.alive_nodes()
        if spec.target == "node":
            return [spec.node]
        if spec.target == "central":
            servers = [n for n in alive if ctx.role(n) == "server"]
            return servers[:1]
        if spec.target == "super":
            supers = [sim.nodes[n] for n in alive if isinstance(sim.nodes[n], SuperNode)]
            if not supers:
                return []
            return [max(supers, key=lambda s: (s.state.load, -s.node_id)).node_id]
        rng = random.Random(f"{seed}:failure:{i}")
        pool = [n for n in alive if ctx.role(n) in SHARING_ROLES]
        return pick_victims(rng, pool, spec.fraction)

    return choose


class _Churn:
    def __init__(self, ctx: Context, seed: int, first_id: int):
        self.ctx = ctx
        self.rng = random.Random(f"{seed}:churn-pick")
        self.ids = itertools.count(first_id)

    def leave(self, sim: Simulator):
        roles = set(SHARING_ROLES)
        if self.ctx.protocol.protocol.startswith("superpeer"):
            roles.add("super")
        pool = [n for n in sim.alive_nodes() if self.ctx.role(n) in roles]
        return [self.rng.choice(pool)] if pool else []

    def join(self, sim: Simulator):
        ctx = self.ctx
        nid = next(self.ids)
        shares = ctx.workload.random_shares(self.rng)
        ctx.workload.shares[nid] = shares
        proto = ctx.protocol.protocol
        alive = sim.alive_nodes()
        if proto == "gnutella":
            peers = [n for n in alive if isinstance(sim.nodes[n], GnutellaNode)]
            k = min(len(peers), max(1, ctx.topology.params.get("degree", 2) // 2))
            return GnutellaNode(nid, ctx, shares, bootstrap=sorted(self.rng.sample(peers, k))), None
        if proto == "napster":
            node = NapsterClientNode(nid, ctx, shares)
            servers = [n for n in alive if isinstance(sim.nodes[n], NapsterServerNode) and sim.neighbors(n)]
            if servers:
                sim.link(nid, self.rng.choice(servers))
            return node, None
        node = ChildNode(nid, ctx, shares)
        supers = [sim.nodes[n] for n in alive if isinstance(sim.nodes[n], SuperNode)]
        known = [SuperInfo(s.node_id, s.state.load, s.state.capacity) for s in supers]
        try:
            contacts = bootstrap_assign(NodeCapability(56), known_supers=known).contacts
        except NoSuperNodeAvailable:
            contacts = ()
        if proto == "superpeer-openft":
            ranked = sorted((s for s in known if s.load < s.capacity), key=lambda s: (s.load, s.address))
            contacts = tuple(s.address for s in ranked[:OPENFT_PARENTS])
        for c in contacts:
            sim.link(nid, c)
        return node, None


def build(topo: Topology, protocol: ProtocolConfig, wl: Workload, seed: int, t_end: int, name: str = "scenario"):
    protocol.validate()
    _check_stack(topo, protocol)
    sim = Simulator(seed)
    if protocol.queue_capacity:
        cap, prio = protocol.queue_capacity, protocol.priority_drop
        sim.queue_factory = lambda: OutboundQueue(cap, prio)
        sim.service_ms = protocol.service_ms
    ctx = Context(protocol, topo, wl, sim)
    n = len(topo.nodes)
    extra = itertools.count(n)
    index_node = None
    if protocol.protocol == "superpeer-openft" and protocol.index_period_ms > 0:
        index_node = next(extra)
    for ns in topo.nodes:
        sim.add_node(_make_node(ns.node_id, ns.role, ctx, wl, index_node), ns.latency_ms)
    for a, b, lat in topo.edges:
        sim.link(a, b, lat)
    if index_node is not None:
        sim.add_node(IndexNode(index_node, ctx))
    if protocol.protocol.startswith("superpeer"):
        boot = BootstrapNode(next(extra), ctx)
        sim.add_node(boot)
        sim.observers.append(boot.observe)

    for q in wl.queries:
        if q.origin not in sim.nodes:
            raise ScenarioError(f"query origin {q.origin} is not a node")
        sim.set_timer(q.origin, q.time_ms, "query", q)
    cfg = wl.cfg
    for i, f in enumerate(cfg.failures):
        sim.schedule(f.time_ms, EventKind.NODE_LEAVE, (_failure_targets(f, ctx, seed, i), "failure"))
    if cfg.rate_join or cfg.rate_leave:
        churn = _Churn(ctx, seed, next(extra) + 1000)
        for ev in churn_process(cfg.rate_join, cfg.rate_leave, seed, t_end):
            if ev.kind == EventKind.NODE_JOIN:
                sim.schedule(ev.time_ms, ev.kind, churn.join)
            else:
                sim.schedule(ev.time_ms, ev.kind, (churn.leave, "churn"))
    sim.trace.meta.update({
        "scenario": name, "seed": seed, "protocol": protocol.protocol, "topology": topo.kind.value,
        "nodes": n, "t_end": t_end,
    })
    return sim, ctx


def run(topology: Topology, protocol: ProtocolConfig, workload: Workload, seed: int, t_end: int, name: str = "scenario") -> RunResult:
    sim, ctx = build(topology, protocol, workload, seed, t_end, name)
    trace = sim.run(t_end)
    return RunResult(None, topology, workload, trace, ctx)


def run_spec(spec: ScenarioSpec, seed: Optional[int] = None) -> RunResult:
    spec.validate()
    seed = spec.seed if seed is None else seed
    try:
        topo = build_topology(spec.topology, spec.topology_params, seed)
    except InfeasibleTopology as exc:
        raise ScenarioError(str(exc)) from None
    wl = generate_workload(spec.workload, topo, seed)
    result = run(topo, spec.protocol, wl, seed, spec.t_end, spec.name)
    result.spec = spec
    return result
