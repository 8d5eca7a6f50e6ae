"""Two-tier (FastTrack style) and three-tier (OpenFT style) super-peer logic."""

from __future__ import annotations

import enum
import heapq
import itertools
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Optional, Sequence

from .servent import (
    ServentConfig,
    ServentState,
    answer_query,
    handle_descriptor,
)
from .wire_gnutella import Descriptor, QueryHitPayload, QueryPayload
from .wire_napster import SharedFileRecord

CHILD_CAPACITY = 500
OPENFT_PARENTS = 3
FASTTRACK_PARENTS = 1
MAX_PARTICIPATION = 1000
SECONDS_PER_LEVEL = 60


class Role(enum.Enum):
    ORDINARY = "ordinary"
    SUPER = "super"
    INDEX = "index"
    SEARCH_INDEX = "search+index"

    @property
    def indexes_children(self) -> bool:
        return self in (Role.SUPER, Role.SEARCH_INDEX)


class NoSuperNodeAvailable(RuntimeError):
    """Non-qualifying peer arrived before any super node exists; retry later."""


class CapacityError(RuntimeError):
    pass


class UnknownChild(KeyError):
    pass


@dataclass(frozen=True)
class NodeCapability:
    bandwidth_kbps: int
    cpu_score: int = 0
    memory_score: int = 0
    expected_availability: float = 0.0

    def __post_init__(self):
        if min(self.bandwidth_kbps, self.cpu_score, self.memory_score) < 0:
            raise ValueError("capabilities must be non-negative")
        if not 0.0 <= self.expected_availability <= 1.0:
            raise ValueError("availability must lie in [0, 1]")


@dataclass(frozen=True)
class Thresholds:
    min_bandwidth_kbps: int = 1000
    min_availability: float = 0.5
    index_availability: float = 0.9

    def qualifies_super(self, cap: NodeCapability) -> bool:
        return cap.bandwidth_kbps >= self.min_bandwidth_kbps and cap.expected_availability >= self.min_availability

    def qualifies_index(self, cap: NodeCapability) -> bool:
        return cap.expected_availability >= self.index_availability


def choose_role(requested: Role, cap: NodeCapability, thresholds: Thresholds = Thresholds()) -> Role:
    """User-chosen role (OpenFT mode), refused when the host cannot carry it."""
    if requested in (Role.INDEX, Role.SEARCH_INDEX) and not thresholds.qualifies_index(cap):
        raise ValueError(f"availability {cap.expected_availability} too low for an index node")
    return requested


# --- super node state --------------------------------------------------------


class _SuperRouter(ServentState):
    """Servent routing state whose local index is the union of its children's."""

    owner: "SuperNodeState"

    def reachable(self, conn) -> bool:
        return conn in self.neighbors or conn in self.owner.children

    def local_hits(self, query: QueryPayload) -> list[QueryHitPayload]:
        hits = []
        for child in sorted(self.owner.children, key=repr):
            info = self.owner.child_info.get(child, {})
            hit = answer_query(
                query.criteria, query.min_speed, self.owner.children[child], info.get("speed", self.config.speed),
                servent_id=info.get("servent_id", bytes(16)), ip=info.get("ip", "0.0.0.0"),
                port=info.get("port", 0),
            )
            if hit is not None:
                hits.append(hit)
        own = super().local_hits(query)
        return own + hits


@dataclass
class SuperNodeState:
    node_id: Hashable
    capacity: int = CHILD_CAPACITY
    children: dict = field(default_factory=dict)  # child -> list[SharedFileRecord]
    child_info: dict = field(default_factory=dict)  # child -> address info
    participation: dict = field(default_factory=dict)
    router: Optional[_SuperRouter] = None

    def __post_init__(self):
        if self.router is None:
            self.router = _SuperRouter(servent_id=bytes(16), config=ServentConfig(ping_threshold=None))
        self.router.owner = self

    @property
    def super_peers(self) -> set:
        return self.router.neighbors

    @property
    def load(self) -> int:
        return len(self.children)

    @property
    def spare(self) -> int:
        return self.capacity - len(self.children)

    def accept_child(self, child, records: Iterable[SharedFileRecord] = (), **info) -> None:
        if child in self.children:
            self.children[child] = list(records)
        elif len(self.children) >= self.capacity:
            raise CapacityError(f"super node {self.node_id} already has {self.capacity} children")
        else:
            self.children[child] = list(records)
        if info:
            self.child_info[child] = info
        self.participation.setdefault(child, 0)

    def drop_child(self, child) -> None:
        self.children.pop(child, None)
        self.child_info.pop(child, None)
        self.participation.pop(child, None)

    def examined_nodes(self) -> set:
        return {self.node_id, *self.children}


# --- bootstrap ---------------------------------------------------------------


@dataclass(frozen=True)
class SuperInfo:
    address: Hashable
    load: int = 0
    capacity: int = CHILD_CAPACITY


@dataclass(frozen=True)
class Assignment:
    role: Role
    contacts: tuple


def bootstrap_assign(
    cap: NodeCapability,
    thresholds: Thresholds = Thresholds(),
    known_supers: Sequence[SuperInfo] = (),
    max_contacts: int = 8,
) -> Assignment:
    ranked = sorted(known_supers, key=lambda s: (s.load, repr(s.address)))
    if thresholds.qualifies_super(cap):
        return Assignment(Role.SUPER, tuple(s.address for s in ranked[:max_contacts]))
    open_ = [s for s in ranked if s.load < s.capacity]
    if not open_:
        raise NoSuperNodeAvailable("no super node with spare capacity yet")
    return Assignment(Role.ORDINARY, (open_[0].address,))


def select_parents(
    child,
    candidates: Sequence[SuperNodeState],
    shares: Sequence[SharedFileRecord],
    k: int = OPENFT_PARENTS,
    **info,
) -> list[SuperNodeState]:
    """Register ``child`` with up to ``k`` least-loaded search nodes that accept."""
    if not candidates:
        raise ValueError("no search nodes available")
    chosen: list[SuperNodeState] = []
    for node in sorted(candidates, key=lambda s: (s.load, repr(s.node_id))):
        if len(chosen) == k:
            break
        try:
            node.accept_child(child, shares, **info)
        except CapacityError:
            continue
        chosen.append(node)
    return chosen


class RegistryOp(enum.Enum):
    ADD = "add"
    REM = "rem"
    MOD = "mod"


def registry_update(state: SuperNodeState, child, op: RegistryOp, records: Iterable[SharedFileRecord]) -> SuperNodeState:
    if child not in state.children:
        raise UnknownChild(child)
    files = state.children[child]
    op = RegistryOp(op)
    for rec in records:
        key = (rec.filename, rec.md5)
        if op == RegistryOp.ADD:
            files.append(rec)
        elif op == RegistryOp.REM:
            files[:] = [f for f in files if (f.filename, f.md5) != key]
        else:
            for i, f in enumerate(files):
                if (f.filename, f.md5) == key:
                    files[i] = rec
    return state


def route_query(state: SuperNodeState, origin, query: Descriptor):
    """Search the children's index, reply along the reverse path, rebroadcast to super peers."""
    return handle_descriptor(state.router, origin, query)


def coverage_ratio(children_per_super: int) -> int:
    if children_per_super < 0:
        raise ValueError("children_per_super must be non-negative")
    return children_per_super + 1


# --- participation level -----------------------------------------------------


def participation_update(level: int, connected_seconds_delta: float, seconds_per_level: int = SECONDS_PER_LEVEL) -> int:
    if not 0 <= level <= MAX_PARTICIPATION:
        raise ValueError("level must lie in [0, 1000]")
    gained = int(max(connected_seconds_delta, 0) // seconds_per_level)
    return min(MAX_PARTICIPATION, level + gained)


class ParticipationQueue:
    """Upload queue served by participation level, highest first, FIFO among equals."""

    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, level: int, item) -> None:
        heapq.heappush(self._heap, (-level, next(self._seq), item))

    def pop(self):
        return heapq.heappop(self._heap)[2]


# --- failover ------------------------------------------------------------------


@dataclass
class Failover:
    assignments: dict = field(default_factory=dict)  # orphan -> new super node id
    unattached: list = field(default_factory=list)


def failover_reassign(
    supers: Sequence[SuperNodeState],
    failed,
    orphans: dict,
    current_parents: Optional[dict] = None,
) -> Failover:
    """Re-home every child of a failed super node on live ones with spare room.

    ``orphans`` maps child -> share list (or ``(share list, info)``).
    Children go to the live node with the most spare capacity first.
    """
    live = [s for s in supers if s.node_id != failed]
    for s in live:
        s.super_peers.discard(failed)
    result = Failover()
    current_parents = current_parents or {}
    for child, shares in orphans.items():
        info = {}
        if isinstance(shares, tuple):
            shares, info = shares
        taken = current_parents.get(child, set())
        options = [s for s in live if s.spare > 0 and s.node_id not in taken]
        if not options:
            result.unattached.append(child)
            continue
        best = min(options, key=lambda s: (-s.spare, repr(s.node_id)))
        best.accept_child(child, shares, **info)
        result.assignments[child] = best.node_id
    return result
