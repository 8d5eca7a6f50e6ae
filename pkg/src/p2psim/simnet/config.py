"""Scenario configuration and TOML loading."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..servent import FAULTS
from .topology import TopologyKind

PROTOCOLS = ("napster", "gnutella", "superpeer-ft", "superpeer-openft")
PING_MODES = ("off", "threshold", "periodic")
FAILURE_TARGETS = ("central", "super", "random", "node")


class ScenarioError(ValueError):
    """Invalid scenario description."""


@dataclass
class ProtocolConfig:
    protocol: str = "gnutella"
    ttl: int = 7
    max_neighbors: int = 8
    ping_mode: str = "off"
    ping_period_ms: int = 3000
    ping_threshold: int = 2
    pong_caching: bool = False
    fault: Optional[str] = None
    queue_capacity: int = 0  # 0 disables per-link send queues
    priority_drop: bool = True
    service_ms: int = 0
    bandwidth_kbps: int = 1500
    speed: int = 56
    super_capacity: int = 500
    index_period_ms: int = 0

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ScenarioError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}")
        if self.ping_mode not in PING_MODES:
            raise ScenarioError(f"unknown ping_mode {self.ping_mode!r}")
        if self.fault is not None and self.fault not in FAULTS:
            raise ScenarioError(f"unknown fault {self.fault!r}")
        if self.ttl < 1 or self.ping_period_ms < 1 or self.bandwidth_kbps < 1:
            raise ScenarioError("ttl, ping_period_ms and bandwidth_kbps must be positive")
        if self.queue_capacity < 0 or self.service_ms < 0:
            raise ScenarioError("queue_capacity and service_ms must be non-negative")


@dataclass
class QuerySpec:
    time_ms: int
    origin: int
    filename: str
    criteria: str = ""

    def __post_init__(self):
        if not self.criteria:
            self.criteria = query_words(self.filename)


@dataclass
class FailureSpec:
    time_ms: int
    target: str = "random"
    fraction: float = 0.1
    node: Optional[int] = None


@dataclass
class WorkloadConfig:
    catalog_size: int = 100
    files_per_node: int = 3
    share_fraction: float = 1.0
    min_file_size: int = 10_000
    max_file_size: int = 1_000_000
    n_queries: int = 20
    query_start_ms: int = 1000
    query_interval_ms: int = 100
    placements: list = field(default_factory=list)  # [node, filename] pairs
    queries: list = field(default_factory=list)  # QuerySpec entries; overrides n_queries
    firewalled_fraction: float = 0.0
    download: bool = False
    rate_join: float = 0.0  # events per second
    rate_leave: float = 0.0
    failures: list = field(default_factory=list)

    def validate(self) -> None:
        if not 0.0 <= self.share_fraction <= 1.0 or not 0.0 <= self.firewalled_fraction <= 1.0:
            raise ScenarioError("fractions must lie in [0, 1]")
        if self.rate_join < 0 or self.rate_leave < 0:
            raise ScenarioError("churn rates must be non-negative")
        if self.catalog_size < 1 or self.files_per_node < 0 or self.n_queries < 0:
            raise ScenarioError("catalog_size must be positive, counts non-negative")
        if not 0 < self.min_file_size <= self.max_file_size:
            raise ScenarioError("need 0 < min_file_size <= max_file_size")
        for f in self.failures:
            if f.target not in FAILURE_TARGETS:
                raise ScenarioError(f"unknown failure target {f.target!r}")
            if f.target == "node" and f.node is None:
                raise ScenarioError("failure target 'node' needs a node id")


@dataclass
class ScenarioSpec:
    name: str
    seed: int
    topology: str
    topology_params: dict = field(default_factory=dict)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    t_end: int = 10_000

    def validate(self) -> None:
        try:
            TopologyKind(self.topology)
        except ValueError:
            raise ScenarioError(f"unknown topology {self.topology!r}") from None
        if self.t_end < 0:
            raise ScenarioError("t_end must be non-negative")
        self.protocol.validate()
        self.workload.validate()

    def to_dict(self) -> dict:
        return asdict(self)


def query_words(filename: str) -> str:
    """Criteria that select ``filename`` in a generated catalog: its title token."""
    stem = filename.rsplit(".", 1)[0]
    return stem.split(" - ")[-1]


def _build(cls, data: dict, where: str):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ScenarioError(f"unknown keys in [{where}]: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ScenarioError(f"[{where}]: {exc}") from None


def spec_from_dict(data: dict) -> ScenarioSpec:
    data = dict(data)
    if "seed" not in data:
        raise ScenarioError("scenario needs a seed")
    if "topology" not in data or "kind" not in data["topology"]:
        raise ScenarioError("scenario needs [topology] with a kind")
    topo = dict(data.pop("topology"))
    kind = topo.pop("kind")
    proto = _build(ProtocolConfig, dict(data.pop("protocol", {})), "protocol")
    wl = dict(data.pop("workload", {}))
    wl["queries"] = [_build(QuerySpec, q, "workload.queries") for q in wl.get("queries", [])]
    wl["failures"] = [_build(FailureSpec, f, "workload.failures") for f in wl.get("failures", [])]
    wl["placements"] = [tuple(p) for p in wl.get("placements", [])]
    workload = _build(WorkloadConfig, wl, "workload")
    allowed = {"name", "seed", "t_end"}
    if set(data) - allowed:
        raise ScenarioError(f"unknown top-level keys: {sorted(set(data) - allowed)}")
    try:
        spec = ScenarioSpec(
            name=str(data.get("name", "scenario")), seed=int(data["seed"]), topology=kind,
            topology_params=topo, protocol=proto, workload=workload, t_end=int(data.get("t_end", 10_000)),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from None
    spec.validate()
    return spec


def load_spec(path) -> ScenarioSpec:
    try:
        with open(Path(path), "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    return spec_from_dict(data)
