"""Discrete-event simulator for the three overlay families."""

from .config import ProtocolConfig, QuerySpec, FailureSpec, ScenarioError, ScenarioSpec, WorkloadConfig, load_spec, spec_from_dict
from .engine import EventKind, SimEvent, SimNode, Simulator
from .invariants import Violation, check_invariants
from .metrics import metrics, success_ratio
from .scenario import RunResult, run, run_spec
from .topology import InfeasibleTopology, Topology, TopologyKind, build_topology
from .trace import SimTrace
from .workload import Workload, churn_process, generate_workload

__all__ = [
    "EventKind", "FailureSpec", "InfeasibleTopology", "ProtocolConfig", "QuerySpec", "RunResult",
    "ScenarioError", "ScenarioSpec", "SimEvent", "SimNode", "SimTrace", "Simulator", "Topology",
    "TopologyKind", "Violation", "Workload", "WorkloadConfig", "build_topology", "check_invariants",
    "churn_process", "generate_workload", "load_spec", "metrics", "run", "run_spec", "spec_from_dict",
    "success_ratio",
]
