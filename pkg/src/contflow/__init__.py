"""Data-flow aware workflow placement across edge, HPC and cloud sites."""

from .broker import BrokerChoice, Requirement, replan_on_preemption, select_offer
from .catalog import (Catalog, Compression, CompressionPolicy, Link, Offer, Site, SiteClass,
                      compute_time, feasible_offers, transfer_cost, transfer_time)
from .dfl import DFLGraph, TraceEvent, ingest, merge, severity
from .errors import ContflowError
from .formats import load_catalog, load_scenario, load_workflow, sample_catalog
from .kernels import BACKEND
from .objective import Objective
from .scenarios import SCENARIOS, run_scenario
from .scheduler import Placement, ScheduleFlags, schedule
from .sim import Billing, SimConfig, SimReport, simulate
from .workflow import (FlowEdge, InstanceGraph, Task, TaskKind, WorkflowGraph, stem_workflow,
                       topo_order, unroll, validate)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "SCENARIOS", "Billing", "BrokerChoice", "Catalog", "Compression", "CompressionPolicy",
    "ContflowError", "DFLGraph", "FlowEdge", "InstanceGraph", "Link", "Objective", "Offer",
    "Placement", "Requirement", "ScheduleFlags", "SimConfig", "SimReport", "Site", "SiteClass",
    "Task", "TaskKind", "TraceEvent", "WorkflowGraph", "compute_time", "feasible_offers",
    "ingest", "load_catalog", "load_scenario", "load_workflow", "merge", "replan_on_preemption", "run_scenario", "sample_catalog", "schedule", "select_offer", "severity",
    "simulate", "stem_workflow", "topo_order", "transfer_cost", "transfer_time", "unroll",
    "validate",
]
