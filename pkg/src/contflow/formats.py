"""YAML and CSV readers/writers for every external file format.

Key order in written files is fixed and floats use Python's shortest
round-trip repr, so identical objects always serialize to identical bytes.
``docs/FORMATS.md`` describes each layout.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .broker import BrokerChoice, Requirement
from .catalog import Catalog, Compression, CompressionPolicy, Link, Offer, Site, SiteClass
from .errors import FormatError
from .objective import JOULES_PER_KWH, Objective
from .scheduler import Decision, Placement, ScheduleFlags
from .sim import (Billing, CostItem, Event, LinkRecord, SimConfig, SimReport, TaskRecord,
                  TransferRecord, FAST_CODEC)
from .workflow import FlowEdge, Task, TaskKind, WorkflowGraph, stem_workflow, StemParams

DATA_DIR = Path(__file__).parent / "data"


class _Dumper(yaml.SafeDumper):
    pass


def _repr_str(dumper, value):
    return dumper.represent_scalar("tag:yaml.org,2002:str", value.value)


for _enum in (TaskKind, SiteClass, CompressionPolicy, Billing):
    _Dumper.add_representer(_enum, _repr_str)


def dump_yaml(doc: Any) -> str:
    return yaml.dump(doc, Dumper=_Dumper, sort_keys=False, default_flow_style=False,
                     allow_unicode=True, width=100)


def load_yaml(text: str) -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise FormatError(f"not valid YAML: {exc}") from None


def _num(d: dict, key: str, default=None, kind=float):
    v = d.get(key, default)
    if v is None:
        return None
    try:
        if kind is int:
            f = float(v)
            if f != int(f):
                raise ValueError
            return int(f)
        return float(v)
    except (TypeError, ValueError):
        raise FormatError(f"field {key!r}: expected a number, got {v!r}") from None


def _req(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise FormatError(f"{where}: missing field {key!r}")
    return d[key]


def _enum(cls, value, where):
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise FormatError(f"{where}: {value!r} is not one of {choices}") from None


# -- workflow ---------------------------------------------------------------

def workflow_to_dict(g: WorkflowGraph) -> dict:
    return {
        "name": g.name,
        "inner_loop": list(g.inner_loop),
        "outer_loop": list(g.outer_loop),
        "inner_iterations": g.inner_iterations,
        "outer_iterations": g.outer_iterations,
        "tasks": [{
            "id": t.id, "kind": t.kind, "work": float(t.work), "memory": float(t.memory),
            "accelerators": t.accelerators, "pinned_site": t.pinned_site,
            "spot_tolerant": t.spot_tolerant,
        } for t in g.tasks],
        "edges": [{
            "producer": e.producer, "consumer": e.consumer, "volume": float(e.volume),
            "compressible": e.compressible,
        } for e in g.edges],
    }


def workflow_from_dict(d: dict) -> WorkflowGraph:
    if not isinstance(d, dict):
        raise FormatError("workflow: expected a mapping")
    tasks = []
    for i, t in enumerate(d.get("tasks") or []):
        where = f"tasks[{i}]"
        tasks.append(Task(
            id=str(_req(t, "id", where)),
            kind=_enum(TaskKind, t.get("kind", "generic"), where),
            work=_num(t, "work", 0.0),
            memory=_num(t, "memory", 0.0),
            accelerators=_num(t, "accelerators", 0, int),
            pinned_site=t.get("pinned_site"),
            spot_tolerant=bool(t.get("spot_tolerant", False)),
        ))
    edges = []
    for i, e in enumerate(d.get("edges") or []):
        where = f"edges[{i}]"
        edges.append(FlowEdge(str(_req(e, "producer", where)), str(_req(e, "consumer", where)),
                              _num(e, "volume", 0.0), bool(e.get("compressible", False))))
    return WorkflowGraph(
        tasks=tuple(tasks), edges=tuple(edges),
        inner_loop=tuple(d.get("inner_loop") or ()), outer_loop=tuple(d.get("outer_loop") or ()),
        inner_iterations=_num(d, "inner_iterations", 1, int),
        outer_iterations=_num(d, "outer_iterations", 1, int),
        name=str(d.get("name", "workflow")),
    )


# -- catalog ----------------------------------------------------------------

def catalog_to_dict(c: Catalog) -> dict:
    return {
        "sites": [{"id": s.id, "class": s.cls, "provider": s.provider,
                   "storage_throughput": s.storage_throughput} for s in c.sites],
        "offers": [{
            "id": o.id, "site": o.site, "cpu_units": float(o.cpu_units), "memory": float(o.memory),
            "accelerators": o.accelerators, "price_on_demand": float(o.price_on_demand),
            "price_spot": None if o.price_spot is None else float(o.price_spot),
            "spot_preemption_rate": float(o.spot_preemption_rate),
            "provision_delay": float(o.provision_delay), "power": float(o.power),
            "idle_power": float(o.idle_power), "spot_only": o.spot_only,
        } for o in c.offers],
        "links": [_link_to_dict(l) for l in c.links],
        "default_link": {k: v for k, v in _link_to_dict(c.default_link).items()
                         if k not in ("src", "dst")},
    }


def _link_to_dict(l: Link) -> dict:
    return {"src": l.src, "dst": l.dst, "bandwidth": float(l.bandwidth),
            "latency": float(l.latency), "egress_fee": float(l.egress_fee)}


def _link_from(d: dict, where: str, src=None, dst=None) -> Link:
    return Link(src or str(_req(d, "src", where)), dst or str(_req(d, "dst", where)),
                _num(d, "bandwidth") if "bandwidth" in d else _req(d, "bandwidth", where),
                _num(d, "latency", 0.0), _num(d, "egress_fee", 0.0))


def catalog_from_dict(d: dict) -> Catalog:
    if not isinstance(d, dict):
        raise FormatError("catalog: expected a mapping")
    sites = []
    for i, s in enumerate(d.get("sites") or []):
        where = f"sites[{i}]"
        sites.append(Site(str(_req(s, "id", where)),
                          _enum(SiteClass, _req(s, "class", where), where),
                          s.get("provider"), _num(s, "storage_throughput")))
    offers = []
    for i, o in enumerate(d.get("offers") or []):
        where = f"offers[{i}]"
        offers.append(Offer(
            id=str(_req(o, "id", where)), site=str(_req(o, "site", where)),
            cpu_units=_num(o, "cpu_units") if "cpu_units" in o else _req(o, "cpu_units", where),
            memory=_num(o, "memory", 0.0), accelerators=_num(o, "accelerators", 0, int),
            price_on_demand=_num(o, "price_on_demand", 0.0), price_spot=_num(o, "price_spot"),
            spot_preemption_rate=_num(o, "spot_preemption_rate", 0.0),
            provision_delay=_num(o, "provision_delay", 0.0), power=_num(o, "power", 0.0),
            idle_power=_num(o, "idle_power", 0.0), spot_only=bool(o.get("spot_only", False)),
        ))
    links = [_link_from(l, f"links[{i}]") for i, l in enumerate(d.get("links") or [])]
    dl = _req(d, "default_link", "catalog")
    cat = Catalog(tuple(sites), tuple(offers), tuple(links), _link_from(dl, "default_link", "*", "*"))
    problems = cat.problems()
    if problems:
        raise FormatError("catalog: " + "; ".join(problems))
    return cat


def sample_catalog() -> Catalog:
    return catalog_from_dict(load_yaml((DATA_DIR / "sample_catalog.yaml").read_text()))


# -- placement --------------------------------------------------------------

def _pair(p):
    return None if p is None else {"offer": p[0], "score": float(p[1])}


def _unpair(d):
    return None if d is None else (str(d["offer"]), float(d["score"]))


def placement_to_dict(p: Placement) -> dict:
    return {
        "assignment": dict(p.assignment),
        "data_location": dict(p.data_location),
        "decisions": [{
            "instance": d.instance, "choice": d.choice, "offer": d.offer,
            "considered": list(d.considered), "locality": _pair(d.locality),
            "parallelism": _pair(d.parallelism), "brokered": d.brokered,
        } for d in p.decisions],
    }


def placement_from_dict(d: dict) -> Placement:
    if not isinstance(d, dict) or not isinstance(d.get("assignment"), dict):
        raise FormatError("placement: missing assignment mapping")
    decisions = tuple(Decision(
        str(x["instance"]), str(x["choice"]), str(x["offer"]), tuple(x.get("considered") or ()),
        _unpair(x.get("locality")), _unpair(x.get("parallelism")), bool(x.get("brokered", False)),
    ) for x in d.get("decisions") or [])
    return Placement({str(k): str(v) for k, v in d["assignment"].items()},
                     {str(k): str(v) for k, v in (d.get("data_location") or {}).items()},
                     decisions)


def explain(p: Placement) -> str:
    """Human-readable decision log."""
    lines = []
    for d in p.decisions:
        line = f"{d.instance}: {d.choice} -> {d.offer}"
        if d.locality is not None:
            line += f" | locality {d.locality[0]} score {d.locality[1]:.6g}"
        if d.parallelism is not None:
            tag = "broker" if d.brokered else "parallelism"
            line += f" | {tag} {d.parallelism[0]} score {d.parallelism[1]:.6g}"
        line += f" | considered {', '.join(d.considered)}"
        lines.append(line)
    return "\n".join(lines) + ("\n" if lines else "")


# -- simulation report ------------------------------------------------------

def report_to_dict(r: SimReport) -> dict:
    return {
        "makespan": float(r.makespan),
        "total_cost": float(r.total_cost),
        "total_energy": float(r.total_energy),
        "per_task": {k: {"start": float(v.start), "end": float(v.end), "offer": v.offer,
                         "preemptions": v.preemptions} for k, v in r.per_task.items()},
        "per_link": {k: {"bytes": float(v.bytes), "logical_bytes": float(v.logical_bytes),
                         "seconds": float(v.seconds), "transfers": v.transfers}
                     for k, v in r.per_link.items()},
        "transfers": [{
            "edge": t.edge, "src": t.src, "dst": t.dst, "start": float(t.start),
            "end": float(t.end), "logical_bytes": float(t.logical_bytes),
            "wire_bytes": float(t.wire_bytes), "compressed": t.compressed,
        } for t in r.transfers],
        "cost_items": [{"kind": c.kind, "subject": c.subject, "amount": float(c.amount)}
                       for c in r.cost_items],
        "events": [{"time": float(e.time), "kind": e.kind, "subject": e.subject,
                    "data": {k: v for k, v in e.data}} for e in r.events],
    }


def report_from_dict(d: dict) -> SimReport:
    try:
        return SimReport(
            makespan=float(d["makespan"]),
            total_cost=float(d["total_cost"]),
            total_energy=float(d["total_energy"]),
            per_task={k: TaskRecord(float(v["start"]), float(v["end"]), str(v["offer"]),
                                    int(v["preemptions"])) for k, v in d["per_task"].items()},
            per_link={k: LinkRecord(float(v["bytes"]), float(v["logical_bytes"]),
                                    float(v["seconds"]), int(v["transfers"]))
                      for k, v in d["per_link"].items()},
            transfers=tuple(TransferRecord(t["edge"], t["src"], t["dst"], float(t["start"]),
                                           float(t["end"]), float(t["logical_bytes"]),
                                           float(t["wire_bytes"]), bool(t["compressed"]))
                            for t in d["transfers"]),
            cost_items=tuple(CostItem(c["kind"], c["subject"], float(c["amount"]))
                             for c in d["cost_items"]),
            events=tuple(Event(float(e["time"]), e["kind"], e["subject"],
                               tuple((e.get("data") or {}).items()))
                         for e in d.get("events") or []),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"report: {exc}") from None


def timeline_csv(r: SimReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance", "offer", "start", "end", "preemptions"])
    for iid, rec in sorted(r.per_task.items(), key=lambda kv: (kv[1].start, kv[0])):
        w.writerow([iid, rec.offer, repr(rec.start), repr(rec.end), rec.preemptions])
    return buf.getvalue()


def transfers_csv(r: SimReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["edge", "src", "dst", "start", "end", "logical_bytes", "wire_bytes", "compressed"])
    for t in r.transfers:
        w.writerow([t.edge, t.src, t.dst, repr(t.start), repr(t.end), repr(t.logical_bytes),
                    repr(t.wire_bytes), int(t.compressed)])
    return buf.getvalue()


def event_log_text(r: SimReport) -> str:
    lines = []
    for e in r.events:
        extra = " ".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in e.data)
        lines.append(f"{e.time!r} {e.kind} {e.subject} {extra}".rstrip())
    return "\n".join(lines) + ("\n" if lines else "")


# -- broker -----------------------------------------------------------------

def objective_to_dict(o: Objective) -> dict:
    return {"time": float(o.time), "cost": float(o.cost), "energy": float(o.energy),
            "energy_unit": float(o.energy_unit)}


def objective_from_dict(d: dict | None) -> Objective:
    if d is None:
        return Objective()
    if not isinstance(d, dict):
        raise FormatError("objective: expected a mapping")
    try:
        return Objective(_num(d, "time", 0.0), _num(d, "cost", 0.0), _num(d, "energy", 0.0),
                         _num(d, "energy_unit", 1.0 / JOULES_PER_KWH))
    except ValueError as exc:
        raise FormatError(f"objective: {exc}") from None


def requirement_to_dict(r: Requirement) -> dict:
    return {"cpu_units": float(r.cpu_units), "memory": float(r.memory),
            "accelerators": r.accelerators, "spot_ok": r.spot_ok,
            "max_price": None if r.max_price is None else float(r.max_price),
            "site_allow": None if r.site_allow is None else list(r.site_allow)}


def requirement_from_dict(d: dict) -> Requirement:
    if not isinstance(d, dict):
        raise FormatError("requirement: expected a mapping")
    allow = d.get("site_allow")
    try:
        return Requirement(_num(d, "cpu_units", 0.0), _num(d, "memory", 0.0),
                           _num(d, "accelerators", 0, int), bool(d.get("spot_ok", False)),
                           _num(d, "max_price"), None if allow is None else tuple(allow))
    except ValueError as exc:
        raise FormatError(f"requirement: {exc}") from None


def broker_choice_to_dict(c: BrokerChoice) -> dict:
    return {"offer": c.offer, "score": float(c.score), "est_start": float(c.est_start),
            "est_cost": float(c.est_cost), "used_spot": c.used_spot,
            "alternatives": [{"offer": o, "score": float(s)} for o, s in c.alternatives]}


def broker_choice_from_dict(d: dict) -> BrokerChoice:
    return BrokerChoice(str(d["offer"]), float(d["score"]), float(d["est_start"]),
                        float(d["est_cost"]), bool(d["used_spot"]),
                        tuple((str(a["offer"]), float(a["score"])) for a in d["alternatives"]))


# -- scenario ---------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioFile:
    name: str
    workflow: WorkflowGraph
    catalog: Catalog
    objective: Objective
    pins: dict[str, str] = field(default_factory=dict)
    spot: dict[str, bool] = field(default_factory=dict)
    allow_sites: dict[str, tuple[str, ...]] = field(default_factory=dict)
    compression_policy: CompressionPolicy = CompressionPolicy.OFF
    compression: Compression = FAST_CODEC
    brokered: bool = False
    critical_k: int = 10
    billing: Billing = Billing.PER_SECOND
    preemption: bool = False
    seed: int = 0
    workflow_ref: str | None = None
    catalog_ref: str | None = None

    def constrained_workflow(self) -> WorkflowGraph:
        tasks = []
        for t in self.workflow.tasks:
            if t.id in self.pins:
                t = replace(t, pinned_site=self.pins[t.id])
            if t.id in self.spot:
                t = replace(t, spot_tolerant=bool(self.spot[t.id]))
            tasks.append(t)
        return replace(self.workflow, tasks=tuple(tasks))

    def flags(self) -> ScheduleFlags:
        return ScheduleFlags(self.compression_policy, self.compression, self.brokered,
                             self.critical_k, dict(self.allow_sites))

    def sim_config(self, seed: int | None = None) -> SimConfig:
        return SimConfig(self.seed if seed is None else seed, self.billing,
                         self.compression_policy, self.compression, self.preemption)


def _resolve(ref, base: Path | None, kind: str):
    """Resolve a ``builtin:<name>`` tag, a relative path, or an inline mapping."""
    if isinstance(ref, dict):
        return ref, None
    if not isinstance(ref, str):
        raise FormatError(f"scenario: {kind} must be a path, builtin:<name> or a mapping")
    if ref.startswith("builtin:"):
        return ref, ref
    path = Path(ref)
    if not path.is_absolute() and base is not None:
        path = base / path
    if not path.exists():
        raise FileNotFoundError(str(path))
    return load_yaml(path.read_text()), ref


def scenario_from_dict(d: dict, base: Path | None = None) -> ScenarioFile:
    if not isinstance(d, dict):
        raise FormatError("scenario: expected a mapping")
    it = d.get("iterations") or {}
    wf_raw, wf_ref = _resolve(_req(d, "workflow", "scenario"), base, "workflow")
    if wf_raw == "builtin:stem":
        params = StemParams(
            inner_iterations=_num(it, "inner", StemParams.inner_iterations, int),
            outer_iterations=_num(it, "outer", StemParams.outer_iterations, int))
        workflow = stem_workflow(params)
    elif isinstance(wf_raw, str):
        raise FormatError(f"scenario: unknown builtin workflow {wf_raw!r}")
    else:
        workflow = workflow_from_dict(wf_raw)
        if it:
            workflow = replace(workflow,
                               inner_iterations=_num(it, "inner", workflow.inner_iterations, int),
                               outer_iterations=_num(it, "outer", workflow.outer_iterations, int))
    cat_raw, cat_ref = _resolve(_req(d, "catalog", "scenario"), base, "catalog")
    if cat_raw == "builtin:sample":
        catalog = sample_catalog()
    elif isinstance(cat_raw, str):
        raise FormatError(f"scenario: unknown builtin catalog {cat_raw!r}")
    else:
        catalog = catalog_from_dict(cat_raw)
    c = d.get("constraints") or {}
    comp = c.get("compression") or {}
    sim = d.get("simulation") or {}
    return ScenarioFile(
        name=str(d.get("name", "scenario")),
        workflow=workflow,
        catalog=catalog,
        objective=objective_from_dict(d.get("objective")),
        pins={str(k): str(v) for k, v in (c.get("pins") or {}).items()},
        spot={str(k): bool(v) for k, v in (c.get("spot") or {}).items()},
        allow_sites={str(k): tuple(v) for k, v in (c.get("allow_sites") or {}).items()},
        compression_policy=_enum(CompressionPolicy, c.get("compression_policy", "off"),
                                 "constraints"),
        compression=Compression(_num(comp, "ratio", FAST_CODEC.ratio),
                                _num(comp, "compress_throughput", FAST_CODEC.compress_throughput),
                                _num(comp, "decompress_throughput",
                                     FAST_CODEC.decompress_throughput)),
        brokered=bool(c.get("brokered", False)),
        critical_k=_num(c, "critical_k", 10, int),
        billing=_enum(Billing, sim.get("billing", "perSecond"), "simulation"),
        preemption=bool(sim.get("preemption", False)),
        seed=_num(d, "seed", 0, int),
        workflow_ref=wf_ref,
        catalog_ref=cat_ref,
    )


def scenario_to_dict(s: ScenarioFile) -> dict:
    return {
        "name": s.name,
        "workflow": s.workflow_ref if s.workflow_ref else workflow_to_dict(s.workflow),
        "iterations": {"inner": s.workflow.inner_iterations, "outer": s.workflow.outer_iterations},
        "catalog": s.catalog_ref if s.catalog_ref else catalog_to_dict(s.catalog),
        "objective": objective_to_dict(s.objective),
        "constraints": {
            "pins": dict(s.pins),
            "spot": dict(s.spot),
            "allow_sites": {k: list(v) for k, v in s.allow_sites.items()},
            "compression_policy": s.compression_policy,
            "compression": {"ratio": float(s.compression.ratio),
                            "compress_throughput": float(s.compression.compress_throughput),
                            "decompress_throughput": float(s.compression.decompress_throughput)},
            "brokered": s.brokered,
            "critical_k": s.critical_k,
        },
        "simulation": {"billing": s.billing, "preemption": s.preemption},
        "seed": s.seed,
    }


def load_scenario(path: str | Path) -> ScenarioFile:
    path = Path(path)
    return scenario_from_dict(load_yaml(path.read_text()), path.parent)


def builtin_scenario_path(name: str) -> Path:
    return DATA_DIR / "scenarios" / f"{name}.yaml"


def load_workflow(path: str | Path) -> WorkflowGraph:
    return workflow_from_dict(load_yaml(Path(path).read_text()))


def load_catalog(path: str | Path) -> Catalog:
    return catalog_from_dict(load_yaml(Path(path).read_text()))


def finite_or_none(x: float):
    return x if math.isfinite(x) else None
