"""Deterministic discrete-event simulation of a placed instance graph.

Model rules:

* an offer runs one instance at a time; waiting instances start in order of
  readiness, then instance id;
* an offer cannot start work before its provisioning delay has passed;
* transfers between two sites go through that pair's link one at a time,
  transfers issued at the same moment are ordered by edge id; a site
  talking to itself without an explicit self-link moves data instantly;
* with preemption enabled, spot-billed runs draw an exponential lifetime
  from the seeded generator. A preempted run loses its progress, the broker
  picks a replacement offer, inputs are fetched again if the site changed,
  and the instance restarts from scratch.

Simultaneous events are handled in the order: task ends, preemptions,
transfer requests, arrivals, dispatches.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .broker import Requirement, replan_on_preemption
from .catalog import (Catalog, Compression, CompressionPolicy, codec_for, compute_time,
                      transfer_cost, transfer_time, wire_bytes)
from .errors import IncompletePlacement, NoFeasibleOffer
from .objective import Objective
from .scheduler import Placement
from .workflow import InstanceGraph

END, PREEMPT, XFER, ARRIVE, DISPATCH = 0, 1, 2, 3, 4

FAST_CODEC = Compression(ratio=10.0, compress_throughput=2e9, decompress_throughput=4e9)


class Billing(str, Enum):
    PER_SECOND = "perSecond"
    PER_HOUR = "perHour"


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    billing: Billing = Billing.PER_SECOND
    compression_policy: CompressionPolicy = CompressionPolicy.OFF
    compression: Compression = FAST_CODEC
    preemption: bool = False
    # after this many losses an instance stays where it is and pays on-demand
    max_preemptions: int = 8

    def __post_init__(self):
        c = self.compression
        if c.ratio < 1 or c.compress_throughput <= 0 or c.decompress_throughput <= 0:
            raise ValueError("compression needs ratio >= 1 and positive throughputs")


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    subject: str
    data: tuple[tuple[str, object], ...] = ()

    def get(self, key, default=None):
        for k, v in self.data:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class TaskRecord:
    start: float
    end: float
    offer: str
    preemptions: int = 0


@dataclass(frozen=True)
class TransferRecord:
    edge: str
    src: str
    dst: str
    start: float
    end: float
    logical_bytes: float
    wire_bytes: float
    compressed: bool


@dataclass(frozen=True)
class LinkRecord:
    bytes: float
    logical_bytes: float
    seconds: float
    transfers: int


@dataclass(frozen=True)
class CostItem:
    kind: str           # "compute" or "egress"
    subject: str
    amount: float


@dataclass(frozen=True)
class SimReport:
    makespan: float
    total_cost: float
    total_energy: float
    per_task: dict[str, TaskRecord]
    per_link: dict[str, LinkRecord]
    transfers: tuple[TransferRecord, ...]
    cost_items: tuple[CostItem, ...]
    events: tuple[Event, ...] = field(default=())


def billed_seconds(seconds: float, billing: Billing) -> float:
    # rounding guards against 10.000000000000002 billing as 11 s
    if billing == Billing.PER_HOUR:
        return math.ceil(round(seconds / 3600.0, 9)) * 3600.0
    return float(math.ceil(round(seconds, 9)))


def billed_cost(seconds: float, price_per_hour: float, billing: Billing) -> float:
    return billed_seconds(seconds, billing) / 3600.0 * price_per_hour


def account_cost(events, catalog: Catalog, config: SimConfig) -> list[CostItem]:
    """Itemize compute and egress charges from an event log."""
    items = []
    for ev in events:
        if ev.kind in ("taskEnd", "preemption"):
            offer = catalog.offer(ev.get("offer"))
            price = offer.effective_price(bool(ev.get("spot")))
            items.append(CostItem("compute", ev.subject,
                                  billed_cost(ev.get("seconds"), price, config.billing)))
        elif ev.kind == "transferEnd" and ev.get("src") != ev.get("dst"):
            codec = config.compression if ev.get("compressed") else None
            items.append(CostItem("egress", ev.subject,
                                  transfer_cost(catalog, ev.get("src"), ev.get("dst"),
                                                ev.get("bytes"), codec)))
    return items


def _requirement(task, pinned_or_allowed):
    return Requirement(memory=task.memory, accelerators=task.accelerators,
                       spot_ok=task.spot_tolerant, site_allow=pinned_or_allowed)


def simulate(instances: InstanceGraph, placement: Placement, catalog: Catalog,
             config: SimConfig | None = None, objective: Objective | None = None,
             allow_sites: Mapping[str, tuple[str, ...]] | None = None) -> SimReport:
    config = config or SimConfig()
    objective = objective or Objective(time=1.0, cost=1.0)
    allow_sites = allow_sites or {}
    missing = [i for i in instances.instances if i not in placement.assignment]
    if missing:
        raise IncompletePlacement(missing)
    unknown = [i for i, o in placement.assignment.items()
               if i in instances.instances and o not in {x.id for x in catalog.offers}]
    if unknown:
        raise IncompletePlacement(unknown)
    for oid in set(placement.assignment.values()):
        catalog.site(catalog.offer(oid).site)

    rng = random.Random(config.seed)
    cur = {i: placement.assignment[i] for i in instances.instances}
    task_of = {i: inst.task for i, inst in instances.instances.items()}
    edge_by_id = {e.id: e for e in instances.edges}
    pending = {i: len(instances.inbound(i)) for i in instances.instances}
    avail = {o.id: o.provision_delay for o in catalog.offers}
    busy: set[str] = set()
    queues: dict[str, list] = {}
    link_free: dict[tuple[str, str], float] = {}
    busy_sum: dict[str, float] = {}
    first: dict[str, float] = {}
    last: dict[str, float] = {}
    attempt: dict[str, tuple[float, str, bool, float]] = {}
    first_start: dict[str, float] = {}
    end_time: dict[str, float] = {}
    preempted = dict.fromkeys(instances.instances, 0)
    tried: dict[str, list[str]] = {}
    on_demand_only: set[str] = set()
    transfers: list[TransferRecord] = []
    log: list[Event] = []
    heap: list = []

    def emit(t, kind, subject, **data):
        log.append(Event(t, kind, subject, tuple(data.items())))

    def enqueue(iid, t):
        o = cur[iid]
        heapq.heappush(queues.setdefault(o, []), (t, iid))
        emit(t, "taskReady", iid, offer=o)
        heapq.heappush(heap, (t, DISPATCH, o))

    def run_segment(o, start, seconds):
        busy_sum[o] = busy_sum.get(o, 0.0) + seconds
        if start < first.get(o, math.inf):
            first[o] = start
        if start + seconds > last.get(o, -math.inf):
            last[o] = start + seconds

    for iid in instances.instances:
        if pending[iid] == 0:
            enqueue(iid, 0.0)

    while heap:
        t, kind, key = heapq.heappop(heap)
        if kind == END:
            start, o, spot, seconds = attempt.pop(key)
            run_segment(o, start, seconds)
            busy.discard(o)
            end_time[key] = t
            emit(t, "taskEnd", key, offer=o, seconds=seconds, spot=spot)
            heapq.heappush(heap, (t, DISPATCH, o))
            for e in instances.outbound(key):
                heapq.heappush(heap, (t, XFER, e.id))
        elif kind == PREEMPT:
            start, o, spot, seconds = attempt.pop(key)
            run_segment(o, start, seconds)
            busy.discard(o)
            preempted[key] += 1
            emit(t, "preemption", key, offer=o, seconds=seconds, spot=spot)
            heapq.heappush(heap, (t, DISPATCH, o))
            task = task_of[key]
            tried.setdefault(key, []).append(o)
            allow = allow_sites.get(task.id)
            if task.pinned_site is not None:
                allow = (task.pinned_site,)
            new = o
            if preempted[key] < config.max_preemptions:
                try:
                    new = replan_on_preemption(
                        catalog.without(*tried[key][:-1]), _requirement(task, allow), objective,
                        1.0, o, est_duration_hours=max(task.work, 1e-9) / 3600.0).offer
                except NoFeasibleOffer:
                    pass
            if new == o:
                on_demand_only.add(key)
            cur[key] = new
            ready_at = t + catalog.offer(new).provision_delay
            avail[new] = max(avail[new], ready_at)
            emit(t, "reprovision", key, offer=new, available=ready_at)
            inbound = instances.inbound(key)
            if inbound and catalog.offer(new).site != catalog.offer(o).site:
                pending[key] = len(inbound)
                for e in inbound:
                    heapq.heappush(heap, (t, XFER, e.id))
            else:
                enqueue(key, t)
        elif kind == XFER:
            e = edge_by_id[key]
            src = catalog.offer(cur[e.producer]).site
            dst = catalog.offer(cur[e.consumer]).site
            codec = None
            if config.compression_policy != CompressionPolicy.OFF:
                codec = codec_for(catalog, config.compression_policy, config.compression,
                                  src, dst, e.compressible)
            dt = transfer_time(catalog, src, dst, e.volume, codec)
            if catalog.link(src, dst) is not None:
                lf = link_free.get((src, dst), 0.0)
                st = t if t > lf else lf
                arr = st + dt
                link_free[(src, dst)] = arr
            else:
                st = t
                arr = t + dt
            wire = wire_bytes(e.volume, codec)
            transfers.append(TransferRecord(e.id, src, dst, st, arr, e.volume, wire,
                                            codec is not None))
            emit(st, "transferStart", e.id, src=src, dst=dst)
            emit(arr, "transferEnd", e.id, src=src, dst=dst, bytes=e.volume, wire=wire,
                 compressed=codec is not None)
            heapq.heappush(heap, (arr, ARRIVE, e.id))
        elif kind == ARRIVE:
            c = edge_by_id[key].consumer
            pending[c] -= 1
            if pending[c] == 0:
                enqueue(c, t)
        else:
            o = key
            q = queues.get(o)
            if o in busy or not q:
                continue
            _, iid = heapq.heappop(q)
            busy.add(o)
            offer = catalog.offer(o)
            task = task_of[iid]
            st = t if t > avail[o] else avail[o]
            d = compute_time(offer, task)
            spot = offer.bills_spot(task) and iid not in on_demand_only
            first_start.setdefault(iid, st)
            emit(st, "taskStart", iid, offer=o)
            lifetime = math.inf
            if config.preemption and spot and offer.spot_preemption_rate > 0:
                lifetime = rng.expovariate(offer.spot_preemption_rate / 3600.0)
            if lifetime < d:
                attempt[iid] = (st, o, spot, lifetime)
                heapq.heappush(heap, (st + lifetime, PREEMPT, iid))
            else:
                attempt[iid] = (st, o, spot, d)
                heapq.heappush(heap, (st + d, END, iid))

    if len(end_time) != len(instances.instances):
        stuck = sorted(set(instances.instances) - set(end_time))
        raise IncompletePlacement(stuck)

    log.sort(key=lambda ev: ev.time)
    items = account_cost(log, catalog, config)
    total_energy = 0.0
    for o in sorted(busy_sum):
        offer = catalog.offer(o)
        idle = max(last[o] - first[o] - busy_sum[o], 0.0)
        total_energy += offer.power * busy_sum[o] + offer.idle_power * idle

    per_link: dict[str, list] = {}
    for tr in transfers:
        if catalog.link(tr.src, tr.dst) is None:
            continue
        acc = per_link.setdefault(f"{tr.src}->{tr.dst}", [0.0, 0.0, 0.0, 0])
        acc[0] += tr.wire_bytes
        acc[1] += tr.logical_bytes
        acc[2] += tr.end - tr.start
        acc[3] += 1
    per_task = {i: TaskRecord(first_start[i], end_time[i], cur[i], preempted[i])
                for i in instances.instances}
    return SimReport(
        makespan=max(end_time.values(), default=0.0),
        total_cost=math.fsum(c.amount for c in items),
        total_energy=total_energy,
        per_task=per_task,
        per_link={k: LinkRecord(*v) for k, v in sorted(per_link.items())},
        transfers=tuple(transfers),
        cost_items=tuple(items),
        events=tuple(log),
    )


def objective_value(report: SimReport, objective: Objective) -> float:
    return objective.score(report.makespan, report.total_cost, report.total_energy)
