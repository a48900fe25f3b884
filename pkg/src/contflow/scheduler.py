"""Single-pass greedy placement driven by data-flow projections.

Instances are visited once in topological order. For each one two
candidates are scored: the *locality* candidate sits next to the data of
its heaviest inbound flow, the *parallelism* candidate is the best offer
anywhere assuming inbound flows move concurrently (their cost is the
slowest flow, not the sum). The cheaper of the two wins; ties keep
locality. The heaviest flows are looked at up front: their data location
is fixed when the producer is pinned, and a producer feeding a pinned
consumer through one of them also pays for that outbound flow.

Work per instance is bounded by (catalog size) x (inbound edges), so the
whole pass is linear in instances plus edges.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Mapping

from .broker import Requirement, select_offer
from .catalog import (Catalog, Compression, CompressionPolicy, Offer, codec_for, compute_time,
                      energy, feasible_offers, transfer_cost, transfer_time)
from .errors import NoFeasibleOffer
from .objective import Objective
from .workflow import InstanceEdge, InstanceGraph, Task, topo_order

LOCALITY = "locality"
PARALLELISM = "parallelism"
PINNED = "pinned"
ONLY_CANDIDATE = "only-candidate"


@dataclass(frozen=True)
class Flow:
    edge: str
    site: str            # where the other end of the flow lives
    volume: float
    compressible: bool = False
    inbound: bool = True


@dataclass(frozen=True)
class ScheduleFlags:
    compression_policy: CompressionPolicy = CompressionPolicy.OFF
    compression: Compression = field(default_factory=Compression)
    brokered: bool = False
    critical_k: int = 10
    allow_sites: Mapping[str, tuple[str, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class Decision:
    instance: str
    choice: str
    offer: str
    considered: tuple[str, ...]
    locality: tuple[str, float] | None = None
    parallelism: tuple[str, float] | None = None
    brokered: bool = False


@dataclass(frozen=True)
class Placement:
    assignment: dict[str, str]
    data_location: dict[str, str] = field(default_factory=dict)
    decisions: tuple[Decision, ...] = ()

    def site_of(self, catalog: Catalog, instance: str) -> str:
        return catalog.offer(self.assignment[instance]).site


def flow_terms(offer: Offer, flows, catalog: Catalog,
               policy: CompressionPolicy = CompressionPolicy.OFF,
               compression: Compression | None = None) -> tuple[float, float]:
    """(slowest projected flow in seconds, summed egress dollars) for flows at ``offer``."""
    slowest = 0.0
    egress = 0.0
    for f in flows:
        src, dst = (f.site, offer.site) if f.inbound else (offer.site, f.site)
        codec = None
        if compression is not None:
            codec = codec_for(catalog, policy, compression, src, dst, f.compressible)
        t = transfer_time(catalog, src, dst, f.volume, codec)
        if t > slowest:
            slowest = t
        egress += transfer_cost(catalog, src, dst, f.volume, codec)
    return slowest, egress


def _combine(task, offer, seconds, slowest, egress, wait, objective):
    runtime = seconds + slowest
    dollars = runtime / 3600.0 * offer.effective_price(task.spot_tolerant) + egress
    return objective.score(wait + runtime, dollars, energy(offer, seconds, 0.0))


def score_candidate(task: Task, offer: Offer, flows, objective: Objective, catalog: Catalog,
                    policy: CompressionPolicy = CompressionPolicy.OFF,
                    compression: Compression | None = None, wait: float = 0.0) -> float:
    """Objective score of running ``task`` on ``offer`` with the given flows.

    ``wait`` is projected queueing before the offer frees up; it only adds to
    the time term.
    """
    seconds = compute_time(offer, task)
    slowest, egress = flow_terms(offer, flows, catalog, policy, compression)
    return _combine(task, offer, seconds, slowest, egress, wait, objective)


def critical_flows(instances: InstanceGraph, estimates: Mapping[str, float] | None = None,
                   k: int = 10) -> list[InstanceEdge]:
    """The ``k`` heaviest edges, by volume then edge id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    est = estimates or {}
    return heapq.nsmallest(k, instances.edges, key=lambda e: (-est.get(e.id, e.volume), e.id))


def _allowed(catalog: Catalog, task: Task, flags: ScheduleFlags) -> list[Offer]:
    offers = feasible_offers(catalog, task)
    allow = flags.allow_sites.get(task.id)
    if allow is not None:
        offers = [o for o in offers if o.site in allow]
    return offers


def schedule(instances: InstanceGraph, catalog: Catalog, objective: Objective,
             estimates: Mapping[str, float] | None = None,
             flags: ScheduleFlags | None = None) -> Placement:
    flags = flags or ScheduleFlags()
    est = estimates or {}
    codec = flags.compression if flags.compression_policy != CompressionPolicy.OFF else None
    order = topo_order(instances)

    candidates: dict[str, list[Offer]] = {}
    assignment: dict[str, str] = {}
    site_of: dict[str, str] = {}
    data_location: dict[str, str] = {}
    lookahead: dict[str, list[Flow]] = {}
    decisions: list[Decision] = []
    # projected timeline: when each offer frees up and each instance finishes
    offer_free = {o.id: o.provision_delay for o in catalog.offers}
    finish: dict[str, float] = {}

    for e in critical_flows(instances, est, flags.critical_k):
        prod = instances.instances[e.producer].task
        cons = instances.instances[e.consumer].task
        if prod.pinned_site is not None:
            data_location[e.id] = prod.pinned_site
        if cons.pinned_site is not None:
            lookahead.setdefault(e.producer, []).append(
                Flow(e.id, cons.pinned_site, est.get(e.id, e.volume), e.compressible, False))

    for iid in order:
        task = instances.instances[iid].task
        cands = candidates.get(task.id)
        if cands is None:
            cands = candidates[task.id] = _allowed(catalog, task, flags)
        if not cands:
            raise NoFeasibleOffer(iid)

        inbound = instances.inbound(iid)
        flows = [Flow(e.id, site_of[e.producer], est.get(e.id, e.volume), e.compressible)
                 for e in inbound]
        flows.extend(lookahead.get(iid, ()))
        base = max((finish[e.producer] for e in inbound), default=0.0)
        scores: dict[str, float] = {}
        starts: dict[str, float] = {}

        def score(o: Offer) -> float:
            if o.id not in scores:
                seconds = compute_time(o, task)
                slowest, egress = flow_terms(o, flows, catalog, flags.compression_policy, codec)
                ready = base + slowest
                start = offer_free[o.id] if offer_free[o.id] > ready else ready
                starts[o.id] = start
                scores[o.id] = _combine(task, o, seconds, slowest, egress, start - ready,
                                        objective)
            return scores[o.id]

        def best(offers):
            return min(offers, key=lambda o: (score(o), o.id))

        considered = tuple(o.id for o in cands)
        if task.pinned_site is not None or len(cands) == 1:
            chosen = best(cands)
            decision = Decision(iid, PINNED if task.pinned_site is not None else ONLY_CANDIDATE,
                                chosen.id, considered)
        else:
            heavy = [f for f in flows if f.inbound and f.volume > 0]
            if heavy:
                anchor = min(heavy, key=lambda f: (-f.volume, f.edge))
                local = [o for o in cands if o.site == anchor.site]
                loc = best(local) if local else None
            else:
                loc = min(cands, key=lambda o: (o.effective_price(task.spot_tolerant),
                                                score(o), o.id))
            brokered = False
            par = None
            if flags.brokered:
                cloud_sites = tuple(sorted({o.site for o in cands if catalog.site(o.site).is_cloud}))
                if cloud_sites:
                    req = Requirement(memory=task.memory, accelerators=task.accelerators,
                                      spot_ok=task.spot_tolerant, site_allow=cloud_sites)
                    pick = select_offer(catalog, req, objective, max(task.work, 1e-9) / 3600.0)
                    par = catalog.offer(pick.offer)
                    brokered = True
            if par is None:
                par = best(cands)
            if loc is not None and score(loc) <= score(par):
                chosen, choice = loc, LOCALITY
            else:
                chosen, choice = par, PARALLELISM
            decision = Decision(iid, choice, chosen.id, considered,
                                (loc.id, score(loc)) if loc is not None else None,
                                (par.id, score(par)), brokered)

        decisions.append(decision)
        score(chosen)
        finish[iid] = starts[chosen.id] + compute_time(chosen, task)
        offer_free[chosen.id] = finish[iid]
        assignment[iid] = chosen.id
        site_of[iid] = chosen.site
        for e in instances.outbound(iid):
            data_location.setdefault(e.id, chosen.site)

    return Placement(dict(sorted(assignment.items())), dict(sorted(data_location.items())),
                     tuple(decisions))
