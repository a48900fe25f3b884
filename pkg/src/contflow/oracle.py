"""Exhaustive placement search over small instances.

Packs an (instances, catalog, config) triple into flat arrays and replays
the simulator's no-preemption rules for every feasible placement through
the kernel in :mod:`contflow.kernels`. Intended for instances with a
handful of tasks; the search space is the product of per-instance
feasible offer counts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import kernels
from .catalog import Catalog, CompressionPolicy, codec_for, feasible_offers, transfer_cost, transfer_time
from .objective import Objective
from .scheduler import Placement
from .sim import SimConfig, billed_cost
from .workflow import InstanceGraph


@dataclass
class StaticProblem:
    instance_ids: list[str]
    offer_ids: list[str]
    choices: list[list[int]]      # feasible offer indices per instance
    arrays: dict

    def encode(self, placement: Placement) -> np.ndarray:
        pos = {o: k for k, o in enumerate(self.offer_ids)}
        return np.array([pos[placement.assignment[i]] for i in self.instance_ids], dtype=np.int32)

    def decode(self, row) -> Placement:
        return Placement({i: self.offer_ids[int(k)] for i, k in zip(self.instance_ids, row)})

    @property
    def space_size(self) -> int:
        size = 1
        for c in self.choices:
            size *= len(c)
        return size


def build_problem(instances: InstanceGraph, catalog: Catalog, objective: Objective,
                  config: SimConfig | None = None,
                  allow_sites: Mapping[str, tuple[str, ...]] | None = None) -> StaticProblem:
    config = config or SimConfig()
    allow_sites = allow_sites or {}
    ids = list(instances.instances)
    index = {i: k for k, i in enumerate(ids)}
    offers = list(catalog.offers)
    sites = [s.id for s in catalog.sites]
    site_index = {s: k for k, s in enumerate(sites)}
    n, n_off, n_sites, m = len(ids), len(offers), len(sites), len(instances.edges)

    dur = np.full((n, n_off), np.inf)
    task_cost = np.zeros((n, n_off))
    choices = []
    for i, iid in enumerate(ids):
        task = instances.instances[iid].task
        allow = allow_sites.get(task.id)
        ok = {o.id for o in feasible_offers(catalog, task) if allow is None or o.site in allow}
        row = []
        for k, o in enumerate(offers):
            if o.id in ok:
                dur[i, k] = task.work / o.cpu_units
                price = o.effective_price(o.bills_spot(task))
                task_cost[i, k] = billed_cost(dur[i, k], price, config.billing)
                row.append(k)
        choices.append(row)

    edge_src = np.array([index[e.producer] for e in instances.edges], dtype=np.int32)
    edge_dst = np.array([index[e.consumer] for e in instances.edges], dtype=np.int32)
    indeg = np.bincount(edge_dst, minlength=n).astype(np.int32) if m else np.zeros(n, np.int32)
    order = np.argsort(edge_src, kind="stable")
    out_edges = order.astype(np.int32)
    counts = np.bincount(edge_src, minlength=n) if m else np.zeros(n, np.int64)
    out_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)

    xt = np.zeros((m, n_sites, n_sites))
    xc = np.zeros((m, n_sites, n_sites))
    link_used = np.zeros((n_sites, n_sites), dtype=np.int8)
    for a, s in enumerate(sites):
        for b, d in enumerate(sites):
            link_used[a, b] = catalog.link(s, d) is not None
    for k, e in enumerate(instances.edges):
        for a, s in enumerate(sites):
            for b, d in enumerate(sites):
                codec = None
                if config.compression_policy != CompressionPolicy.OFF:
                    codec = codec_for(catalog, config.compression_policy, config.compression,
                                      s, d, e.compressible)
                xt[k, a, b] = transfer_time(catalog, s, d, e.volume, codec)
                xc[k, a, b] = transfer_cost(catalog, s, d, e.volume, codec)

    arrays = dict(
        edge_src=edge_src, edge_dst=edge_dst, out_ptr=out_ptr, out_edges=out_edges,
        indeg=indeg, dur=np.ascontiguousarray(dur), task_cost=task_cost,
        offer_site=np.array([site_index[o.site] for o in offers], dtype=np.int32),
        offer_avail=np.array([o.provision_delay for o in offers], dtype=np.float64),
        offer_power=np.array([o.power for o in offers], dtype=np.float64),
        offer_idle=np.array([o.idle_power for o in offers], dtype=np.float64),
        xt=xt, xc=xc, link_used=link_used,
        weights=np.array(objective.normalized(), dtype=np.float64),
    )
    return StaticProblem(ids, [o.id for o in offers], choices, arrays)


def evaluate(problem: StaticProblem, placement: Placement, backend: str | None = None):
    """(makespan, cost, energy, objective) of one placement."""
    out = kernels.evaluate_placements(problem.arrays, problem.encode(placement), backend)
    return tuple(float(a[0]) for a in out)


@dataclass(frozen=True)
class OracleResult:
    best: Placement
    best_value: float
    evaluated: int


def brute_force(problem: StaticProblem, chunk: int = 8192,
                backend: str | None = None) -> OracleResult:
    """Minimum simulated objective over every feasible placement."""
    if any(not c for c in problem.choices):
        raise ValueError("some instance has no feasible offer")
    best_val = np.inf
    best_row = None
    seen = 0
    it = itertools.product(*problem.choices)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            break
        rows = np.array(block, dtype=np.int32).reshape(len(block), len(problem.choices))
        obj = kernels.evaluate_placements(problem.arrays, rows, backend)[3]
        k = int(np.argmin(obj))
        if obj[k] < best_val:
            best_val, best_row = float(obj[k]), rows[k].copy()
        seen += len(block)
    return OracleResult(problem.decode(best_row), best_val, seen)
