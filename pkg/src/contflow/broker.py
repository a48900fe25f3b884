"""Declarative offer selection across providers and regions.

A :class:`Requirement` states minimums; :func:`select_offer` returns the
feasible offer with the lowest objective score. When a spot instance is
lost, :func:`replan_on_preemption` repeats the choice without it for the
remaining share of the work.
"""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import Catalog, Offer, energy
from .errors import NoFeasibleOffer
from .objective import Objective


@dataclass(frozen=True)
class Requirement:
    cpu_units: float = 0.0
    memory: float = 0.0
    accelerators: int = 0
    spot_ok: bool = False
    max_price: float | None = None
    site_allow: tuple[str, ...] | None = None

    def __post_init__(self):
        if min(self.cpu_units, self.memory, self.accelerators) < 0:
            raise ValueError("requirement minimums must be >= 0")

    @property
    def baseline_cu(self) -> float:
        # a zero minimum means "score raw offer speed": work is then given in CU-hours
        return self.cpu_units if self.cpu_units > 0 else 1.0


@dataclass(frozen=True)
class BrokerChoice:
    offer: str
    score: float
    est_start: float
    est_cost: float
    used_spot: bool
    alternatives: tuple[tuple[str, float], ...] = ()


def satisfies(offer: Offer, req: Requirement) -> bool:
    if offer.cpu_units < req.cpu_units or offer.memory < req.memory:
        return False
    if offer.accelerators < req.accelerators:
        return False
    if req.site_allow is not None and offer.site not in req.site_allow:
        return False
    if offer.spot_only and not req.spot_ok:
        return False
    if req.max_price is not None and offer.effective_price(req.spot_ok) > req.max_price:
        return False
    return True


def broker_score(offer: Offer, req: Requirement, objective: Objective,
                 est_duration_hours: float) -> float:
    run_seconds = est_duration_hours * 3600.0 * (req.baseline_cu / offer.cpu_units)
    seconds = offer.provision_delay + run_seconds
    dollars = est_duration_hours * offer.effective_price(req.spot_ok)
    joules = energy(offer, run_seconds, 0.0)
    return objective.score(seconds, dollars, joules)


def select_offer(catalog: Catalog, req: Requirement, objective: Objective,
                 est_duration_hours: float) -> BrokerChoice:
    if est_duration_hours <= 0:
        raise ValueError("estimated duration must be > 0")
    ranked = sorted(((broker_score(o, req, objective, est_duration_hours), o.id, o)
                     for o in catalog.offers if satisfies(o, req)),
                    key=lambda r: (r[0], r[1]))
    if not ranked:
        raise NoFeasibleOffer(req)
    score, _, best = ranked[0]
    used_spot = req.spot_ok and best.price_spot is not None
    return BrokerChoice(
        offer=best.id,
        score=score,
        est_start=best.provision_delay,
        est_cost=best.effective_price(req.spot_ok),
        used_spot=used_spot,
        alternatives=tuple((oid, s) for s, oid, _ in ranked[1:]),
    )


def replan_on_preemption(catalog: Catalog, req: Requirement, objective: Objective,
                         remaining_work_fraction: float, excluded_offer: str,
                         est_duration_hours: float = 1.0) -> BrokerChoice:
    """Choose a replacement for ``excluded_offer`` for the unfinished share of the job."""
    if not 0 < remaining_work_fraction <= 1:
        raise ValueError("remaining_work_fraction must be in (0, 1]")
    return select_offer(catalog.without(excluded_offer), req, objective,
                        est_duration_hours * remaining_work_fraction)
