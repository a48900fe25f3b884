"""Sites, compute offers and network links of the edge/HPC/cloud fabric.

Units: compute in CU and CU/s, memory and volumes in bytes, bandwidth in
bytes/s, prices in dollars/hour, egress in dollars/byte, power in watts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import InfeasibleOffer, UnknownSite
from .workflow import Task


class SiteClass(str, Enum):
    EDGE = "edge"
    FACILITY_HPC = "facilityHPC"
    CLOUD_REGION = "cloudRegion"


@dataclass(frozen=True)
class Site:
    id: str
    cls: SiteClass
    provider: str | None = None
    # optional local storage bandwidth (bytes/s); unused unless a caller asks for it
    storage_throughput: float | None = None

    @property
    def is_cloud(self) -> bool:
        return self.cls == SiteClass.CLOUD_REGION


@dataclass(frozen=True)
class Offer:
    id: str
    site: str
    cpu_units: float
    memory: float = 0.0
    accelerators: int = 0
    price_on_demand: float = 0.0
    price_spot: float | None = None
    spot_preemption_rate: float = 0.0
    provision_delay: float = 0.0
    power: float = 0.0
    idle_power: float = 0.0
    # capacity sold only as preemptible (e.g. a spot-only container pool)
    spot_only: bool = False

    def effective_price(self, spot: bool) -> float:
        if spot and self.price_spot is not None:
            return self.price_spot
        return self.price_on_demand

    def bills_spot(self, task: Task) -> bool:
        return task.spot_tolerant and self.price_spot is not None


@dataclass(frozen=True)
class Link:
    src: str
    dst: str
    bandwidth: float
    latency: float = 0.0
    egress_fee: float = 0.0


@dataclass(frozen=True)
class Compression:
    """Codec knob: wire bytes shrink by ``ratio``; both ends pay codec time."""

    ratio: float = 10.0
    compress_throughput: float = math.inf
    decompress_throughput: float = math.inf


@dataclass(frozen=True)
class Catalog:
    sites: tuple[Site, ...]
    offers: tuple[Offer, ...]
    links: tuple[Link, ...] = ()
    default_link: Link = Link("*", "*", 125_000_000.0, 0.1, 0.0)
    _site_map: dict = field(default=None, init=False, repr=False, compare=False)
    _link_map: dict = field(default=None, init=False, repr=False, compare=False)
    _offer_map: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "offers", tuple(sorted(self.offers, key=lambda o: o.id)))
        object.__setattr__(self, "sites", tuple(sorted(self.sites, key=lambda s: s.id)))
        object.__setattr__(self, "links", tuple(sorted(self.links, key=lambda l: (l.src, l.dst))))
        object.__setattr__(self, "_site_map", {s.id: s for s in self.sites})
        object.__setattr__(self, "_link_map", {(l.src, l.dst): l for l in self.links})
        object.__setattr__(self, "_offer_map", {o.id: o for o in self.offers})

    def site(self, site_id: str) -> Site:
        try:
            return self._site_map[site_id]
        except KeyError:
            raise UnknownSite(site_id) from None

    def offer(self, offer_id: str) -> Offer:
        return self._offer_map[offer_id]

    def has_site(self, site_id: str) -> bool:
        return site_id in self._site_map

    def link(self, src: str, dst: str) -> Link | None:
        """The link used between two sites; None for a site talking to itself."""
        self.site(src)
        self.site(dst)
        found = self._link_map.get((src, dst))
        if found is not None:
            return found
        if src == dst:
            return None
        return self.default_link

    def without(self, *offer_ids: str) -> "Catalog":
        drop = set(offer_ids)
        return Catalog(self.sites, tuple(o for o in self.offers if o.id not in drop),
                       self.links, self.default_link)

    def problems(self) -> list[str]:
        """Invariant violations as readable strings; empty when valid."""
        out = []
        if len(self._site_map) != len(self.sites):
            out.append("duplicate site id")
        if len(self._offer_map) != len(self.offers):
            out.append("duplicate offer id")
        for o in self.offers:
            if o.site not in self._site_map:
                out.append(f"offer {o.id}: unknown site {o.site}")
            if o.cpu_units <= 0:
                out.append(f"offer {o.id}: cpu_units must be > 0")
            nums = (o.memory, o.accelerators, o.price_on_demand, o.spot_preemption_rate,
                    o.provision_delay, o.power, o.idle_power)
            if any(v < 0 for v in nums) or (o.price_spot is not None and o.price_spot < 0):
                out.append(f"offer {o.id}: negative value")
            if o.price_spot is not None and o.price_spot > o.price_on_demand:
                out.append(f"offer {o.id}: spot price above on-demand")
        for l in self.links:
            for end in (l.src, l.dst):
                if end not in self._site_map:
                    out.append(f"link {l.src}->{l.dst}: unknown site {end}")
            if l.bandwidth <= 0 or l.latency < 0 or l.egress_fee < 0:
                out.append(f"link {l.src}->{l.dst}: bad bandwidth/latency/fee")
            if l.src == l.dst and l.egress_fee != 0:
                out.append(f"link {l.src}->{l.dst}: intra-site egress must be 0")
        d = self.default_link
        if d.bandwidth <= 0 or d.latency < 0 or d.egress_fee < 0:
            out.append("default link: bad bandwidth/latency/fee")
        return out


class CompressionPolicy(str, Enum):
    OFF = "off"
    CROSS_SITE_DOWNLOADS = "crossSiteDownloads"
    ALL_CROSS_SITE = "allCrossSite"


def codec_for(catalog: Catalog, policy: CompressionPolicy, params: Compression,
              src: str, dst: str, compressible: bool) -> Compression | None:
    """The codec applied to a transfer under ``policy``, or None."""
    if not compressible or src == dst or policy == CompressionPolicy.OFF:
        return None
    if policy == CompressionPolicy.CROSS_SITE_DOWNLOADS:
        if not catalog.site(src).is_cloud or catalog.site(dst).is_cloud:
            return None
    return params


def infeasibility(offer: Offer, task: Task) -> str:
    """Why ``offer`` cannot host ``task``; empty string when it can."""
    if offer.memory < task.memory:
        return "memory"
    if offer.accelerators < task.accelerators:
        return "accelerators"
    if task.pinned_site is not None and offer.site != task.pinned_site:
        return "pinned elsewhere"
    if offer.spot_only and not task.spot_tolerant:
        return "spot-only capacity"
    return ""


def feasible_offers(catalog: Catalog, task: Task) -> list[Offer]:
    return [o for o in catalog.offers if not infeasibility(o, task)]


def transfer_time(catalog: Catalog, src: str, dst: str, volume: float,
                  compression: Compression | None = None) -> float:
    link = catalog.link(src, dst)
    if link is None:
        return 0.0
    if compression is None:
        return link.latency + volume / link.bandwidth
    wire = volume / compression.ratio
    return (link.latency + volume / compression.compress_throughput
            + wire / link.bandwidth + wire / compression.decompress_throughput)


def wire_bytes(volume: float, compression: Compression | None) -> float:
    return volume if compression is None else volume / compression.ratio


def transfer_cost(catalog: Catalog, src: str, dst: str, volume: float,
                  compression: Compression | None = None) -> float:
    link = catalog.link(src, dst)
    if link is None or src == dst:
        return 0.0
    return link.egress_fee * wire_bytes(volume, compression)


def compute_time(offer: Offer, task: Task) -> float:
    reason = infeasibility(offer, task)
    if reason:
        raise InfeasibleOffer(offer.id, task.id, reason)
    return task.work / offer.cpu_units


def energy(offer: Offer, busy_seconds: float, idle_seconds: float) -> float:
    """Joules drawn by ``offer`` over the given busy and idle time."""
    return offer.power * busy_seconds + offer.idle_power * idle_seconds
