"""Data-flow lifecycle (DFL) analysis of I/O traces.

Trace events are folded into a bipartite graph of task instances and data
objects. Edge times are summed exactly (as rationals) so that ingesting a
trace in one pass or in pieces followed by :func:`merge` yields equal graphs.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from . import kernels
from .catalog import Catalog, Compression, CompressionPolicy, codec_for, transfer_time
from .errors import CyclicLifecycle, EmptyGraph, MalformedEvent, NonMonotoneTimestamp

TRACE_HEADER = ("timestamp", "task", "op", "data", "bytes", "duration")


@dataclass(frozen=True)
class TraceEvent:
    timestamp: float
    task: str
    op: str
    data: str
    bytes: int
    duration: float


@dataclass
class EdgeStats:
    total_bytes: int = 0
    op_count: int = 0
    _time: Fraction = field(default_factory=Fraction)

    @property
    def total_time(self) -> float:
        return float(self._time)

    def add(self, nbytes: int, seconds: float):
        self.total_bytes += nbytes
        self.op_count += 1
        self._time += Fraction(seconds)

    def merged(self, other: "EdgeStats") -> "EdgeStats":
        return EdgeStats(self.total_bytes + other.total_bytes, self.op_count + other.op_count,
                         self._time + other._time)

    def __eq__(self, other):
        if not isinstance(other, EdgeStats):
            return NotImplemented
        return (self.total_bytes, self.op_count, self._time) == (
            other.total_bytes, other.op_count, other._time)


def task_node(name: str) -> str:
    return f"task:{name}"


def data_node(name: str) -> str:
    return f"data:{name}"


@dataclass
class DFLGraph:
    tasks: set[str] = field(default_factory=set)
    data: set[str] = field(default_factory=set)
    writes: dict[tuple[str, str], EdgeStats] = field(default_factory=dict)  # (task, data)
    reads: dict[tuple[str, str], EdgeStats] = field(default_factory=dict)   # (data, task)

    def edges(self):
        """All edges as (edge id, src node, dst node, stats), sorted by id."""
        out = []
        for (t, d), st in self.writes.items():
            out.append((f"{task_node(t)}->{data_node(d)}", task_node(t), data_node(d), st))
        for (d, t), st in self.reads.items():
            out.append((f"{data_node(d)}->{task_node(t)}", data_node(d), task_node(t), st))
        out.sort(key=lambda e: e[0])
        return out

    def is_empty(self) -> bool:
        return not self.tasks and not self.data


def _check(i: int, ev: TraceEvent):
    if ev.op not in ("read", "write"):
        raise MalformedEvent(i, f"op must be read or write, got {ev.op!r}")
    if ev.bytes < 0 or ev.duration < 0 or ev.timestamp < 0:
        raise MalformedEvent(i, "negative field")
    if not ev.task or not ev.data:
        raise MalformedEvent(i, "empty task or data id")


def ingest(events: Iterable[TraceEvent]) -> DFLGraph:
    g = DFLGraph()
    last_ts: dict[str, float] = {}
    for i, ev in enumerate(events):
        _check(i, ev)
        prev = last_ts.get(ev.task)
        if prev is not None and ev.timestamp < prev:
            raise NonMonotoneTimestamp(i, ev.task)
        last_ts[ev.task] = ev.timestamp
        g.tasks.add(ev.task)
        g.data.add(ev.data)
        if ev.op == "write":
            g.writes.setdefault((ev.task, ev.data), EdgeStats()).add(ev.bytes, ev.duration)
        else:
            g.reads.setdefault((ev.data, ev.task), EdgeStats()).add(ev.bytes, ev.duration)
    return g


def merge(a: DFLGraph, b: DFLGraph) -> DFLGraph:
    out = DFLGraph(a.tasks | b.tasks, a.data | b.data)
    for src, dst in ((a.writes, out.writes), (b.writes, out.writes),
                     (a.reads, out.reads), (b.reads, out.reads)):
        for k, st in src.items():
            dst[k] = dst[k].merged(st) if k in dst else st.merged(EdgeStats())
    return out


def conservation_issues(g: DFLGraph) -> list[tuple[str, int, int]]:
    """Data objects read more bytes than were written: (data, read, written)."""
    written: dict[str, int] = {}
    read: dict[str, int] = {}
    for (_, d), st in g.writes.items():
        written[d] = written.get(d, 0) + st.total_bytes
    for (d, _), st in g.reads.items():
        read[d] = read.get(d, 0) + st.total_bytes
    return [(d, read[d], written.get(d, 0)) for d in sorted(read) if read[d] > written.get(d, 0)]


@dataclass(frozen=True)
class SeverityEntry:
    edge: str
    src: str
    dst: str
    score: float
    share: float
    bytes: int


@dataclass(frozen=True)
class SeverityReport:
    entries: tuple[SeverityEntry, ...]
    critical_path: float


def _topo(nodes: list[str], succ: dict[str, list[str]]) -> list[str]:
    indeg = dict.fromkeys(nodes, 0)
    for u in nodes:
        for v in succ.get(u, ()):
            indeg[v] += 1
    stack = sorted((n for n in nodes if indeg[n] == 0), reverse=True)
    order = []
    while stack:
        u = stack.pop()
        order.append(u)
        for v in succ.get(u, ()):
            indeg[v] -= 1
            if indeg[v] == 0:
                stack.append(v)
    if len(order) != len(nodes):
        raise CyclicLifecycle("lifecycle graph has a cycle; severity needs a DAG")
    return order


def longest_path(g: DFLGraph, backend: str | None = None) -> float:
    """Duration of the longest time-weighted path through the lifecycle graph."""
    edges = g.edges()
    nodes = sorted({task_node(t) for t in g.tasks} | {data_node(d) for d in g.data})
    index = {n: i for i, n in enumerate(nodes)}
    succ: dict[str, list[str]] = {}
    for _, s, d, _ in edges:
        succ.setdefault(s, []).append(d)
    order = [index[n] for n in _topo(nodes, succ)]
    ptr = [0] * (len(nodes) + 1)
    for _, s, _, _ in edges:
        ptr[index[s] + 1] += 1
    for i in range(len(nodes)):
        ptr[i + 1] += ptr[i]
    fill = list(ptr[:-1])
    dst = [0] * len(edges)
    weight = [0.0] * len(edges)
    for _, s, d, st in edges:
        k = fill[index[s]]
        fill[index[s]] += 1
        dst[k] = index[d]
        weight[k] = st.total_time
    return kernels.longest_path(order, ptr, dst, weight, backend=backend)


def severity(g: DFLGraph) -> SeverityReport:
    """Rank edges by their measured time, with each edge's share of the longest path."""
    if g.is_empty():
        raise EmptyGraph("severity needs a non-empty lifecycle graph")
    crit = longest_path(g)
    entries = []
    for eid, s, d, st in g.edges():
        score = st.total_time
        share = score / crit if crit > 0 else 0.0
        entries.append(SeverityEntry(eid, s, d, score, min(share, 1.0), st.total_bytes))
    entries.sort(key=lambda e: (-e.score, e.edge))
    return SeverityReport(tuple(entries), crit)


def flow_projection(volume: float, compressible: bool, producer_site: str, consumer_site: str,
                    catalog: Catalog, policy: CompressionPolicy = CompressionPolicy.OFF,
                    compression: Compression | None = None, storage_term: bool = False) -> float:
    """Projected seconds to move one flow between two candidate sites.

    Colocated flows cost nothing unless ``storage_term`` is on and the site
    declares a storage throughput.
    """
    codec = None
    if compression is not None:
        codec = codec_for(catalog, policy, compression, producer_site, consumer_site, compressible)
    seconds = transfer_time(catalog, producer_site, consumer_site, volume, codec)
    if storage_term and producer_site == consumer_site:
        bw = catalog.site(consumer_site).storage_throughput
        if bw:
            seconds += volume / bw
    return seconds


def _fmt(x: float) -> str:
    return repr(float(x)) if x != int(x) else str(int(x))


def export_dot(g: DFLGraph) -> str:
    lines = ["digraph dfl {"]
    for t in sorted(g.tasks):
        lines.append(f'  "{task_node(t)}" [shape=box, label="{t}"];')
    for d in sorted(g.data):
        lines.append(f'  "{data_node(d)}" [shape=ellipse, label="{d}"];')
    for _, s, d, st in g.edges():
        lines.append(f'  "{s}" -> "{d}" [label="{st.total_bytes} B / {_fmt(st.total_time)} s"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def severity_csv(report: SeverityReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "edge", "src", "dst", "bytes", "seconds", "share"])
    for i, e in enumerate(report.entries, 1):
        w.writerow([i, e.edge, e.src, e.dst, e.bytes, repr(e.score), repr(e.share)])
    return buf.getvalue()


def read_trace(text: str) -> list[TraceEvent]:
    """Parse the line-oriented trace format (CSV with a fixed header row)."""
    rows = csv.reader(io.StringIO(text))
    header = None
    out = []
    for lineno, row in enumerate(rows, 1):
        if not row or row[0].startswith("#"):
            continue
        if header is None:
            header = tuple(c.strip() for c in row)
            if header != TRACE_HEADER:
                raise MalformedEvent(0, f"bad header {','.join(header)}")
            continue
        if len(row) != len(TRACE_HEADER):
            raise MalformedEvent(len(out), f"line {lineno}: expected {len(TRACE_HEADER)} fields")
        try:
            out.append(TraceEvent(float(row[0]), row[1], row[2], row[3], int(row[4]),
                                  float(row[5])))
        except ValueError as exc:
            raise MalformedEvent(len(out), f"line {lineno}: {exc}") from None
    return out


def write_trace(events: Iterable[TraceEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for ev in events:
        w.writerow([repr(float(ev.timestamp)), ev.task, ev.op, ev.data, ev.bytes,
                    repr(float(ev.duration))])
    return buf.getvalue()
