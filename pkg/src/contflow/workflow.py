"""Workflow graphs: tasks, data flows, loop structure and unrolling.

A :class:`WorkflowGraph` describes one iteration of a workflow plus two
nested loops. ``unroll`` expands it into an :class:`InstanceGraph`, a finite
DAG of task activations that the scheduler and simulator consume.

Activation rules used by ``unroll``:

* inner-loop tasks run ``outer_iterations * inner_iterations`` times,
  outer-only tasks ``outer_iterations`` times, all other tasks once;
* a flow between tasks of the same level pairs equal iterations;
* a flow from an outer task into the inner loop feeds the last inner
  iteration of the same outer iteration, and a flow leaving the inner loop
  comes from its last iteration;
* loop tails feed the head of the next iteration through zero-volume
  carried edges.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum

from .errors import CycleDetected, CycleWithinIteration


class TaskKind(str, Enum):
    INSTRUMENT = "instrument"
    INFERENCE = "inference"
    GENERATOR = "generator"
    TRAINER = "trainer"
    COMPRESSOR = "compressor"
    GENERIC = "generic"


@dataclass(frozen=True)
class Task:
    id: str
    kind: TaskKind = TaskKind.GENERIC
    work: float = 0.0
    memory: float = 0.0
    accelerators: int = 0
    pinned_site: str | None = None
    spot_tolerant: bool = False


@dataclass(frozen=True)
class FlowEdge:
    producer: str
    consumer: str
    volume: float = 0.0
    compressible: bool = False

    @property
    def id(self) -> str:
        return f"{self.producer}->{self.consumer}"


@dataclass(frozen=True)
class WorkflowGraph:
    tasks: tuple[Task, ...] = ()
    edges: tuple[FlowEdge, ...] = ()
    inner_loop: tuple[str, ...] = ()
    outer_loop: tuple[str, ...] = ()
    inner_iterations: int = 1
    outer_iterations: int = 1
    name: str = "workflow"

    def task(self, task_id: str) -> Task:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)

    @property
    def task_ids(self) -> list[str]:
        return [t.id for t in self.tasks]


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    detail: str = ""

    def __str__(self) -> str:
        text = f'{self.code}("{self.subject}")'
        return f"{text}: {self.detail}" if self.detail else text


def _find_cycle(nodes, succ) -> list[str] | None:
    """Return the nodes of some cycle in ``succ``, or None if acyclic."""
    color = dict.fromkeys(nodes, 0)
    for root in sorted(nodes):
        if color[root]:
            continue
        stack = [(root, iter(sorted(succ.get(root, ()))))]
        path = [root]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                color[node] = 2
            elif color.get(nxt, 2) == 1:
                return path[path.index(nxt):]
            elif color.get(nxt) == 0:
                color[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(sorted(succ.get(nxt, ())))))
    return None


def validate(graph: WorkflowGraph) -> list[Violation]:
    """Return every invariant violation of ``graph``; an empty list means valid."""
    out: list[Violation] = []
    seen: set[str] = set()
    for t in graph.tasks:
        if t.id in seen:
            out.append(Violation("DuplicateTask", t.id))
        seen.add(t.id)
        for name in ("work", "memory", "accelerators"):
            if getattr(t, name) < 0:
                out.append(Violation("NegativeValue", t.id, name))
        if t.kind == TaskKind.INSTRUMENT and not t.pinned_site:
            out.append(Violation("UnpinnedInstrument", t.id))
    for e in graph.edges:
        for end in (e.producer, e.consumer):
            if end not in seen:
                out.append(Violation("DanglingEdge", end, e.id))
        if e.producer == e.consumer:
            out.append(Violation("SelfEdge", e.id))
        if e.volume < 0:
            out.append(Violation("NegativeValue", e.id, "volume"))
    for loop_name, loop in (("inner", graph.inner_loop), ("outer", graph.outer_loop)):
        for tid in loop:
            if tid not in seen:
                out.append(Violation("UnknownLoopTask", tid, loop_name))
    if graph.inner_iterations < 1:
        out.append(Violation("BadIterationCount", "inner", str(graph.inner_iterations)))
    if graph.outer_iterations < 1:
        out.append(Violation("BadIterationCount", "outer", str(graph.outer_iterations)))
    succ: dict[str, set[str]] = {}
    for e in graph.edges:
        if e.producer in seen and e.consumer in seen and e.producer != e.consumer:
            succ.setdefault(e.producer, set()).add(e.consumer)
    cycle = _find_cycle(seen, succ)
    if cycle:
        out.append(Violation("CycleWithinIteration", cycle[0], "->".join(cycle)))
    if not out and (graph.inner_loop or graph.outer_loop):
        # loop-carried edges can still close a cycle, e.g. through a task
        # outside the loop that sits between two of its members
        try:
            topo_order(unroll(graph))
        except CycleDetected as exc:
            out.append(Violation("CyclicUnroll", exc.remaining[0],
                                 f"{len(exc.remaining)} instances on or after a cycle"))
    return out


@dataclass(frozen=True)
class Instance:
    id: str
    task: Task
    outer: int | None = None
    inner: int | None = None


@dataclass(frozen=True)
class InstanceEdge:
    producer: str
    consumer: str
    volume: float = 0.0
    compressible: bool = False
    carried: bool = False

    @property
    def id(self) -> str:
        return f"{self.producer}->{self.consumer}"


@dataclass
class InstanceGraph:
    """Unrolled activations. ``instances`` and ``edges`` are kept in id order."""

    instances: dict[str, Instance] = field(default_factory=dict)
    edges: list[InstanceEdge] = field(default_factory=list)

    def __post_init__(self):
        self.instances = dict(sorted(self.instances.items()))
        self.edges = sorted(self.edges, key=lambda e: e.id)
        self._inbound: dict[str, list[InstanceEdge]] | None = None
        self._outbound: dict[str, list[InstanceEdge]] | None = None

    @classmethod
    def from_tasks(cls, tasks, edges) -> "InstanceGraph":
        """One instance per task; handy for hand-built DAGs."""
        inst = {t.id: Instance(t.id, t) for t in tasks}
        return cls(inst, [InstanceEdge(e.producer, e.consumer, e.volume, e.compressible)
                          for e in edges])

    def _index(self):
        inbound: dict[str, list[InstanceEdge]] = {i: [] for i in self.instances}
        outbound: dict[str, list[InstanceEdge]] = {i: [] for i in self.instances}
        for e in self.edges:
            outbound.setdefault(e.producer, []).append(e)
            inbound.setdefault(e.consumer, []).append(e)
        self._inbound, self._outbound = inbound, outbound

    def inbound(self, iid: str) -> list[InstanceEdge]:
        if self._inbound is None:
            self._index()
        return self._inbound.get(iid, [])

    def outbound(self, iid: str) -> list[InstanceEdge]:
        if self._outbound is None:
            self._index()
        return self._outbound.get(iid, [])

    def __eq__(self, other):
        if not isinstance(other, InstanceGraph):
            return NotImplemented
        return self.instances == other.instances and self.edges == other.edges


def _slot_name(task_id, outer, inner, wo, wi):
    if outer is None:
        return task_id
    if inner is None:
        return f"{task_id}@o{outer:0{wo}d}"
    return f"{task_id}@o{outer:0{wo}d}.i{inner:0{wi}d}"


def unroll(graph: WorkflowGraph) -> InstanceGraph:
    """Expand the loop structure of ``graph`` into a finite instance DAG."""
    ids = set(graph.task_ids)
    succ: dict[str, set[str]] = {}
    for e in graph.edges:
        if e.producer in ids and e.consumer in ids:
            succ.setdefault(e.producer, set()).add(e.consumer)
    cycle = _find_cycle(ids, succ)
    if cycle or any(e.producer == e.consumer for e in graph.edges):
        raise CycleWithinIteration(cycle or [e.producer for e in graph.edges
                                             if e.producer == e.consumer])

    n_out, n_in = graph.outer_iterations, graph.inner_iterations
    wo, wi = len(str(max(n_out - 1, 0))), len(str(max(n_in - 1, 0)))
    inner_set, outer_set = set(graph.inner_loop), set(graph.outer_loop)

    def level(tid):
        if tid in inner_set:
            return 2
        if tid in outer_set:
            return 1
        return 0

    slots: dict[str, list[tuple[int | None, int | None]]] = {}
    instances: dict[str, Instance] = {}
    for t in graph.tasks:
        lv = level(t.id)
        if lv == 2:
            sl = [(o, i) for o in range(n_out) for i in range(n_in)]
        elif lv == 1:
            sl = [(o, None) for o in range(n_out)]
        else:
            sl = [(None, None)]
        slots[t.id] = sl
        for o, i in sl:
            iid = _slot_name(t.id, o, i, wo, wi)
            instances[iid] = Instance(iid, t, o, i)

    def name(tid, o, i):
        return _slot_name(tid, o, i, wo, wi)

    edges: dict[str, InstanceEdge] = {}

    def add(p, c, volume=0.0, compressible=False, carried=False):
        e = InstanceEdge(p, c, volume, compressible, carried)
        if e.id not in edges:
            edges[e.id] = e

    for e in graph.edges:
        lp, lc = level(e.producer), level(e.consumer)
        pairs = []
        if lp == 0 or lc == 0:
            # a task outside both loops has a single slot at either end
            pairs = [(slots[e.producer][-1], slots[e.consumer][0])]
        elif lp == lc:
            pairs = [(s, s) for s in slots[e.producer]]
        elif lp == 1:
            pairs = [((o, None), (o, n_in - 1)) for o in range(n_out)]
        else:
            pairs = [((o, n_in - 1), (o, None)) for o in range(n_out)]
        for (po, pi), (co, ci) in pairs:
            add(name(e.producer, po, pi), name(e.consumer, co, ci), e.volume, e.compressible)

    if graph.inner_loop:
        head, tail = graph.inner_loop[0], graph.inner_loop[-1]
        seq = [(o, i) for o in range(n_out) for i in range(n_in)]
        for a, b in zip(seq, seq[1:]):
            add(name(tail, *a), name(head, *b), carried=True)
    if graph.outer_loop:
        head, tail = graph.outer_loop[0], graph.outer_loop[-1]
        for o in range(n_out - 1):
            t_slot = [s for s in slots[tail] if s[0] == o][-1]
            h_slot = [s for s in slots[head] if s[0] == o + 1][0]
            add(name(tail, *t_slot), name(head, *h_slot), carried=True)

    return InstanceGraph(instances, list(edges.values()))


def topo_order(instances: InstanceGraph) -> list[str]:
    """Kahn's algorithm; ready instances are released in lexicographic id order."""
    indeg = dict.fromkeys(instances.instances, 0)
    succ: dict[str, list[str]] = {i: [] for i in instances.instances}
    for e in instances.edges:
        indeg[e.consumer] = indeg.get(e.consumer, 0) + 1
        succ.setdefault(e.producer, []).append(e.consumer)
        indeg.setdefault(e.producer, 0)
    ready = [i for i, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for nxt in succ.get(node, ()):
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(order) != len(indeg):
        raise CycleDetected(sorted(set(indeg) - set(order)))
    return order


# Names of the five tasks in the built-in microscopy workflow.
INSTRUMENT = "Instrument"
AI_MODEL = "AI-model"
CRYSTAL_MODEL = "Crystal-model"
COMPRESSION = "Compression"
TRAINING = "Training"


@dataclass(frozen=True)
class StemParams:
    """Volumes in bytes per activation, work in compute-units, memory in bytes."""

    image_volume: float = 2_000_000_000
    crystal_output_volume: float = 200_000_000_000
    compressed_volume: float = 20_000_000_000
    model_volume: float = 500_000_000
    inner_iterations: int = 3
    outer_iterations: int = 1
    instrument_site: str = "facility"
    instrument_work: float = 60
    inference_work: float = 400
    crystal_work: float = 36_000
    compression_work: float = 2_000
    training_work: float = 72_000
    training_memory: float = 384_000_000_000


def stem_workflow(params: StemParams | None = None) -> WorkflowGraph:
    """The five-task microscopy workflow with its inner and outer loops.

    Inner loop: Instrument -> AI-model. Outer loop: Crystal-model ->
    Compression -> Training -> AI-model. The crystal data edge is the one
    the compression policy may shrink on the wire.
    """
    p = params or StemParams()
    if min(p.image_volume, p.crystal_output_volume, p.compressed_volume, p.model_volume) < 0:
        raise ValueError("volumes must be non-negative")
    gb = 1_000_000_000
    tasks = (
        Task(AI_MODEL, TaskKind.INFERENCE, p.inference_work, 32 * gb, 1),
        Task(COMPRESSION, TaskKind.COMPRESSOR, p.compression_work, 16 * gb),
        Task(CRYSTAL_MODEL, TaskKind.GENERATOR, p.crystal_work, 32 * gb, spot_tolerant=True),
        Task(INSTRUMENT, TaskKind.INSTRUMENT, p.instrument_work, 8 * gb,
             pinned_site=p.instrument_site),
        Task(TRAINING, TaskKind.TRAINER, p.training_work, p.training_memory),
    )
    edges = (
        FlowEdge(INSTRUMENT, AI_MODEL, p.image_volume),
        FlowEdge(CRYSTAL_MODEL, COMPRESSION, p.crystal_output_volume, compressible=True),
        FlowEdge(COMPRESSION, TRAINING, p.compressed_volume),
        FlowEdge(TRAINING, AI_MODEL, p.model_volume),
    )
    return WorkflowGraph(
        tasks=tasks,
        edges=edges,
        inner_loop=(INSTRUMENT, AI_MODEL),
        outer_loop=(CRYSTAL_MODEL, COMPRESSION, TRAINING, AI_MODEL),
        inner_iterations=p.inner_iterations,
        outer_iterations=p.outer_iterations,
        name="stem",
    )


def to_dot(graph: WorkflowGraph | InstanceGraph) -> str:
    """Render a workflow or instance graph as a DOT digraph."""
    lines = ["digraph workflow {", "  rankdir=LR;"]
    if isinstance(graph, WorkflowGraph):
        for t in sorted(graph.tasks, key=lambda t: t.id):
            shape = "house" if t.kind == TaskKind.INSTRUMENT else "box"
            lines.append(f'  "{t.id}" [shape={shape}, label="{t.id}\\n{t.kind.value}"];')
        for e in sorted(graph.edges, key=lambda e: e.id):
            style = ", style=dashed" if e.compressible else ""
            lines.append(f'  "{e.producer}" -> "{e.consumer}" [label="{e.volume:g} B"{style}];')
    else:
        for iid in graph.instances:
            lines.append(f'  "{iid}" [shape=box];')
        for e in graph.edges:
            style = ", style=dotted" if e.carried else ""
            lines.append(f'  "{e.producer}" -> "{e.consumer}" [label="{e.volume:g} B"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
