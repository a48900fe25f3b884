import random
from functools import lru_cache

import pytest
from hypothesis import given, settings, strategies as st

from contflow import dfl
from contflow.catalog import Catalog, Compression, CompressionPolicy, Link, Site, SiteClass
from contflow.dfl import TraceEvent, ingest, merge, severity
from contflow.errors import CyclicLifecycle, EmptyGraph, MalformedEvent, NonMonotoneTimestamp
from randgen import chain_script


def ev(ts, task, op, data, nbytes=0, dur=0.0):
    return TraceEvent(ts, task, op, data, nbytes, dur)


def test_empty_trace_gives_empty_graph():
    g = ingest([])
    assert g.is_empty() and g.edges() == []


def test_minimal_lifecycle():
    g = ingest([ev(0, "A", "write", "d", 100, 1.0), ev(1, "B", "read", "d", 100, 2.0)])
    assert g.tasks == {"A", "B"} and g.data == {"d"}
    assert list(g.writes) == [("A", "d")] and list(g.reads) == [("d", "B")]
    assert g.writes[("A", "d")].total_bytes == 100


def test_synthetic_trace_recovers_script_edges():
    rng = random.Random(5)
    steps, expected = chain_script(rng, 5)
    events = []
    clock = {}
    for k in range(1000):
        task, op, data = steps[k % len(steps)]
        clock[task] = clock.get(task, 0.0) + rng.uniform(0, 1)
        events.append(ev(clock[task], task, op, data, rng.randint(0, 10**6), rng.uniform(0, 0.1)))
    g = ingest(events)
    got = {(s, d) for _, s, d, _ in g.edges()}
    assert got == expected
    assert sum(st.op_count for *_, st in g.edges()) == 1000


def test_bad_events_raise():
    with pytest.raises(MalformedEvent):
        ingest([ev(0, "A", "delete", "d")])
    with pytest.raises(MalformedEvent):
        ingest([ev(0, "A", "read", "d", -1)])
    with pytest.raises(NonMonotoneTimestamp):
        ingest([ev(5, "A", "read", "d"), ev(4, "A", "read", "d")])


def test_single_edge_has_full_share():
    rep = severity(ingest([ev(0, "A", "write", "d", 10, 5.0)]))
    assert rep.entries[0].edge == "task:A->data:d"
    assert rep.entries[0].share == 1.0 and rep.critical_path == 5.0


def test_two_chains_shares_against_longer_path():
    g = ingest([ev(0, "A", "write", "d1", 1, 4.0), ev(0, "B", "read", "d1", 1, 6.0),
                ev(0, "C", "write", "d2", 1, 1.0)])
    rep = severity(g)
    # hand computation: the longest path is A -> d1 -> B, 4 s + 6 s
    assert rep.critical_path == 10.0
    shares = {e.edge: e.share for e in rep.entries}
    assert shares == {"data:d1->task:B": 0.6, "task:A->data:d1": 0.4, "task:C->data:d2": 0.1}
    assert [e.edge for e in rep.entries[:2]] == ["data:d1->task:B", "task:A->data:d1"]


def test_equal_times_rank_by_edge_id():
    g = ingest([ev(0, "Z", "write", "d", 1, 2.0), ev(0, "A", "write", "e", 1, 2.0)])
    assert [e.edge for e in severity(g).entries] == ["task:A->data:e", "task:Z->data:d"]


def test_severity_errors():
    with pytest.raises(EmptyGraph):
        severity(ingest([]))
    with pytest.raises(CyclicLifecycle):
        severity(ingest([ev(0, "A", "write", "d"), ev(1, "A", "read", "d")]))


def test_conservation_diagnostic():
    g = ingest([ev(0, "A", "write", "d", 10), ev(1, "B", "read", "d", 25)])
    assert dfl.conservation_issues(g) == [("d", 25, 10)]


def projection_catalog():
    sites = (Site("fac", SiteClass.FACILITY_HPC), Site("cloud", SiteClass.CLOUD_REGION, "p"))
    return Catalog(sites, (), (Link("cloud", "fac", 1e8), Link("fac", "cloud", 1e8)))


def test_flow_projection_examples():
    cat = projection_catalog()
    assert dfl.flow_projection(1e9, False, "fac", "fac", cat) == 0.0
    assert dfl.flow_projection(1e9, False, "fac", "cloud", cat) == 10.0
    got = dfl.flow_projection(1e9, True, "cloud", "fac", cat, CompressionPolicy.CROSS_SITE_DOWNLOADS,
                              Compression(10, 1e9, 1e9))
    assert got == pytest.approx(2.1, abs=1e-12)
    # uploads are left alone under the downloads-only policy
    assert dfl.flow_projection(1e9, True, "fac", "cloud", cat, CompressionPolicy.CROSS_SITE_DOWNLOADS,
                               Compression(10, 1e9, 1e9)) == 10.0


def test_storage_term_hook():
    sites = (Site("fac", SiteClass.FACILITY_HPC, storage_throughput=1e9),)
    cat = Catalog(sites, ())
    assert dfl.flow_projection(2e9, False, "fac", "fac", cat) == 0.0
    assert dfl.flow_projection(2e9, False, "fac", "fac", cat, storage_term=True) == 2.0


def test_dot_empty_and_minimal():
    assert dfl.export_dot(ingest([])) == "digraph dfl {\n}\n"
    text = dfl.export_dot(ingest([ev(0, "A", "write", "d", 100, 1.5),
                                  ev(1, "B", "read", "d", 100, 2.0)]))
    lines = text.splitlines()
    assert sum("shape=" in l for l in lines) == 3
    assert [l for l in lines if "->" in l] == [
        '  "data:d" -> "task:B" [label="100 B / 2 s"];',
        '  "task:A" -> "data:d" [label="100 B / 1.5 s"];',
    ]
    assert dfl.export_dot(ingest([ev(0, "A", "write", "d", 100, 1.5)])) == \
        dfl.export_dot(ingest([ev(0, "A", "write", "d", 100, 1.5)]))


def test_trace_text_format():
    text = "timestamp,task,op,data,bytes,duration\n# comment\n0.5,A,write,d,10,0.25\n"
    assert dfl.read_trace(text) == [ev(0.5, "A", "write", "d", 10, 0.25)]
    with pytest.raises(MalformedEvent):
        dfl.read_trace("time,task\n")
    with pytest.raises(MalformedEvent):
        dfl.read_trace("timestamp,task,op,data,bytes,duration\n1,A,read\n")


names = st.sampled_from(["A", "B", "C", "D"])
datas = st.sampled_from(["x", "y", "z"])
event_lists = st.lists(st.tuples(names, st.sampled_from(["read", "write"]), datas,
                                 st.integers(0, 10**9), st.floats(0, 100)), max_size=40)


def monotone(raw):
    clock = {}
    out = []
    for k, (task, op, data, nbytes, dur) in enumerate(raw):
        clock[task] = clock.get(task, 0.0) + 0.5
        out.append(ev(clock[task], task, op, data, nbytes, dur))
    return out


@settings(max_examples=300)
@given(event_lists, st.data())
def test_ingest_is_a_homomorphism(raw, data):
    events = monotone(raw)
    cut = data.draw(st.integers(0, len(events)))
    assert ingest(events) == merge(ingest(events[:cut]), ingest(events[cut:]))


@settings(max_examples=200)
@given(event_lists)
def test_trace_round_trip(raw):
    events = monotone(raw)
    assert dfl.read_trace(dfl.write_trace(events)) == events


@settings(max_examples=200)
@given(st.lists(st.floats(0, 1e4), min_size=1, max_size=30))
def test_chain_shares_sum_to_one(times):
    # t0 -> d0 -> t1 -> d1 -> ... alternating writes and reads
    events = []
    for k, dur in enumerate(times):
        task, data = f"t{(k + 1) // 2:03d}", f"d{k // 2:03d}"
        events.append(ev(float(k), task, "write" if k % 2 == 0 else "read", data, 1, dur))
    rep = severity(ingest(events))
    if rep.critical_path > 0:
        assert abs(sum(e.share for e in rep.entries) - 1.0) <= 1e-9


def reference_longest_path(g):
    succ = {}
    for _, s, d, st_ in g.edges():
        succ.setdefault(s, []).append((d, st_.total_time))

    @lru_cache(maxsize=None)
    def best(node):
        return max((w + best(n) for n, w in succ.get(node, ())), default=0.0)

    nodes = {s for _, s, _, _ in g.edges()}
    return max((best(n) for n in nodes), default=0.0)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6), st.floats(0, 50)), max_size=25))
def test_longest_path_backends_match_reference(graph_shape):
    # writes go from lower to higher task index so the lifecycle stays acyclic
    events = []
    for k, (a, b, dur) in enumerate(graph_shape):
        lo, hi = sorted((a, b))
        if lo == hi:
            continue
        events.append(ev(float(k), f"t{lo}", "write", f"d{lo}_{hi}", 1, dur))
        events.append(ev(float(k), f"t{hi}", "read", f"d{lo}_{hi}", 1, dur / 2))
    g = ingest(events)
    want = reference_longest_path(g)
    for backend in ("python", "cython"):
        try:
            got = dfl.longest_path(g, backend=backend)
        except ImportError:
            continue
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)
