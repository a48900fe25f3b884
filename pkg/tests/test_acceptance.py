"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line with the measured numbers so the
suite doubles as a report: ``pytest tests/test_acceptance.py -v -s``.
"""

import math
import random
import time

import numpy as np
import pytest

from contflow import dfl
from contflow.broker import select_offer
from contflow.catalog import Compression, CompressionPolicy
from contflow.errors import NoFeasibleOffer
from contflow.formats import (dump_yaml, event_log_text, placement_to_dict, report_to_dict,
                              sample_catalog, timeline_csv, transfers_csv)
from contflow.objective import Objective
from contflow.oracle import brute_force, build_problem
from contflow.scenarios import SCENARIOS, run_scenario
from contflow.scheduler import schedule
from contflow.sim import SimConfig, objective_value, simulate
from contflow.workflow import unroll
from randgen import (OBJECTIVES, broker_case, causality_violations, chain_script,
                     conservation_violations, layered_dag, oracle_case, reference_select,
                     small_catalog, small_dag)
from test_scenarios import GOLDEN, lowest_power_equal_time, offers_of, sites_of
from test_sim import chain_setup


@pytest.fixture
def report_line(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
    return emit


def test_broker_matches_exhaustive_argmin(report_line):
    t0 = time.perf_counter()
    cases = mismatches = infeasible = 0
    for seed in range(1500):
        cat, req, obj, hours = broker_case(random.Random(seed))
        want = reference_select(cat, req, obj, hours)
        try:
            choice = select_offer(cat, req, obj, hours)
            got = (choice.offer, choice.score)
        except NoFeasibleOffer:
            got = None
            infeasible += 1
        cases += 1
        if want is None or got is None:
            mismatches += want != got
        elif got[0] != want[0] or not math.isclose(got[1], want[1], rel_tol=1e-12, abs_tol=1e-12):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = cases >= 1000 and mismatches == 0 and elapsed < 10
    report_line(1, "broker oracle equivalence", ok,
                f"{cases} cases ({infeasible} infeasible), {mismatches} mismatches, {elapsed:.2f} s")
    assert ok


def test_scheduler_within_bound_of_brute_force(report_line):
    t0 = time.perf_counter()
    within = 0
    ratios = []
    n = 500
    for seed in range(n):
        cat, ig, obj = oracle_case(random.Random(seed))
        assert len(ig.instances) <= 6 and len(cat.sites) <= 3
        assert max(sum(o.site == s.id for o in cat.offers) for s in cat.sites) <= 2
        placement = schedule(ig, cat, obj)
        greedy = objective_value(simulate(ig, placement, cat, SimConfig(), obj), obj)
        best = brute_force(build_problem(ig, cat, obj)).best_value
        ratio = greedy / best if best > 0 else (1.0 if greedy == 0 else math.inf)
        ratios.append(ratio)
        within += ratio <= 1.5 + 1e-12
    elapsed = time.perf_counter() - t0
    share = within / n
    ok = share >= 0.95 and elapsed < 300
    report_line(2, "scheduler oracle bound", ok,
                f"{within}/{n} = {share:.1%} within 1.5x (median ratio {np.median(ratios):.4f}, "
                f"worst {max(ratios):.3f}), {elapsed:.1f} s")
    assert ok


def _time_schedule(ig, cat, obj, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        schedule(ig, cat, obj)
        best = min(best, time.perf_counter() - t0)
    return best


def test_scheduler_runtime_is_linear(report_line):
    t0 = time.perf_counter()
    cat, obj = sample_catalog(), Objective(1, 1, 0)
    sizes = [100, 300, 1000, 3000, 10000, 30000, 100000]
    xs, ys = [], []
    for n in sizes:
        ig = layered_dag(random.Random(n), n)
        repeats = 5 if n <= 3000 else (3 if n <= 10000 else 1)
        xs.append(len(ig.instances) + len(ig.edges))
        ys.append(_time_schedule(ig, cat, obj, repeats))
    slope = float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
    elapsed = time.perf_counter() - t0
    ok = slope <= 1.15 and elapsed < 120
    per_item = ", ".join(f"{x}:{y * 1e6 / x:.1f}us" for x, y in zip(xs, ys))
    report_line(3, "linear-time scheduler", ok,
                f"fitted exponent {slope:.3f} over |V|+|E| in [{xs[0]}, {xs[-1]}], {elapsed:.1f} s "
                f"({per_item})")
    assert ok


def test_scenario_goldens(report_line):
    results = {name: run_scenario(name) for name in SCENARIOS}
    problems = []
    for name, r in results.items():
        if dump_yaml(placement_to_dict(r.placement)) != (GOLDEN / f"{name}.placement.yaml").read_text():
            problems.append(f"{name} differs from golden")
    tc = results["timeCost"]
    cat = tc.scenario.catalog
    if not all(cat.site(cat.offer(o).site).is_cloud and cat.offer(o).price_spot is not None
               for o in offers_of(tc, "Crystal-model")):
        problems.append("Crystal-model not on spot cloud")
    if sites_of(tc, "AI-model") != {"facility"}:
        problems.append("AI-model not at facility")
    if sites_of(results["costOnly"], "Training") != {"facility"}:
        problems.append("Training not at facility under costOnly")
    te = results["timeEnergyCost"]
    training = next(t for t in te.scenario.workflow.tasks if t.id == "Training")
    if not all(lowest_power_equal_time(te.scenario.catalog, training, o)
               for o in offers_of(te, "Training")):
        problems.append("timeEnergyCost training offer is not lowest power")
    summary = ", ".join(f"{n}: Training on {'/'.join(sorted(offers_of(r, 'Training')))}"
                        for n, r in results.items())
    report_line(4, "scenario goldens", not problems, "; ".join(problems) or summary)
    assert not problems


def _serialized(rep):
    return (dump_yaml(report_to_dict(rep)), timeline_csv(rep), transfers_csv(rep),
            event_log_text(rep))


def test_simulator_determinism_conservation_causality(report_line):
    runs = nondet = conserve = causal = events = 0
    for seed in range(300):
        rng = random.Random(seed)
        cat, ig = small_catalog(rng), small_dag(rng, 2, 8)
        obj = rng.choice(OBJECTIVES)
        cfg = SimConfig(seed=seed, preemption=rng.random() < 0.6,
                        compression_policy=rng.choice(list(CompressionPolicy)))
        p = schedule(ig, cat, obj)
        a, b = simulate(ig, p, cat, cfg, obj), simulate(ig, p, cat, cfg, obj)
        runs += 1
        events += len(a.events)
        nondet += _serialized(a) != _serialized(b)
        conserve += bool(conservation_violations(a, cat, cfg))
        causal += bool(causality_violations(a, ig, cat, cfg))
    for name in SCENARIOS:
        a, b = run_scenario(name), run_scenario(name)
        cfg = a.scenario.sim_config()
        runs += 1
        events += len(a.report.events)
        nondet += _serialized(a.report) != _serialized(b.report)
        conserve += bool(conservation_violations(a.report, a.scenario.catalog, cfg))
        causal += bool(causality_violations(a.report, unroll(a.scenario.constrained_workflow()),
                                            a.scenario.catalog, cfg))
    ok = nondet == conserve == causal == 0
    report_line(5, "simulator determinism and conservation", ok,
                f"{runs} runs, {events} events; nondeterministic {nondet}, "
                f"conservation failures {conserve}, causality failures {causal}")
    assert ok


def _script_events(rng, steps, rounds):
    events, clock = [], {}
    for k in range(rounds * len(steps)):
        task, op, data = steps[k % len(steps)]
        clock[task] = clock.get(task, 0.0) + rng.uniform(0, 1)
        events.append(dfl.TraceEvent(clock[task], task, op, data, rng.randint(0, 10**6),
                                     rng.uniform(0, 0.1)))
    return events


def _single_chain(rng, n):
    events = []
    for k in range(n):
        events.append(dfl.TraceEvent(float(2 * k), f"t{k:03d}", "write", f"d{k:03d}", 1,
                                     rng.uniform(0, 100)))
        events.append(dfl.TraceEvent(float(2 * k + 1), f"t{k + 1:03d}", "read", f"d{k:03d}", 1,
                                     rng.uniform(0, 100)))
    return events


def test_dfl_round_trip(report_line):
    exact = 0
    worst = 0.0
    for seed in range(100):
        rng = random.Random(seed)
        steps, expected = chain_script(rng, rng.randint(1, 12))
        events = _script_events(rng, steps, rng.randint(1, 5))
        g = dfl.ingest(dfl.read_trace(dfl.write_trace(events)))
        exact += {(s, d) for _, s, d, _ in g.edges()} == expected
        rep = dfl.severity(dfl.ingest(_single_chain(rng, rng.randint(1, 40))))
        worst = max(worst, abs(math.fsum(e.share for e in rep.entries) - 1.0))
    ok = exact == 100 and worst <= 1e-9
    report_line(6, "lifecycle round-trip", ok,
                f"{exact}/100 edge sets exact; worst chain share deviation {worst:.2e}")
    assert ok


def test_compression_knob(report_line):
    cat, ig, pl = chain_setup()
    off = simulate(ig, pl, cat)
    on = simulate(ig, pl, cat, SimConfig(compression_policy=CompressionPolicy.CROSS_SITE_DOWNLOADS,
                                          compression=Compression(10, 1e9, 1e9)))
    fast_ok = off.makespan == 30.0 and abs(on.makespan - 22.1) <= 1e-9
    # ratio 1 with infinite codecs must change nothing, on the example and on random cases
    identity = Compression(1.0, math.inf, math.inf)
    differing = 0
    cases = [(cat, ig, pl, Objective())]
    for seed in range(100):
        rng = random.Random(seed)
        c, g = small_catalog(rng), small_dag(rng)
        obj = rng.choice(OBJECTIVES)
        cases.append((c, g, schedule(g, c, obj), obj))
    for c, g, p, obj in cases:
        base = simulate(g, p, c, SimConfig(seed=1), obj)
        for policy in (CompressionPolicy.CROSS_SITE_DOWNLOADS, CompressionPolicy.ALL_CROSS_SITE):
            other = simulate(g, p, c, SimConfig(seed=1, compression_policy=policy,
                                                compression=identity), obj)
            same = (other.makespan, other.total_cost, other.total_energy, other.per_task,
                    other.cost_items) == (base.makespan, base.total_cost, base.total_energy,
                                          base.per_task, base.cost_items)
            same = same and [(t.edge, t.start, t.end, t.wire_bytes, t.logical_bytes)
                             for t in other.transfers] == \
                [(t.edge, t.start, t.end, t.wire_bytes, t.logical_bytes) for t in base.transfers]
            differing += not same
    ok = fast_ok and differing == 0
    report_line(7, "compression knob", ok,
                f"makespan {off.makespan!r} s -> {on.makespan!r} s; identity codec differs "
                f"from off in {differing}/{2 * len(cases)} runs")
    assert ok
