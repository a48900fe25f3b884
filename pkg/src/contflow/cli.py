"""Command-line entry point.

Every subcommand writes its artifacts into the ``--out`` directory and
prints a short deterministic summary. Exit codes: 0 success, 1 validation
or planning failure, 2 usage or file error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import dfl
from .broker import select_offer
from .errors import ContflowError, FormatError
from .formats import (broker_choice_to_dict, dump_yaml, event_log_text, explain, load_catalog,
                      load_scenario, load_workflow, load_yaml, objective_from_dict,
                      placement_from_dict, placement_to_dict, report_to_dict,
                      requirement_from_dict, timeline_csv, transfers_csv)
from .scenarios import SCENARIOS, comparison_csv, load_builtin, run_file
from .workflow import to_dot, unroll, validate

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


def _scenario(ref: str, seed: int | None):
    s = load_builtin(ref) if ref in SCENARIOS else load_scenario(ref)
    return s if seed is None else replace(s, seed=seed)


class Writer:
    def __init__(self, out: str, verbose: bool):
        self.dir = Path(out)
        self.verbose = verbose
        self.dir.mkdir(parents=True, exist_ok=True)

    def __call__(self, name: str, text: str):
        path = self.dir / name
        path.write_text(text, encoding="utf-8")
        if self.verbose:
            print(f"wrote {path.resolve()}", file=sys.stderr)


def cmd_validate(args, write):
    graph = load_workflow(args.workflow)
    problems = validate(graph)
    text = "".join(f"{v}\n" for v in problems) or "ok\n"
    write("validation.txt", text)
    print(text, end="")
    return EXIT_INVALID if problems else EXIT_OK


def cmd_analyze(args, write):
    events = dfl.read_trace(Path(args.trace).read_text(encoding="utf-8"))
    g = dfl.ingest(events)
    report = dfl.severity(g)
    write("dfl.dot", dfl.export_dot(g))
    write("severity.csv", dfl.severity_csv(report))
    print(f"{len(g.tasks)} tasks, {len(g.data)} data nodes, critical path {report.critical_path!r} s")
    for e in report.entries[:args.top]:
        print(f"  {e.src} -> {e.dst}: {e.score!r} s ({e.share:.1%})")
    return EXIT_OK


def cmd_schedule(args, write):
    s = _scenario(args.scenario, args.seed)
    result = run_file(s, compare=False)
    write("placement.yaml", dump_yaml(placement_to_dict(result.placement)))
    write("decisions.txt", explain(result.placement))
    _print_assignment(result.placement)
    return EXIT_OK


def _write_report(write, result):
    write("placement.yaml", dump_yaml(placement_to_dict(result.placement)))
    write("decisions.txt", explain(result.placement))
    write("report.yaml", dump_yaml(report_to_dict(result.report)))
    write("timeline.csv", timeline_csv(result.report))
    write("transfers.csv", transfers_csv(result.report))
    write("events.log", event_log_text(result.report))


def _print_assignment(p):
    for iid, offer in p.assignment.items():
        print(f"{iid}\t{offer}")


def _print_summary(r):
    print(f"makespan {r.makespan!r} s, cost {r.total_cost!r} $, energy {r.total_energy!r} J")


def cmd_simulate(args, write):
    s = _scenario(args.scenario, args.seed)
    result = run_file(s, compare=False)
    _write_report(write, result)
    _print_summary(result.report)
    return EXIT_OK


def cmd_scenario(args, write):
    s = _scenario(args.name, args.seed)
    result = run_file(s)
    _write_report(write, result)
    write("comparison.csv", comparison_csv(result.comparison))
    _print_assignment(result.placement)
    _print_summary(result.report)
    return EXIT_OK


def cmd_broker(args, write):
    doc = load_yaml(Path(args.requirement).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise FormatError("requirement file: expected a mapping")
    stanza = doc.get("requirement", doc)
    req = requirement_from_dict(stanza)
    objective = objective_from_dict(doc.get("objective"))
    hours = float(doc.get("duration_hours", 1.0))
    choice = select_offer(load_catalog(args.catalog), req, objective, hours)
    write("broker.yaml", dump_yaml(broker_choice_to_dict(choice)))
    print(f"{choice.offer}\tscore {choice.score!r}")
    return EXIT_OK


def cmd_export_dot(args, write):
    graph = load_workflow(args.workflow)
    problems = validate(graph)
    if problems:
        for v in problems:
            print(v)
        return EXIT_INVALID
    text = to_dot(unroll(graph) if args.unrolled else graph)
    write("workflow.dot", text)
    print(f"{len(text.splitlines())} lines")
    return EXIT_OK


def cmd_explain(args, write):
    p = placement_from_dict(load_yaml(Path(args.placement).read_text(encoding="utf-8")))
    text = explain(p)
    write("decisions.txt", text)
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="contflow-out", help="directory for output files")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--verbose", action="store_true",
                        help="report written paths and timings on stderr")

    parser = argparse.ArgumentParser(prog="contflow",
                                     description="Data-flow aware placement across edge, HPC and cloud.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a workflow file")
    p.add_argument("workflow")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", parents=[common], help="lifecycle graph and severity from a trace")
    p.add_argument("trace")
    p.add_argument("--top", type=int, default=5)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("schedule", parents=[common], help="place a scenario")
    p.add_argument("scenario", help="scenario file or built-in name")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("simulate", parents=[common], help="place and simulate a scenario")
    p.add_argument("scenario", help="scenario file or built-in name")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scenario", parents=[common], help="run a built-in scenario end to end")
    p.add_argument("name", choices=SCENARIOS)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("broker", parents=[common], help="pick an offer for a requirement")
    p.add_argument("requirement")
    p.add_argument("catalog")
    p.set_defaults(func=cmd_broker)

    p = sub.add_parser("export-dot", parents=[common], help="render a workflow as DOT")
    p.add_argument("workflow")
    p.add_argument("--unrolled", action="store_true", help="draw the unrolled instance graph")
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("explain", parents=[common], help="print a placement's decision log")
    p.add_argument("placement")
    p.set_defaults(func=cmd_explain)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.perf_counter()
    try:
        write = Writer(args.out, args.verbose)
        code = args.func(args, write)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ContflowError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.verbose:
        print(f"done in {time.perf_counter() - t0:.3f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
