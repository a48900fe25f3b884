"""The three built-in optimization scenarios on the microscopy workflow."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Any, Mapping

from .catalog import CompressionPolicy
from .formats import ScenarioFile, builtin_scenario_path, load_scenario, objective_from_dict
from .objective import JOULES_PER_KWH
from .scheduler import Placement, schedule
from .sim import SimReport, objective_value, simulate
from .workflow import unroll

SCENARIOS = ("timeCost", "costOnly", "timeEnergyCost")


@dataclass(frozen=True)
class ComparisonRow:
    placement_of: str
    makespan: float
    total_cost: float
    total_energy_kwh: float
    objective: float


@dataclass(frozen=True)
class ScenarioResult:
    scenario: ScenarioFile
    placement: Placement
    report: SimReport
    comparison: tuple[ComparisonRow, ...]


def apply_overrides(s: ScenarioFile, overrides: Mapping[str, Any] | None) -> ScenarioFile:
    """Recognized keys: seed, inner, outer, objective, compression_policy, brokered, preemption."""
    o = dict(overrides or {})
    unknown = set(o) - {"seed", "inner", "outer", "objective", "compression_policy",
                        "brokered", "preemption"}
    if unknown:
        raise ValueError(f"unknown overrides: {', '.join(sorted(unknown))}")
    wf = s.workflow
    if "inner" in o or "outer" in o:
        wf = replace(wf, inner_iterations=int(o.get("inner", wf.inner_iterations)),
                     outer_iterations=int(o.get("outer", wf.outer_iterations)))
    changes = {"workflow": wf}
    if "seed" in o:
        changes["seed"] = int(o["seed"])
    if "objective" in o:
        changes["objective"] = objective_from_dict(o["objective"])
    if "compression_policy" in o:
        changes["compression_policy"] = CompressionPolicy(o["compression_policy"])
    for key in ("brokered", "preemption"):
        if key in o:
            changes[key] = bool(o[key])
    return replace(s, **changes)


def load_builtin(name: str) -> ScenarioFile:
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    return load_scenario(builtin_scenario_path(name))


def plan(s: ScenarioFile) -> tuple[Placement, Any]:
    instances = unroll(s.constrained_workflow())
    return schedule(instances, s.catalog, s.objective, flags=s.flags()), instances


def run_file(s: ScenarioFile, compare: bool = True) -> ScenarioResult:
    placement, instances = plan(s)
    config = s.sim_config()
    allow = dict(s.allow_sites)
    report = simulate(instances, placement, s.catalog, config, s.objective, allow)
    rows = []
    if compare:
        # every built-in placement replayed under this scenario's objective and settings
        for other in SCENARIOS:
            if other == s.name:
                p, rep = placement, report
            else:
                alt = replace(load_builtin(other), workflow=s.workflow, pins=s.pins, spot=s.spot)
                p, _ = plan(alt)
                rep = simulate(instances, p, s.catalog, config, s.objective, allow)
            rows.append(ComparisonRow(other, rep.makespan, rep.total_cost,
                                      rep.total_energy / JOULES_PER_KWH,
                                      objective_value(rep, s.objective)))
    return ScenarioResult(s, placement, report, tuple(rows))


def run_scenario(name: str, overrides: Mapping[str, Any] | None = None) -> ScenarioResult:
    return run_file(apply_overrides(load_builtin(name), overrides))


def comparison_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["placement_of", "makespan", "total_cost", "total_energy_kwh", "objective"])
    for r in rows:
        w.writerow([r.placement_of, repr(r.makespan), repr(r.total_cost),
                    repr(r.total_energy_kwh), repr(r.objective)])
    return buf.getvalue()
