"""Pipeline commands behind the conjtamer CLI.

Every command parses a spec, builds the action and writes deterministic
artifacts into an output directory:

  report.json     always: schema_version 1, stage-by-stage record
  <prefix>_*.json serialized generators, re-ingestable via @name.json
  *.spec          a spec file reproducing the transformed action
  path.jsonl      (path) one conjugacy-path sample per line
  plot.csv        (path) t, c1_gap and per-generator defect columns
  detect.json     (detect) the resilience witness, or null

Output bytes are reproducible: JSON is dumped with sorted keys and fixed
separators, floats go through Python's repr.  Errors raised inside a stage
carry the stage name in their message; certification failures still write
report.json before raising so the partial run can be inspected.
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from typing import Dict, List, Optional, Sequence

import numpy as np

from .action import Action, validate_relations
from .cohomology import (
    CohomSolution,
    birkhoff_solution,
    conjugacy_from_log_density,
    nilpotent_average_solution,
    path_of_conjugates,
)
from .diffeo import Diffeo
from .errors import CertificationFailure, ConjTamerError, SpecError
from .periodic import (
    detect_resilient,
    find_periodic_points,
    flatten_hyperbolic,
    rotation_number,
)
from .specfile import ActionSpec, PipelineParams, build_action
from .taming import pushforward_check, tame_lipschitz
from .words import FREE, NILPOTENT, Word

SCHEMA_VERSION = 1
COMMANDS = ("tame-lipschitz", "tame-c1", "path", "detect", "flatten", "report")

_PERIOD_CAP = 3  # default least-period bound for orbit inventories


# ---------------------------------------------------------------------------
# Deterministic serialization.


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def dumps_canonical(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def _write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_canonical(obj))
        fh.write("\n")


# ---------------------------------------------------------------------------
# Stage bookkeeping.


@contextmanager
def _stage(report: dict, name: str):
    report["stage_order"].append(name)
    try:
        yield
    except ConjTamerError as exc:
        report["failed_stage"] = name
        exc.args = (f"[stage {name}] {exc.args[0]}",) + exc.args[1:]
        raise


def _orbit_dicts(orbits) -> List[dict]:
    return [
        {
            "points": [float(p) for p in o.points],
            "period": o.period,
            "multiplier": float(o.multiplier),
            "log_multiplier": float(o.log_multiplier),
            "parabolic": o.parabolic,
        }
        for o in orbits
    ]


def _periodic_inventory(action: Action, n_max: int = _PERIOD_CAP) -> Dict[str, list]:
    return {
        name: _orbit_dicts(find_periodic_points(g, n_max))
        for name, g in zip(action.names, action.gens)
    }


def _sup_log_deriv(action: Action) -> Dict[str, float]:
    return {
        name: float(g.log_deriv.sup_abs())
        for name, g in zip(action.names, action.gens)
    }


# ---------------------------------------------------------------------------
# Re-ingestable spec output.


def _rule_text(rule, names: Sequence[str]) -> str:
    lhs, rhs = rule
    return f"{Word(lhs).display(names)} -> {Word(rhs).display(names)}"


def _write_action_spec(
    path: str,
    spec: ActionSpec,
    gen_files: Dict[str, str],
    relation_tolerance: float,
) -> None:
    names = spec.generator_names
    lines = [
        "[space]",
        f"kind = {spec.space_kind}",
        f"grid_size = {spec.grid_size}",
        "",
        "[group]",
        f"type = {spec.group_type}",
        "generators = " + " ".join(names),
    ]
    if spec.group_type != "abelian" and spec.rules:
        quoted = ", ".join(f'"{_rule_text(r, names)}"' for r in spec.rules)
        lines.append(f"rules = {quoted}")
    if spec.bounded_generation is not None:
        lines.append(f"bounded_generation = {spec.bounded_generation}")
    if spec.metric_generators is not None:
        lines.append(
            "metric_generators = "
            + " ".join(names[i] for i in spec.metric_generators)
        )
    lines.append(f"relation_tolerance = {relation_tolerance!r}")
    lines.append("")
    lines.append("[generators]")
    for name in names:
        lines.append(f"{name} = @{gen_files[name]}")
    lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def _export_action(
    out_dir: str, prefix: str, spec: ActionSpec, action: Action
) -> Dict[str, str]:
    """Writes one payload per generator plus a spec that re-ingests them,
    widening relation_tolerance to what the grid-only rebuilds achieve."""
    gen_files = {}
    for name, g in zip(action.names, action.gens):
        fname = f"{prefix}_{name}.json"
        _write_json(os.path.join(out_dir, fname), g.to_payload())
        gen_files[name] = fname
    rebuilt = Action(
        action.space,
        action.presentation,
        [Diffeo.from_log_deriv(g.space, g.log_deriv.samples, g.offset)
         for g in action.gens],
    )
    deviations = validate_relations(rebuilt, raise_on_fail=False)
    measured = max(deviations.values()) if deviations else 0.0
    tol = max(spec.relation_tolerance, 4.0 * measured)
    _write_action_spec(
        os.path.join(out_dir, f"{prefix}.spec"), spec, gen_files, tol
    )
    return gen_files


# ---------------------------------------------------------------------------
# Commands.


def _need(value, name: str, command: str):
    if value is None:
        raise SpecError(f"{command} needs a value for {name} "
                        f"(spec [pipeline] or CLI flag)")
    return value


def _cmd_tame_lipschitz(
    spec: ActionSpec, action: Action, params: PipelineParams,
    out_dir: str, report: dict,
) -> None:
    lam = _need(params.lam, "lambda", "tame-lipschitz")
    radius = params.radius if params.radius is not None else 40

    with _stage(report, "tame"):
        tamed, taming, measure = tame_lipschitz(action, lam, radius)
        mass, mass_bound, growth_c = measure.mass_bound_certificate()
        report["taming"] = taming.to_dict()
        report["measure"] = {
            "mass": float(mass),
            "mass_bound": float(mass_bound),
            "growth_log_constant": float(growth_c),
            "tail_bound": float(measure.tail_bound),
            "sphere_sizes": [int(s) for s in measure.sphere_sizes],
        }

    with _stage(report, "pushforward"):
        push = pushforward_check(action, measure)
        report["pushforward"] = push

    with _stage(report, "export"):
        gen_files = _export_action(out_dir, "tamed", spec, tamed)
        _write_json(
            os.path.join(out_dir, "conjugator.json"),
            measure.conjugator.to_payload(),
        )
        report["outputs"] = {
            "generators": gen_files,
            "conjugator": "conjugator.json",
            "spec": "tamed.spec",
        }

    push_bad = sum(p["violations"] for p in push.values())
    report["certified"] = bool(taming.certified and push_bad == 0)
    if not report["certified"]:
        raise CertificationFailure(
            f"taming not certified: slack={taming.slack:.6g} "
            f"(threshold {taming.refuse_threshold}), "
            f"pushforward violations={push_bad}",
            report,
        )


def _solve(action: Action, spec: ActionSpec, params: PipelineParams) -> CohomSolution:
    if spec.group_type == FREE:
        raise SpecError("tame-c1 needs an abelian or nilpotent group; "
                        "use detect for free actions")
    if spec.group_type == NILPOTENT:
        return nilpotent_average_solution(
            action,
            action.presentation,
            params.shell_index if params.shell_index is not None else 0,
            growth_constant=params.growth_constant,
            k_max=params.k_max,
            delta=params.delta if params.delta is not None else 0.1,
        )
    n = params.nmax if params.nmax is not None else 16
    return birkhoff_solution(action, n)


def _solution_dict(sol: CohomSolution) -> dict:
    return {
        "construction": sol.construction,
        "defect": float(sol.defect),
        "defect_per_generator": {
            k: float(v) for k, v in sol.defect_per_generator.items()
        },
        "defect_locations": {
            k: float(v) for k, v in sol.defect_locations.items()
        },
        "defect_refined": {
            k: float(v) for k, v in sol.defect_refined.items()
        },
        "extras": _jsonable(sol.extras),
    }


def _cmd_tame_c1(
    spec: ActionSpec, action: Action, params: PipelineParams,
    out_dir: str, report: dict,
) -> None:
    if spec.group_type == FREE:
        raise SpecError("tame-c1 needs an abelian or nilpotent group; "
                        "use detect for free actions")
    eps = _need(params.epsilon, "epsilon", "tame-c1")
    delta = params.delta if params.delta is not None else eps

    with _stage(report, "periodic"):
        inventory = {
            name: find_periodic_points(g, _PERIOD_CAP)
            for name, g in zip(action.names, action.gens)
        }
        report["periodic"] = {
            name: _orbit_dicts(orbits) for name, orbits in inventory.items()
        }

    with _stage(report, "flatten"):
        hyper = any(
            not o.parabolic for orbits in inventory.values() for o in orbits
        )
        if hyper:
            flattened, psi, flat_report = flatten_hyperbolic(
                action, delta=delta, alpha=params.alpha
            )
            report["flatten"] = dict(flat_report.to_dict(), skipped=False)
        else:
            flattened, psi = action, None
            report["flatten"] = {"skipped": True, "alpha": 1.0, "flagged": []}

    with _stage(report, "solve"):
        sol = _solve(flattened, spec, params)
        report["solve"] = _solution_dict(sol)

    with _stage(report, "conjugate"):
        phi_w = conjugacy_from_log_density(sol.u)
        final = flattened.conjugated(phi_w)
        report["conjugate"] = {
            "sup_log_deriv": _sup_log_deriv(final),
            "conjugacy": "phi_w.json"
            + ("" if psi is None else " composed with the flattening map"),
        }

    with _stage(report, "certify"):
        defect = float(sol.defect)
        slack = max(0.0, defect - eps)
        final_sup = max(report["conjugate"]["sup_log_deriv"].values())
        final_orbits = _periodic_inventory(final)
        multiplier_ok = all(
            abs(o["log_multiplier"]) < o["period"] * eps * (1.0 + 1e-6)
            for orbits in final_orbits.values()
            for o in orbits
        )
        report["certify"] = {
            "epsilon": eps,
            "defect": defect,
            "slack": slack,
            "final_sup_log_deriv": final_sup,
            "final_periodic": final_orbits,
            "multipliers_within_epsilon": multiplier_ok,
            # same measurement headroom as the periodic-multiplier check:
            # final_sup and defect are grid suprema of the same field taken
            # at different sample sets, so exact <= would be ulp-fragile
            "certified": bool(final_sup <= (eps + slack) * (1.0 + 1e-6)),
        }
        report["certified"] = report["certify"]["certified"]

    with _stage(report, "export"):
        gen_files = _export_action(out_dir, "tamed", spec, final)
        _write_json(os.path.join(out_dir, "phi_w.json"), phi_w.to_payload())
        report["outputs"] = {
            "generators": gen_files,
            "solution_conjugacy": "phi_w.json",
            "spec": "tamed.spec",
        }

    if not report["certified"]:
        raise CertificationFailure(
            f"final sup|log D| = {report['certify']['final_sup_log_deriv']:.6g} "
            f"exceeds epsilon + slack = {eps + slack:.6g}",
            report,
        )


def _cmd_path(
    spec: ActionSpec, action: Action, params: PipelineParams,
    out_dir: str, report: dict,
) -> None:
    n_max = params.nmax if params.nmax is not None else 24
    steps = params.steps if params.steps is not None else 8

    with _stage(report, "path"):
        samples = path_of_conjugates(action, n_max, steps)

    with _stage(report, "export"):
        jsonl = os.path.join(out_dir, "path.jsonl")
        with open(jsonl, "w") as fh:
            for s in samples:
                fh.write(dumps_canonical({
                    "t": s.t,
                    "phi": s.phi.to_payload(),
                    "c1_gap": s.c1_gap,
                    "c1_gap_track": s.c1_gap_track,
                    "gap_per_generator": s.gap_per_generator,
                    "c1_step": s.c1_step,
                }))
                fh.write("\n")
        csv_path = os.path.join(out_dir, "plot.csv")
        names = action.names
        with open(csv_path, "w") as fh:
            fh.write("t,c1_gap" + "".join(f",defect_{n}" for n in names) + "\n")
            for s in samples:
                row = [f"{s.t:.17g}", f"{s.c1_gap:.17g}"]
                row += [f"{s.gap_per_generator[n]:.17g}" for n in names]
                fh.write(",".join(row) + "\n")
        steps_max = max(
            (max(v) for s in samples if s.c1_step for v in s.c1_step.values()),
            default=0.0,
        )
        report["path"] = {
            "n_max": n_max,
            "steps_per_unit": steps,
            "samples": len(samples),
            "final_c1_gap": samples[-1].c1_gap,
            "final_c1_gap_track": samples[-1].c1_gap_track,
            "max_c1_step": float(steps_max),
        }
        report["outputs"] = {"path": "path.jsonl", "plot": "plot.csv"}


def _cmd_detect(
    spec: ActionSpec, action: Action, params: PipelineParams,
    out_dir: str, report: dict,
) -> None:
    max_len = params.max_word_len
    resolution = params.resolution if params.resolution is not None else 0.01

    with _stage(report, "detect"):
        witness = detect_resilient(action, max_len, resolution)
        payload = witness.to_dict() if witness is not None else None
        _write_json(os.path.join(out_dir, "detect.json"), payload)
        report["detect"] = {
            "max_word_len": max_len,
            "resolution": resolution,
            "found": witness is not None,
            "witness": payload,
        }
        report["outputs"] = {"witness": "detect.json"}


def _cmd_flatten(
    spec: ActionSpec, action: Action, params: PipelineParams,
    out_dir: str, report: dict,
) -> None:
    delta = params.delta
    if delta is None and params.alpha is None:
        delta = params.epsilon if params.epsilon is not None else 0.1
    period_cap = params.nmax if params.nmax is not None else _PERIOD_CAP

    with _stage(report, "periodic"):
        inventory = _periodic_inventory(action, period_cap)
        report["periodic"] = inventory

    with _stage(report, "flatten"):
        hyper = any(
            not o["parabolic"] for orbits in inventory.values() for o in orbits
        )
        if hyper:
            flattened, psi, flat_report = flatten_hyperbolic(
                action, delta=delta, alpha=params.alpha, n_max=period_cap
            )
            report["flatten"] = dict(flat_report.to_dict(), skipped=False)
        else:
            flattened = action
            report["flatten"] = {"skipped": True, "alpha": 1.0, "flagged": []}

    with _stage(report, "export"):
        gen_files = _export_action(out_dir, "flat", spec, flattened)
        report["outputs"] = {"generators": gen_files, "spec": "flat.spec"}
        report["sup_log_deriv"] = _sup_log_deriv(flattened)


def _cmd_report(
    spec: ActionSpec, action: Action, params: PipelineParams,
    out_dir: str, report: dict,
) -> None:
    with _stage(report, "diagnose"):
        report["sup_log_deriv"] = _sup_log_deriv(action)
        report["relations"] = validate_relations(action, raise_on_fail=False)
        report["periodic"] = _periodic_inventory(action)
        if action.space.is_circle:
            rot = {}
            for name, g in zip(action.names, action.gens):
                rho, err = rotation_number(g)
                rot[name] = {"rotation_number": rho, "error_bound": err}
            report["rotation_numbers"] = rot


_DISPATCH = {
    "tame-lipschitz": _cmd_tame_lipschitz,
    "tame-c1": _cmd_tame_c1,
    "path": _cmd_path,
    "detect": _cmd_detect,
    "flatten": _cmd_flatten,
    "report": _cmd_report,
}


def run_pipeline(
    command: str,
    spec: ActionSpec,
    out_dir: str,
    base_dir: str = ".",
    overrides: Optional[dict] = None,
) -> dict:
    """Runs one pipeline command and returns the report dict (also written
    to out_dir/report.json).  Raises SpecError for bad input and
    CertificationFailure — after writing the report — for failed bounds."""
    if command not in _DISPATCH:
        raise SpecError(f"unknown command {command!r}; expected one of "
                        + ", ".join(COMMANDS))
    params = spec.params.merged(**(overrides or {}))
    os.makedirs(out_dir, exist_ok=True)
    report: dict = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "space": {"kind": spec.space_kind, "grid_size": spec.grid_size},
        "group": {
            "type": spec.group_type,
            "generators": list(spec.generator_names),
        },
        "stage_order": [],
    }

    def finish():
        _write_json(os.path.join(out_dir, "report.json"), report)

    try:
        with _stage(report, "build"):
            action = build_action(spec, base_dir=base_dir)
        _DISPATCH[command](spec, action, params, out_dir, report)
    except CertificationFailure:
        finish()
        raise
    except ConjTamerError:
        report["certified"] = False
        finish()
        raise
    finish()
    return report
