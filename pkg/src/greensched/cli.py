"""Command-line front end.

Subcommands::

    greensched fit       --telemetry t.csv --server spec.json --out dir [--split 0.65]
    greensched generate  --scenario s.json [--seed N] --out dir
    greensched optimize  --scenario s.json [--seed N --policy var ...] --out dir
    greensched simulate  --scenario s.json --allocation a.json [--seed N] --out dir
    greensched baseline  --scenario s.json [--seed N] --out dir

All outputs are CSV/JSON with LF endings; every file carries the scenario
digest and seed in a leading comment so runs are auditable and reproducible.

Exit codes: 0 success, 2 configuration/parse error, 3 model domain error,
4 allocation/dimension error, 1 unexpected failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import power as pw
from . import sim
from .errors import (
    ConfigurationError,
    GreenschedError,
    InvalidAllocationError,
    ModelDomainError,
    ParseError,
)
from .nsga import EvolveConfig, evolve
from .scenario import Scenario, load_scenario, load_server_spec, save_server_spec
from .workload import generate_jobs, parse_trace, serialize_trace


def _header(scenario: Scenario) -> str:
    return f"# scenario_digest={scenario.digest} seed={scenario.optimizer.seed}\n"


def _write_evaluation(
    out: Path, scenario: Scenario, res: sim.EvaluationResult, stem: str
) -> None:
    jobs_path = out / f"{stem}_jobs.csv"
    with jobs_path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(_header(scenario))
        fh.write(
            "task_id,job_index,server_set,start_s,completion_s,overrun_s,missed,aborted\n"
        )
        server_set_of = {
            tid: "|".join(str(s) for s in srvs) for tid, srvs in res.task_servers
        }
        for o in sorted(res.per_job, key=lambda o: (o.task_id, o.job_index)):
            fh.write(
                f"{o.task_id},{o.job_index},{server_set_of.get(o.task_id, '')},"
                f"{o.start_s!r},{o.completion_s!r},{o.overrun_s!r},"
                f"{int(o.missed)},{int(o.aborted)}\n"
            )
    summary = {
        "lambda": res.lam,
        "energy_J": res.energy_j,
        "energy_units": res.energy_units,
        "hard_misses": res.hard_misses,
        "control_aborts": res.control_aborts,
        "soft_violations": res.soft_violations,
        "constraints": [
            {"task_id": c.task_id, "check": c.description, "passed": c.passed}
            for c in res.constraint_report
        ],
        "per_server": [
            {
                "server_id": s.server_id,
                "mode_index": s.mode_index,
                "busy_time_s": s.busy_time_s,
                "utilization_sum": s.utilization_sum,
                "executed_instructions": s.executed_instructions,
                "dynamic_energy_J": s.dynamic_energy_j,
                "leakage_energy_J": s.leakage_energy_j,
            }
            for s in res.per_server
        ],
        "scenario_digest": scenario.digest,
        "seed": scenario.optimizer.seed,
    }
    (out / f"{stem}_summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )


def _trace_for(scenario: Scenario):
    return generate_jobs(
        scenario.profiles, scenario.optimizer.seed, scenario.phase_policy
    )


def cmd_fit(args: argparse.Namespace) -> int:
    template = load_server_spec(args.server)
    samples = []
    path = Path(args.telemetry)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        required = ["utilization", "t_cpu_k", "t_mem_k", "mode_index", "power_w"]
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise ParseError(f"telemetry file missing column(s): {', '.join(missing)}")
        for rownum, row in enumerate(reader, start=2):
            try:
                samples.append(
                    pw.TelemetrySample(
                        utilization=float(row["utilization"]),
                        t_cpu_k=float(row["t_cpu_k"]),
                        t_mem_k=float(row["t_mem_k"]),
                        mode_index=int(row["mode_index"]),
                        measured_power_w=float(row["power_w"]),
                    )
                )
            except (ValueError, GreenschedError) as exc:
                raise ParseError(str(exc), row=rownum) from exc
    result = pw.fit_constants(samples, template, split=args.split)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_server_spec(result.spec, out / "fitted_server.json")
    report = {
        "validation_mape_pct": result.validation_error_pct,
        "n_fit": result.n_fit,
        "n_validate": result.n_validate,
        "split": args.split,
    }
    (out / "fit_report.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8"
    )
    print(f"validation MAPE: {result.validation_error_pct:.4f}%")
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, seed=args.seed)
    trace = _trace_for(scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    serialize_trace(trace, out / "trace.csv")
    print(f"wrote {len(trace.jobs)} jobs to {out / 'trace.csv'}")
    return 0


def _scenario_from_args(args: argparse.Namespace) -> Scenario:
    return load_scenario(
        args.scenario,
        seed=args.seed,
        policy=args.policy,
        generations=args.generations,
        population=args.population,
        max_mode_index=args.max_mode_index,
    )


def cmd_optimize(args: argparse.Namespace) -> int:
    scenario = _scenario_from_args(args)
    trace = _trace_for(scenario)
    result = evolve(
        list(scenario.cluster),
        list(scenario.profiles),
        trace,
        scenario.optimizer,
        soft_constraints=scenario.soft_constraints,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with (out / "front.csv").open("w", newline="", encoding="utf-8") as fh:
        fh.write(_header(scenario))
        fh.write("lambda,energy_J,energy_units,dvfs_modes,shares_flat\n")
        for p in result.front:
            modes = "|".join(str(k) for k in p.allocation.dvfs)
            shares = "|".join(
                str(s) for row in p.allocation.shares for s in row
            )
            fh.write(
                f"{p.objectives.lam},{p.energy_j!r},{p.energy_units!r},{modes},{shares}\n"
            )

    with (out / "convergence.csv").open("w", newline="", encoding="utf-8") as fh:
        fh.write(_header(scenario))
        fh.write("generation,best_lambda,best_energy_J\n")
        for gen, lam, energy in result.convergence:
            fh.write(f"{gen},{lam},{energy!r}\n")

    best = min(result.front, key=lambda p: (p.objectives.lam, p.energy_j))
    alloc_doc = {
        "dvfs": list(best.allocation.dvfs),
        "shares": [list(r) for r in best.allocation.shares],
        "lambda": best.objectives.lam,
        "energy_J": best.energy_j,
        "scenario_digest": scenario.digest,
        "seed": scenario.optimizer.seed,
    }
    (out / "best_allocation.json").write_text(
        json.dumps(alloc_doc, indent=2) + "\n", encoding="utf-8"
    )

    with (out / "best_modes.txt").open("w", encoding="utf-8") as fh:
        fh.write(_header(scenario))
        fh.write(
            "Platform " + " ".join(f"CPU {i + 1}" for i in range(len(best.allocation.dvfs))) + "\n"
        )
        label = scenario.cluster[0].spec.label
        fh.write(label + " " + " ".join(str(k) for k in best.allocation.dvfs) + "\n")

    print(
        f"front: {len(result.front)} points, best lambda={best.objectives.lam}, "
        f"energy={best.energy_j:.1f} J, generations={result.generations_run}"
    )
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, seed=args.seed)
    with Path(args.allocation).open(encoding="utf-8") as fh:
        doc = json.load(fh)
    alloc = sim.Allocation(
        dvfs=tuple(int(k) for k in doc["dvfs"]),
        shares=tuple(tuple(int(s) for s in row) for row in doc["shares"]),
    )
    if len(alloc.dvfs) != len(scenario.cluster) or len(alloc.shares) != len(
        scenario.profiles
    ):
        raise InvalidAllocationError(
            f"allocation shape ({len(alloc.shares)} tasks x {len(alloc.dvfs)} servers) "
            f"does not match scenario ({len(scenario.profiles)} x {len(scenario.cluster)})"
        )
    trace = (
        parse_trace(args.trace) if args.trace else _trace_for(scenario)
    )
    res = sim.evaluate_allocation(
        list(scenario.cluster),
        list(scenario.profiles),
        trace,
        alloc,
        soft_constraints=scenario.soft_constraints,
        dyn_energy_form=scenario.dyn_energy_form,
        energy_unit_j=scenario.energy_unit_j,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_evaluation(out, scenario, res, "simulate")
    print(f"lambda={res.lam}, energy={res.energy_j:.1f} J")
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario, seed=args.seed)
    trace = _trace_for(scenario)
    res = sim.edf_schedule(
        list(scenario.cluster),
        list(scenario.profiles),
        trace,
        dvfs_policy="max",
        soft_constraints=scenario.soft_constraints,
        energy_unit_j=scenario.energy_unit_j,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_evaluation(out, scenario, res, "baseline")
    print(f"EDF baseline: lambda={res.lam}, energy={res.energy_j:.1f} J")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greensched",
        description="DVFS mode and workload-allocation optimizer for mixed real-time clusters",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, scenario: bool = True):
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None, help="RNG seed override")
        p.add_argument("--out", required=True, help="output directory")

    p_fit = sub.add_parser("fit", help="calibrate power-model constants from telemetry")
    p_fit.add_argument("--telemetry", required=True, help="telemetry CSV")
    p_fit.add_argument("--server", required=True, help="server spec template JSON")
    p_fit.add_argument("--split", type=float, default=0.65, help="fitting fraction")
    p_fit.add_argument("--out", required=True)
    p_fit.set_defaults(func=cmd_fit)

    p_gen = sub.add_parser("generate", help="expand the workload into a job trace")
    common(p_gen)
    p_gen.set_defaults(func=cmd_generate)

    p_opt = sub.add_parser("optimize", help="run the evolutionary optimizer")
    common(p_opt)
    p_opt.add_argument("--policy", choices=["min", "max", "var"], default=None)
    p_opt.add_argument("--generations", type=int, default=None)
    p_opt.add_argument("--population", type=int, default=None)
    p_opt.add_argument("--max-mode-index", type=int, default=None)
    p_opt.set_defaults(func=cmd_optimize)

    p_sim = sub.add_parser("simulate", help="replay a saved allocation")
    common(p_sim)
    p_sim.add_argument("--allocation", required=True, help="allocation JSON")
    p_sim.add_argument("--trace", default=None, help="replay a serialized trace CSV")
    p_sim.set_defaults(func=cmd_simulate)

    p_base = sub.add_parser("baseline", help="run the EDF baseline at max DVFS mode")
    common(p_base)
    p_base.set_defaults(func=cmd_baseline)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ModelDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InvalidAllocationError, GreenschedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
