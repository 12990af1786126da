"""Command-line entry point.

Exit codes: 0 success, 1 infeasible/unstable/validation failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import yaml

from fogscale.analytics import (
    InstabilityError,
    ParameterError,
    QueueParameters,
    full_report,
    net_arrival_rate,
)
from fogscale.harness import (
    SCHEMES,
    emit_results,
    find_sct_switch,
    power_consumption,
    run_sweep,
    validate_scenario,
)
from fogscale.scenario import Scenario, ScenarioError, load_scenario, parse_grid

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _scenario(args) -> Scenario:
    scenario = load_scenario(args.scenario) if args.scenario else Scenario()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "lambda_grid", None):
        overrides["lambda_min"], overrides["lambda_max"], overrides["lambda_step"] = parse_grid(args.lambda_grid)
    return dataclasses.replace(scenario, **overrides) if overrides else scenario


def cmd_analyze(args) -> int:
    scenario = _scenario(args)
    if args.arrival_rate is not None:
        lam = args.arrival_rate
    elif scenario.arrival_profile is not None:
        lam = net_arrival_rate(scenario.arrival_profile)
    else:
        lam = scenario.lambda_max
    m = args.servers if args.servers is not None else scenario.m_init
    params = QueueParameters(lam, scenario.mu, m)
    mix = scenario.mix.placed(args.sct_in_class1)
    try:
        report = full_report(params, mix)
    except InstabilityError as exc:
        print(f"error: lambda={lam:g}, mu={scenario.mu:g}, m={m}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"lambda={lam:g} mu={scenario.mu:g} m={m} alpha={mix.alpha:g} beta={mix.beta:g} "
          f"sct_class={1 if mix.sct_in_class1 else 2}")
    print(f"rho   = {params.utilization:.6g}")
    for label, value in (("pi0", report.p0), ("P_wait", report.p_wait), ("K_mean", report.mean_tasks),
                         ("W0", report.residual), ("W1", report.w1), ("W2", report.w2),
                         ("rho1", report.rho1), ("rho2", report.rho2)):
        print(f"{label:<6}= {value:.6g}")
    return EXIT_OK


def _run_sweeps(scenario: Scenario, scheme: str, out: Path, strict: bool, command: str) -> int:
    names = list(SCHEMES) if scheme == "all" else [scheme]
    sweeps = [run_sweep(SCHEMES[name], scenario) for name in names]
    emit_results(out, scenario=scenario, sweeps=sweeps,
                 run_info={"command": command, "scheme": scheme, "strict": strict})
    baseline = next((s for s in sweeps if s.scheme.name == "baseline"), None)
    infeasible = 0
    for s in sweeps:
        rep = power_consumption(s, baseline if baseline is not s else None)
        line = f"{s.scheme.name:<14} power={rep.total_power:g}P"
        if rep.reduction_percent is not None:
            line += f" reduction={rep.reduction_percent:.2f}%"
        if s.scheme.priority_enabled:
            switch = find_sct_switch(s)
            line += f" sct_switch={'none' if switch is None else f'{switch:g}'}"
        bad = sum(not d.feasible for d in s.decisions)
        infeasible += bad
        if bad:
            line += f" infeasible_points={bad}"
        print(line)
    print(f"results written to {out}")
    return EXIT_FAIL if strict and infeasible else EXIT_OK


def cmd_sweep(args) -> int:
    return _run_sweeps(_scenario(args), args.scheme, Path(args.out), args.strict, "sweep")


def cmd_compare(args) -> int:
    return _run_sweeps(_scenario(args), "all", Path(args.out), args.strict, "compare")


def _simulate(scenario: Scenario, out: Path) -> int:
    report = validate_scenario(scenario)
    emit_results(out, scenario=scenario, validation=report, run_info={"command": "simulate"})
    for r in report.rows:
        status = "pass" if r.passed else "FAIL"
        print(f"lambda={r.arrival_rate:<5g} m={r.servers:<3} {r.metric:<11} analytic={r.analytic:<12.6g} "
              f"simulated={r.simulated:<12.6g} se={r.stderr:<10.3g} {status}")
    print(f"results written to {out}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_simulate(args) -> int:
    return _simulate(_scenario(args), Path(args.out))


def cmd_replay(args) -> int:
    """Re-run the command recorded in a manifest."""
    scenario = load_scenario(args.manifest)
    run = (yaml.safe_load(Path(args.manifest).read_text(encoding="utf-8")) or {}).get("run") or {}
    command = run.get("command")
    out = Path(args.out)
    if command == "simulate":
        return _simulate(scenario, out)
    if command in ("sweep", "compare"):
        return _run_sweeps(scenario, run.get("scheme", "all"), out, bool(run.get("strict")), command)
    raise ScenarioError(f"manifest records no replayable command (got {command!r})", source=args.manifest)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogscale", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--scenario", help="YAML scenario file (defaults to the reference setup)")
        p.add_argument("--seed", type=int, help="base seed, overrides the scenario")
        if out:
            p.add_argument("--out", default="results", help="output directory (default: results)")

    p = sub.add_parser("analyze", help="closed-form report for one configuration")
    common(p, out=False)
    p.add_argument("--lambda", dest="arrival_rate", type=float, help="arrival rate (tasks/s)")
    p.add_argument("--m", dest="servers", type=int, help="number of fog nodes")
    p.add_argument("--sct-class1", dest="sct_in_class1", action="store_true",
                   help="count system-critical tasks in the high-priority class")
    p.set_defaults(func=cmd_analyze)

    for name, func, helptext in (("sweep", cmd_sweep, "sweep the load for one or all schemes"),
                                 ("compare", cmd_compare, "alias for sweep --scheme all")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        if name == "sweep":
            p.add_argument("--scheme", default="proposed", choices=[*SCHEMES, "all"])
        p.add_argument("--lambda-grid", help="start:stop:step, inclusive")
        p.add_argument("--strict", action="store_true", help="exit 1 if any point misses the threshold")
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", help="validate the closed forms against the simulator")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InstabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
