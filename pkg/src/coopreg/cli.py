"""Command-line driver: ``coopreg {check,synthesize,verify,simulate}``.

Exit codes: 0 success, 2 assumption failure, 3 synthesis infeasible,
4 verification failure, 5 simulation divergence.
"""

import argparse
import json
import sys
from pathlib import Path

from .exceptions import (
    AssumptionViolation,
    RegulatorSingular,
    SimulationDivergence,
    SynthesisInfeasible,
)
from .io import load_gains, load_scenario, save_gains
from .plant import check_assumptions
from .regulator import verify_regulation
from .sim import decay_metrics, simulate_output_feedback, simulate_state_feedback
from .synthesis import STATE_FEEDBACK, synthesize_output_feedback, synthesize_state_feedback

EXIT_OK = 0
EXIT_ASSUMPTION = 2
EXIT_INFEASIBLE = 3
EXIT_VERIFY = 4
EXIT_DIVERGED = 5


def _emit(report, out_dir, name):
    text = json.dumps(report, indent=2)
    print(text)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / name).write_text(text)


def _out_dir(args, scenario):
    return Path(args.out if args.out is not None else scenario.output_dir)


def synthesize(scenario, gamma0=None, max_halvings=None):
    syn = scenario.synthesis
    kw = dict(
        gamma0=syn["gamma0"] if gamma0 is None else gamma0,
        nu1=syn["nu1"],
        max_halvings=syn["max_halvings"] if max_halvings is None else max_halvings,
    )
    if syn["kind"] == STATE_FEEDBACK:
        return synthesize_state_feedback(scenario.ensemble, **kw)
    return synthesize_output_feedback(scenario.ensemble, nu2=syn["nu2"], **kw)


def simulate(scenario, ctrl):
    sim = scenario.simulation
    fn = simulate_state_feedback if ctrl.kind == STATE_FEEDBACK else simulate_output_feedback
    return fn(scenario.ensemble, ctrl, init=sim.get("init"),
              t_end=float(sim.get("t_end", 200.0)), dt=sim.get("dt"))


def cmd_check(args):
    sc = load_scenario(args.config)
    report = check_assumptions(sc.ensemble)
    _emit(report.to_dict(), Path(args.out) if args.out else None, "check.json")
    return EXIT_OK if report.ok else EXIT_ASSUMPTION


def cmd_synthesize(args):
    sc = load_scenario(args.config)
    out = _out_dir(args, sc)
    try:
        ctrl = synthesize(sc)
    except AssumptionViolation as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except SynthesisInfeasible as exc:
        print(f"synthesis infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    out.mkdir(parents=True, exist_ok=True)
    path = Path(args.gains) if args.gains else out / "gains.json"
    save_gains(ctrl, path)
    print(json.dumps({"gains": str(path), "kind": ctrl.kind, "gamma": ctrl.gamma,
                      "nu1": ctrl.nu1, "nu2": ctrl.nu2}, indent=2))
    return EXIT_OK


def _gains_or_synth(args, sc):
    if args.gains:
        return load_gains(args.gains)
    return synthesize(sc)


def cmd_verify(args):
    sc = load_scenario(args.config)
    try:
        ctrl = _gains_or_synth(args, sc)
    except AssumptionViolation as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except SynthesisInfeasible as exc:
        print(f"synthesis infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    reports = {}
    try:
        reports["nominal"] = verify_regulation(sc.ensemble, ctrl, use_nominal=True)
        if sc.has_perturbation:
            reports["perturbed"] = verify_regulation(sc.ensemble, ctrl, use_nominal=False)
    except RegulatorSingular as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    _emit({k: r.to_dict() for k, r in reports.items()}, _out_dir(args, sc), "verify.json")
    return EXIT_OK if all(r.regulated for r in reports.values()) else EXIT_VERIFY


def _run_one(sc, ctrl, csv_path):
    traj = simulate(sc, ctrl)
    traj.to_csv(csv_path)
    metrics = decay_metrics(traj).to_dict()
    metrics.update(gamma=ctrl.gamma, kind=ctrl.kind, t_end=float(traj.times[-1]),
                   dt=traj.dt, csv=str(csv_path))
    return metrics


def cmd_simulate(args):
    sc = load_scenario(args.config)
    out = _out_dir(args, sc)
    out.mkdir(parents=True, exist_ok=True)
    sweep = sc.synthesis.get("gamma_sweep")
    try:
        if sweep and not args.gains:
            runs = []
            for g in sweep:
                entry = {"gamma": float(g)}
                try:
                    ctrl = synthesize(sc, gamma0=float(g), max_halvings=0)
                except SynthesisInfeasible as exc:
                    entry["error"] = str(exc)
                else:
                    entry.update(_run_one(sc, ctrl, out / f"trajectory_gamma_{g:g}.csv"))
                runs.append(entry)
            metrics = {"sweep": runs}
        else:
            metrics = _run_one(sc, _gains_or_synth(args, sc), out / "trajectory.csv")
    except AssumptionViolation as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except SynthesisInfeasible as exc:
        print(f"synthesis infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SimulationDivergence as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    _emit(metrics, out, "metrics.json")
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "synthesize": cmd_synthesize,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="coopreg",
        description="Distributed internal-model controllers for delayed multi-agent systems.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="scenario JSON file")
    parser.add_argument("--gains", help="gains JSON file (written by synthesize, read otherwise)")
    parser.add_argument("--out", help="output directory (overrides output.dir in the config)")
    parser.add_argument("--seed", type=int, default=None,
                        help="accepted for test helpers; the pipeline itself is deterministic")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
