"""Command-line front end.

Subcommands mirror the library: solve (gradient NLP or bounded policy
iteration, best of several random restarts), evaluate (exact value and
Bellman residual of a stored policy), simulate (Monte Carlo cross-check),
export-nlp (algebraic program text), and sweep (one solve row per
controller size, CSV).

Exit codes: 0 success, 2 bad flags or unparsable input files, 1 internal
errors.  Reports are byte-stable given a seed except for timing fields.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import decbpi, domains, io, optimizer, simulate
from .controller import JointPolicy
from .evaluation import bellman_residual, evaluate, objective
from .model import DecPomdp

REPORT_COLUMNS = ("size", "method", "device", "mean", "best", "mean_time_s")


class CliError(Exception):
    """Flag-level misuse detected after argparse; exits with code 2."""


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--domain", choices=sorted(domains.BUILDERS),
                   help="built-in benchmark name")
    p.add_argument("--instance", metavar="FILE",
                   help="instance file (io grammar)")


def _add_solver_flags(p: argparse.ArgumentParser,
                      with_report: bool = True) -> None:
    p.add_argument("--method", choices=("nlp", "bpi"), default="nlp")
    p.add_argument("--device", type=int, default=1, metavar="C",
                   help="correlation device states (1 = no device)")
    p.add_argument("--restarts", type=int, default=10, metavar="N")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--out", metavar="POLICYFILE",
                   help="write the best policy here")
    if with_report:
        p.add_argument("--report", choices=("text", "csv", "json"),
                       default="text")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decfsc",
        description="Fixed-size stochastic controllers for decentralized "
                    "POMDPs: gradient-based solver, bounded policy "
                    "iteration, exact evaluation, simulation, and an "
                    "algebraic exporter.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="optimize controllers")
    _add_model_flags(p)
    _add_solver_flags(p)
    p.add_argument("--nodes", type=int, default=1, metavar="K",
                   help="controller nodes per agent")

    p = sub.add_parser("evaluate", help="exact value of a stored policy")
    _add_model_flags(p)
    p.add_argument("--policy", required=True, metavar="FILE")

    p = sub.add_parser("simulate", help="Monte Carlo value of a policy")
    _add_model_flags(p)
    p.add_argument("--policy", required=True, metavar="FILE")
    p.add_argument("--episodes", type=int, default=10_000)
    p.add_argument("--tol", type=float,
                   default=simulate.DEFAULT_TRUNCATION_TOL,
                   help="truncation tolerance for the horizon")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("export-nlp", help="write the algebraic program")
    _add_model_flags(p)
    p.add_argument("--nodes", type=int, default=1, metavar="K")
    p.add_argument("--device", type=int, default=1, metavar="C")
    p.add_argument("--out", metavar="FILE",
                   help="output path (default: stdout)")

    p = sub.add_parser("sweep", help="solve across controller sizes (CSV)")
    _add_model_flags(p)
    _add_solver_flags(p, with_report=False)
    p.add_argument("--nodes-min", type=int, default=1, metavar="K")
    p.add_argument("--nodes-max", type=int, default=4, metavar="K")

    return parser


def _load_model(args: argparse.Namespace) -> DecPomdp:
    if bool(args.domain) == bool(args.instance):
        raise CliError("exactly one of --domain or --instance is required")
    if args.domain:
        return domains.build(args.domain)
    with open(args.instance, encoding="utf-8") as fh:
        return io.parse_instance(fh.read())


def _load_policy(path: str) -> JointPolicy:
    with open(path, encoding="utf-8") as fh:
        return io.parse_policy(fh.read())


def _solve_one(model: DecPomdp, method: str, nodes: int, device: int,
               restarts: int, seed: int
               ) -> tuple[JointPolicy, optimizer.SolveReport]:
    if nodes < 1:
        raise CliError("--nodes must be at least 1")
    if device < 1:
        raise CliError("--device must be at least 1")
    if restarts < 1:
        raise CliError("--restarts must be at least 1")
    if method == "nlp":
        config = optimizer.NlpConfig(restarts=restarts, seed=seed,
                                     device_size=device)
        return optimizer.solve_nlp(model, nodes, config)
    config = decbpi.BpiConfig(restarts=restarts, seed=seed)
    return decbpi.solve_bpi(model, nodes, device, config)


def _report_row(report: optimizer.SolveReport, size: int, method: str,
                device: int) -> dict:
    return {
        "size": size,
        "method": method,
        "device": device,
        "mean": report.mean_objective,
        "best": report.best_objective,
        "mean_time_s": report.mean_time_s,
    }


def _render_rows(rows: list[dict], fmt: str, out) -> None:
    if fmt == "csv":
        out.write(",".join(REPORT_COLUMNS) + "\n")
        for row in rows:
            out.write(",".join(_cell(row[c]) for c in REPORT_COLUMNS) + "\n")
    elif fmt == "json":
        payload = [{c: row[c] for c in REPORT_COLUMNS} for row in rows]
        out.write(json.dumps({"rows": payload}, indent=2) + "\n")
    else:
        widths = {c: max(len(c), *(len(_cell(r[c])) for r in rows))
                  for c in REPORT_COLUMNS}
        out.write("  ".join(c.ljust(widths[c]) for c in REPORT_COLUMNS)
                  + "\n")
        for row in rows:
            out.write("  ".join(_cell(row[c]).ljust(widths[c])
                                for c in REPORT_COLUMNS) + "\n")


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _cmd_solve(args: argparse.Namespace) -> int:
    model = _load_model(args)
    policy, report = _solve_one(model, args.method, args.nodes, args.device,
                                args.restarts, args.seed)
    _render_rows([_report_row(report, args.nodes, args.method, args.device)],
                 args.report, sys.stdout)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(io.write_policy(policy))
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    model = _load_model(args)
    policy = _load_policy(args.policy)
    table = evaluate(model, policy)
    print(f"objective: {objective(model, policy, table):.12g}")
    print(f"bellman_residual: "
          f"{bellman_residual(model, policy, table):.6g}")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    model = _load_model(args)
    policy = _load_policy(args.policy)
    table = evaluate(model, policy)
    analytic = objective(model, policy, table)
    config = simulate.RolloutConfig(num_episodes=args.episodes,
                                    seed=args.seed,
                                    truncation_tolerance=args.tol)
    est = simulate.estimate_value(model, policy, config)
    z = simulate.z_value(config.confidence)
    print(f"episodes: {args.episodes}")
    print(f"estimate: {est.mean:.12g}")
    print(f"std_error: {est.std_error:.6g}")
    print(f"ci{int(round(config.confidence * 100))}: "
          f"{est.mean - z * est.std_error:.12g} .. "
          f"{est.mean + z * est.std_error:.12g}")
    print(f"truncation_bound: {est.truncation_bound:.6g}")
    print(f"analytic: {analytic:.12g}")
    print(f"difference: {abs(est.mean - analytic):.6g}")
    return 0


def _cmd_export_nlp(args: argparse.Namespace) -> int:
    model = _load_model(args)
    if args.nodes < 1:
        raise CliError("--nodes must be at least 1")
    if args.device < 1:
        raise CliError("--device must be at least 1")
    export = io.export_nlp(model, args.nodes, args.device)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(export.text)
    else:
        sys.stdout.write(export.text)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    model = _load_model(args)
    if args.nodes_min < 1:
        raise CliError("--nodes-min must be at least 1")
    if args.nodes_max < args.nodes_min:
        raise CliError("--nodes-max must be at least --nodes-min")
    rows = []
    best_policy = None
    best_value = None
    for size in range(args.nodes_min, args.nodes_max + 1):
        policy, report = _solve_one(model, args.method, size, args.device,
                                    args.restarts, args.seed)
        rows.append(_report_row(report, size, args.method, args.device))
        if best_value is None or report.best_objective > best_value:
            best_value, best_policy = report.best_objective, policy
    _render_rows(rows, "csv", sys.stdout)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(io.write_policy(best_policy))
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "evaluate": _cmd_evaluate,
    "simulate": _cmd_simulate,
    "export-nlp": _cmd_export_nlp,
    "sweep": _cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except io.ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
