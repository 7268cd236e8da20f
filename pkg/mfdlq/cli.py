"""
Command-line interface: ``mfdlq <command> [options]``.

Exit status is 0 when the command's check holds, 1 when a check fails and 2
on usage or input errors. Logs go to standard error; data goes to standard
output or to ``--out``.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from pydantic import ValidationError as PydanticValidationError

from . import __version__
from .adjoint import certify
from .config import STATIONARITY_TOLERANCE, Settings
from .exceptions import InvalidProblemError, MFDLQError, ProblemFormatError
from .models import NoiseKind, NoiseModel, Policy, ProblemSpec
from .problem import dump_problem, generate_random, load_problem, validate
from .riccati import check_compatible, load_solution, optimal_value, solution_document, solve
from .serialization import dumps, format_float, write_text
from .simulator import simulate, write_cost_csv, write_trace_csv
from .tree import assemble_cost, build_tree, compare, solve_exact, write_tree_csv

logger = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace], int]


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ProblemFormatError(f"{path} is not valid UTF-8: {exc.reason}") from exc


def _read_problem(path: str) -> ProblemSpec:
    return load_problem(_read_text(path))


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        write_text(out, text)
        logger.info("Wrote %s", out)
    else:
        sys.stdout.write(text)


def _emit_document(document: Dict[str, Any], out: Optional[str]) -> None:
    _emit(dumps(document), out)


def _max_dim(args: argparse.Namespace) -> int:
    return args.max_dim if args.max_dim is not None else Settings.from_env().max_decision_dim


# Commands

def cmd_validate(args: argparse.Namespace) -> int:
    """Check assumption (J); exit 0 iff the problem passes."""
    report = validate(_read_problem(args.problem))
    _emit_document(report.to_document(), args.out)
    for violation in report.violations:
        logger.warning("%s", violation.description)
    return 0 if report.ok else 1


def cmd_solve(args: argparse.Namespace) -> int:
    """Solve the Riccati recursions and print the optimal value."""
    spec = _read_problem(args.problem)
    sol = solve(spec, classical=args.classical)
    if args.out:
        _emit_document(solution_document(sol, spec.x0), args.out)
    sys.stdout.write(f"optimal_value: {format_float(optimal_value(sol, spec.x0))}\n")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    """Estimate the cost of a policy by Monte-Carlo simulation."""
    spec = _read_problem(args.problem)
    policy = Policy.riccati(solve(spec)) if args.policy == "riccati" else Policy.zero()
    report = simulate(
        spec,
        policy,
        num_paths=args.paths,
        seed=args.seed,
        mean_estimator=args.estimator,
        settings=Settings.from_env(),
    )
    if args.csv:
        write_cost_csv(args.csv, report)
    if args.trace_csv:
        write_trace_csv(args.trace_csv, report.state_mean_trace)
    _emit_document(report.to_document(), args.out)
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    """Compare the Riccati solution with the exact scenario-tree optimum."""
    spec = _read_problem(args.problem)
    tree = build_tree(spec, _max_dim(args))
    cost = assemble_cost(spec, tree)
    report = compare(spec, solve(spec), tree, cost)
    if args.tree_csv:
        controls, _ = solve_exact(spec, tree, cost)
        write_tree_csv(args.tree_csv, spec, tree, controls)
    if args.out:
        _emit_document(report.to_document(), args.out)
    sys.stdout.write(f"value_gap: {format_float(report.value_gap)}\n")
    sys.stdout.write(f"control_gap: {format_float(report.control_gap)}\n")
    return 0 if report.passed else 1


def cmd_generate(args: argparse.Namespace) -> int:
    """Write a random problem satisfying assumption (J)."""
    try:
        noise = NoiseModel(kind=NoiseKind(args.noise), variance=args.variance)
    except PydanticValidationError as exc:
        raise InvalidProblemError(f"Invalid noise variance {args.variance!r}") from exc
    spec = generate_random(args.n, args.r, args.N, args.seed, args.meanfield, noise)
    _emit(dump_problem(spec), args.out)
    return 0


def cmd_certify(args: argparse.Namespace) -> int:
    """Solve, compare with the tree oracle and check Hamiltonian stationarity."""
    spec = _read_problem(args.problem)
    if args.solution:
        sol = load_solution(_read_text(args.solution))
        check_compatible(spec, sol)
    else:
        sol = solve(spec)
    tree = build_tree(spec, _max_dim(args))
    comparison = compare(spec, sol, tree)
    certificate = certify(spec, sol, tree)
    passed = comparison.passed and certificate.max_residual <= STATIONARITY_TOLERANCE
    _emit_document(
        {
            "certificate": certificate.to_document(verbose=args.verbose),
            "comparison": comparison.to_document(),
            "pass": passed,
        },
        args.out,
    )
    if not passed:
        logger.error("Certification failed: max residual %.3g", certificate.max_residual)
    return 0 if passed else 1


# Parser

def _common_options(defaults: bool) -> argparse.ArgumentParser:
    """
    Flags accepted before and after the command.

    The copy attached to each subcommand has suppressed defaults, so a flag
    given before the command is not reset when it is absent after it.
    """

    def default(value: Any) -> Any:
        return value if defaults else argparse.SUPPRESS

    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument(
        "--out", default=default(None), help="Write the command's document to this file"
    )
    common.add_argument("--seed", type=int, default=default(0), help="Random seed (default: 0)")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument(
        "--quiet", action="store_true", default=default(False), help="Only log warnings and errors"
    )
    verbosity.add_argument(
        "--verbose", action="store_true", default=default(False), help="Log debug output"
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per operation."""
    common = _common_options(defaults=False)
    parser = argparse.ArgumentParser(
        prog="mfdlq",
        description="Mean-field discrete-time LQ solver and certification toolkit",
        parents=[_common_options(defaults=True)],
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add(name: str, handler: Handler, help_text: str) -> argparse.ArgumentParser:
        command = sub.add_parser(name, parents=[common], help=help_text, allow_abbrev=False)
        command.set_defaults(handler=handler)
        return command

    p = add("validate", cmd_validate, "check assumption (J)")
    p.add_argument("problem", help="Problem JSON file")

    p = add("solve", cmd_solve, "solve the Riccati recursions")
    p.add_argument("problem", help="Problem JSON file")
    p.add_argument("--classical", action="store_true", help="Use the barred-free recursion")

    p = add("simulate", cmd_simulate, "Monte-Carlo cost estimate")
    p.add_argument("problem", help="Problem JSON file")
    p.add_argument("--paths", type=int, default=10_000, help="Number of paths (default: 10000)")
    p.add_argument("--policy", choices=["riccati", "zero"], default="riccati")
    p.add_argument("--estimator", choices=["analytic", "sample"], default="analytic",
                   help="How mean-field cost terms are evaluated")
    p.add_argument("--csv", help="Write per-path costs to this CSV file")
    p.add_argument("--trace-csv", help="Write the empirical mean trace to this CSV file")

    p = add("oracle", cmd_oracle, "compare with the exact scenario tree")
    p.add_argument("problem", help="Problem JSON file")
    p.add_argument("--max-dim", type=int, default=None, help="Decision dimension cap")
    p.add_argument("--tree-csv", help="Write optimal node states and controls to this CSV file")

    p = add("generate", cmd_generate, "write a random problem")
    p.add_argument("--n", type=int, required=True, help="State dimension")
    p.add_argument("--r", type=int, required=True, help="Control dimension")
    p.add_argument("--N", type=int, required=True, help="Horizon")
    p.add_argument("--meanfield", action="store_true", help="Draw barred matrices")
    p.add_argument("--noise", choices=[kind.value for kind in NoiseKind], default="rademacher")
    p.add_argument("--variance", type=float, default=1.0, help="Noise variance (default: 1)")

    p = add("certify", cmd_certify, "end-to-end optimality certificate")
    p.add_argument("problem", help="Problem JSON file")
    p.add_argument("--max-dim", type=int, default=None, help="Decision dimension cap")
    p.add_argument("--solution", help=argparse.SUPPRESS)

    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if getattr(args, "quiet", False):
        level = logging.WARNING
    elif getattr(args, "verbose", False):
        level = logging.DEBUG
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("mfdlq").setLevel(level)


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return its exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    _configure_logging(args)

    try:
        return args.handler(args)
    except MFDLQError as exc:
        logger.error("%s", exc)
        return exc.exit_code if exc.exit_code is not None else 1
    except OSError as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
