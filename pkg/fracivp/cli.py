"""
frac-ivp command line.

    frac-ivp solve   problem.json [--n N] [--tol TOL] [--out FILE]
    frac-ivp window  problem.json
    frac-ivp certify problem.json --kind {nagumo,kk,osgood} [--seed S] [...]
    frac-ivp study   problem.json --oracle "<w-expr>,<v-expr>" [--grids 64,128,256,512]

Data (CSV tables, certificate records, window reports) goes to standard
output or --out; progress and the human-readable solve report go to standard
error.

Exit codes: 0 success, 1 input error, 2 Picard non-convergence, 3 certificate
does not hold.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

from fracivp import __version__
from fracivp.certificates import (
    CertificateInputError,
    estimate_lipschitz,
    kk_check,
    nagumo_check,
    osgood_check,
)
from fracivp.expr import ExprDomainError, ExprSyntaxError, parse
from fracivp.io import ProblemFile, ProblemFileError, load_problem_file, write_table
from fracivp.logger import get_log_file, get_logger, set_console_level
from fracivp.problem import ProblemValidationError, existence_window
from fracivp.solver import ConvergenceError, picard_solve, refine_study
from fracivp.specfun import QuadratureError

logger = get_logger()

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2
EXIT_CERTIFICATE_FAILED = 3

SEED_ENV = "FRAC_IVP_SEED"

KIND_REQUIREMENTS = {
    "nagumo": ("L",),
    "kk": ("L", "C", "alpha"),
    "osgood": ("p", "C", "modulus"),
}

INPUT_ERRORS = (ProblemFileError, ProblemValidationError, ExprSyntaxError, ExprDomainError,
                CertificateInputError, QuadratureError)


class CommandInputError(ValueError):
    """Bad command-line input detected after argument parsing."""


def _report(line: str = ""):
    print(line, file=sys.stderr)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def split_top_level(text: str) -> List[str]:
    """Split on commas that are not inside parentheses."""
    parts, depth, current = [], 0, []
    for c in text:
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
        if c == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(c)
    parts.append("".join(current))
    return [p.strip() for p in parts]


def _parse_grids(text: str) -> List[int]:
    try:
        grids = [int(part) for part in text.split(",")]
    except ValueError as exc:
        raise CommandInputError(f"--grids must be comma-separated integers, got '{text}'") from exc
    if any(n < 8 for n in grids) or any(a >= b for a, b in zip(grids, grids[1:])):
        raise CommandInputError(f"--grids must be increasing integers >= 8, got '{text}'")
    return grids


def _resolve_seed(flag: Optional[int], problem: ProblemFile) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise CommandInputError(f"{SEED_ENV} must be an integer, got '{env}'") from exc
    if problem.certificates.seed is not None:
        return problem.certificates.seed
    return 0


# =============================================================================
# Commands
# =============================================================================

def cmd_solve(args) -> int:
    problem = load_problem_file(args.file)
    config = problem.solver
    if args.n is not None:
        config = replace(config, n=args.n)
    if args.tol is not None:
        config = replace(config, tol=args.tol)
    spec = problem.spec

    try:
        sol = picard_solve(spec, config)
        status = EXIT_OK
    except ConvergenceError as exc:
        logger.error(str(exc))
        sol = exc.solution
        status = EXIT_NOT_CONVERGED

    if status == EXIT_OK:
        if args.out:
            write_table(sol.to_frame(), args.out)
        else:
            write_table(sol.to_frame(), sys.stdout)

    _report(f"problem: {spec.name}")
    _report(f"f: {spec.f_display()}")
    _report(f"converged: {_format_value(status == EXIT_OK)}")
    _report(f"iterations: {sol.iterations}")
    _report(f"final_update_norm: {sol.final_update_norm:.6e}")
    _report(f"box_escape: {_format_value(sol.box_escape)}")
    _report(f"box_norm: {sol.box_norm:.10g} (r = {spec.r:g})")
    if args.verbose:
        for k, norm in enumerate(sol.update_norms, start=1):
            _report(f"  update {k}: {norm:.6e}")
    return status


def cmd_window(args) -> int:
    problem = load_problem_file(args.file)
    window = existence_window(problem.spec, density=problem.certificates.density)
    for key, value in window.to_dict().items():
        print(f"{key}: {_format_value(value)}")
    return EXIT_OK


def cmd_certify(args) -> int:
    problem = load_problem_file(args.file)
    spec = problem.spec
    params = problem.certificates
    overrides = {name: getattr(args, name) for name in ("L", "C", "alpha", "p", "modulus", "samples")
                 if getattr(args, name) is not None}
    try:
        params = replace(params, **overrides)
    except ProblemValidationError as exc:
        raise CommandInputError(str(exc)) from exc
    seed = _resolve_seed(args.seed, problem)

    if params.L is None and args.estimate_lipschitz and "L" in KIND_REQUIREMENTS[args.kind]:
        params = replace(params, L=estimate_lipschitz(spec, params.samples, seed))
    missing = [name for name in KIND_REQUIREMENTS[args.kind] if getattr(params, name) is None]
    if missing:
        raise CommandInputError(f"missing certificate parameters for {args.kind}: "
                                f"{', '.join(missing)}")

    if args.kind == "nagumo":
        horizon = None
        if args.on_window:
            horizon = existence_window(spec, density=params.density).T0
        report = nagumo_check(spec, params.L, horizon=horizon)
    elif args.kind == "kk":
        window = existence_window(spec, density=params.density)
        report = kk_check(spec, params.L, params.C, params.alpha, params.samples, seed, window)
    else:
        modulus = parse(params.modulus, variables=("u",))
        window = existence_window(spec, density=params.density)
        report = osgood_check(spec, modulus, params.p, params.C, params.samples, params.eps,
                              params.gamma, seed, window)

    record = report.to_dict()
    record['problem'] = spec.name
    record['seed'] = seed
    print(json.dumps(record, indent=2, sort_keys=True))
    return EXIT_OK if report.holds else EXIT_CERTIFICATE_FAILED


def cmd_study(args) -> int:
    problem = load_problem_file(args.file)
    grids = _parse_grids(args.grids)
    parts = split_top_level(args.oracle)
    if len(parts) != 2:
        raise CommandInputError(f"--oracle needs exactly two expressions '<w>,<v>', got {len(parts)}")
    oracle = tuple(parse(part, variables=("x",)) for part in parts)
    config = problem.solver
    if args.tol is not None:
        config = replace(config, tol=args.tol)

    try:
        table = refine_study(problem.spec, grids, oracle, config)
    except ConvergenceError as exc:
        logger.error(str(exc))
        return EXIT_NOT_CONVERGED
    write_table(table, args.out if args.out else sys.stdout)
    return EXIT_OK


# =============================================================================
# Entry point
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frac-ivp",
        description="Picard solver and uniqueness certificates for Riemann-Liouville "
                    "initial value problems of order 1 < sigma < 2")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('file', help='JSON problem file')
    common.add_argument('--verbose', action='store_true', help='Log progress to standard error')

    sub = parser.add_subparsers(dest='command', required=True)

    solve = sub.add_parser('solve', parents=[common], help='Solve on the existence window, CSV out')
    solve.add_argument('--n', type=int, help='Grid subintervals')
    solve.add_argument('--tol', type=float, help='Picard stopping tolerance')
    solve.add_argument('--out', help='Output CSV path (default: standard output)')
    solve.set_defaults(handler=cmd_solve)

    window = sub.add_parser('window', parents=[common], help='Report the existence window')
    window.set_defaults(handler=cmd_window)

    certify = sub.add_parser('certify', parents=[common], help='Evaluate a uniqueness certificate')
    certify.add_argument('--kind', choices=sorted(KIND_REQUIREMENTS), required=True)
    certify.add_argument('--seed', type=int, help=f'Sampling seed (fallback: ${SEED_ENV}, then 0)')
    certify.add_argument('--L', type=float, dest='L', help='Lipschitz constant')
    certify.add_argument('--C', type=float, dest='C', help='Certificate constant C')
    certify.add_argument('--alpha', type=float, help='Krasnoselskii-Krein exponent in (0, 1)')
    certify.add_argument('--p', type=float, help='Osgood exponent p > 1')
    certify.add_argument('--modulus', help='Osgood modulus, an expression in u')
    certify.add_argument('--samples', type=int, help='Sampled point pairs')
    certify.add_argument('--estimate-lipschitz', action='store_true',
                         help='Estimate L by sampling when it is not given')
    certify.add_argument('--on-window', action='store_true',
                         help='Use T0 instead of T as the Nagumo horizon')
    certify.set_defaults(handler=cmd_certify)

    study = sub.add_parser('study', parents=[common], help='Grid-refinement study, CSV out')
    study.add_argument('--grids', default='64,128,256,512', help='Comma-separated grid sizes')
    study.add_argument('--oracle', required=True,
                       help='Exact solution as "<w-expr>,<v-expr>" in x')
    study.add_argument('--tol', type=float, help='Picard stopping tolerance')
    study.add_argument('--out', help='Output CSV path (default: standard output)')
    study.set_defaults(handler=cmd_study)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT

    set_console_level(logging.INFO if args.verbose else logging.WARNING)
    try:
        status = args.handler(args)
    except (CommandInputError, *INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.verbose and get_log_file() is not None:
        _report(f"log: {get_log_file()}")
    return status


if __name__ == '__main__':
    sys.exit(main())
