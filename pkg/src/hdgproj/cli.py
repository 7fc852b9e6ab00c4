"""Command line entry point: ``hdgproj solve | study | compare``.

Exit codes: 0 success, 1 error, 2 when ``compare`` flags a sub-optimal order.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .analysis import error_report
from .hdg import DiscretizationConfig, MethodVariant, flux_residual, solve
from .mesh import generate_structured, read_mesh
from .problems import get_problem
from .study import StudyConfig, compare_records, emit_study, run_study


def _cmd_solve(args) -> int:
    variant = MethodVariant.parse(args.method)
    problem = get_problem(args.problem)
    mesh = read_mesh(args.mesh) if args.mesh else generate_structured(args.n)
    config = DiscretizationConfig(args.k, args.l, args.tau_coeff)
    sol = solve(mesh, config, variant, problem.f, problem.g)
    rep = error_report(sol, problem, args.n)
    print(f"method={variant.value} k={args.k} l={args.l} n={args.n} "
          f"cells={mesh.n_cells} h={mesh.h_global:.6e} tau={config.tau(mesh):.6e}")
    print(f"err_q={rep.err_q:.6e} err_u={rep.err_u:.6e} err_jump={rep.err_jump:.6e}")
    print(f"flux_residual={flux_residual(sol, relative=True):.3e}")
    return 0


def _load_config(args) -> StudyConfig:
    return StudyConfig.from_json(
        args.config,
        format=getattr(args, "format", None),
        out=getattr(args, "out", None),
        problem=args.problem,
        variants=args.variants,
        k=args.k,
        l=args.l,
        levels=args.levels,
        tau_coeff=args.tau_coeff,
    )


def _cmd_study(args) -> int:
    config = _load_config(args)
    text = emit_study(run_study(config), config.format)
    if config.out:
        Path(config.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_compare(args) -> int:
    config = _load_config(args)
    if len(config.variants) < 2:
        raise ValueError("compare needs at least two variants")
    text, flagged = compare_records(run_study(config))
    sys.stdout.write(text)
    return 2 if flagged else 0


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _str_list(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def _study_overrides(p):
    p.add_argument("--problem", default=None)
    p.add_argument("--variants", type=_str_list, default=None, help="comma separated, e.g. ls,proj")
    p.add_argument("--k", type=_int_list, default=None, help="comma separated degrees")
    p.add_argument("--l", type=_int_list, default=None, help="comma separated excesses")
    p.add_argument("--levels", type=_int_list, default=None, help="comma separated n values")
    p.add_argument("--tau-coeff", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdgproj", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve once and print error norms")
    p.add_argument("--method", required=True, choices=["std", "ls", "proj", "STD", "LS", "PROJ"])
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--l", type=int, default=0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--tau-coeff", type=float, default=1.0)
    p.add_argument("--problem", default="paper-sin")
    p.add_argument("--mesh", default=None, help="import a mesh file instead of a structured n x n mesh")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("study", help="run a convergence study from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--format", choices=["csv", "md"], default=None)
    p.add_argument("--out", default=None)
    _study_overrides(p)
    p.set_defaults(func=_cmd_study)

    p = sub.add_parser("compare", help="finest-pair orders side by side, flagging sub-optimal ones")
    p.add_argument("--config", required=True)
    _study_overrides(p)
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors must not collide with the "flagged" exit code
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except Exception as exc:  # reported as exit code 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
