"""Command line interface: mesh inspection, projection, fitting, biharmonic
solves and convergence studies.

Exit codes: 0 success, 1 input/usage errors, 2 failed --assert-rates check.
`--mesh` accepts a file path or a packaged desk mesh name (desk1..desk3).
Study reports write the CSV contract plus a convergence figure next to it
(suppress with --no-plot).
"""

import argparse
import logging
import os
import sys

from . import analysis, assembly
from .functions import get_function
from .interpolation import project
from .mesh import MeshError, desk_mesh_path, load_mesh, save_mesh
from .space import (SpaceError, build_basis, dimension_breakdown, save_spline)

logger = logging.getLogger(__name__)


class CliError(Exception):
    pass


def _resolve_mesh_path(value):
    if os.path.exists(value):
        return value
    name = value[:-5] if value.endswith(".json") else value
    if name in ("desk1", "desk2", "desk3"):
        return desk_mesh_path(name)
    raise CliError("mesh file not found: %s" % value)


def _load(value):
    return load_mesh(_resolve_mesh_path(value))


def _threads(args):
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("C1MIXED_THREADS", "1"))


def _check_degree(p):
    if p < 5:
        raise CliError("degree must be >= 5 (got %d)" % p)


def _norm_list(arg, default):
    if not arg:
        return default
    names = [n.strip() for n in arg.split(",") if n.strip()]
    for n in names:
        if n not in ("linf", "l2", "h1", "h2"):
            raise CliError("unknown norm %r (use linf,l2,h1,h2)" % n)
    return tuple(names)


def cmd_dim(args):
    _check_degree(args.p)
    mesh = _load(args.mesh)
    parts = dimension_breakdown(mesh, args.p)
    c = mesh.counts()
    print("mesh: %d vertices, %d edges, %d triangles, %d quads"
          % (c["vertices"], c["edges"], c["triangles"], c["quads"]))
    print("vertex dofs (6 per vertex):        %6d" % parts["vertex"])
    print("edge dofs ((2p-9) per edge):       %6d" % parts["edge"])
    print("quad interior dofs ((p-3)^2 each): %6d" % parts["quad_interior"])
    print("triangle interior dofs (C(p-4,2)): %6d" % parts["triangle_interior"])
    print("total dimension:                   %6d" % parts["total"])
    return 0


def cmd_validate(args):
    mesh = _load(args.mesh)
    c = mesh.counts()
    print("valid mixed mesh: %d vertices, %d edges, %d triangles, %d quads"
          % (c["vertices"], c["edges"], c["triangles"], c["quads"]))
    print("shape regularity rho = %.6f rad, longest edge h = %.6f"
          % (mesh.shape_regularity(), mesh.longest_edge()))
    return 0


def cmd_refine(args):
    mesh = _load(args.mesh).refine(args.levels)
    c = mesh.counts()
    print("refined %d time(s): %d vertices, %d edges, %d triangles, %d quads"
          % (args.levels, c["vertices"], c["edges"], c["triangles"], c["quads"]))
    if args.out:
        save_mesh(mesh, args.out)
        print("wrote %s" % args.out)
    return 0


def _single_run(args, experiment):
    _check_degree(args.p)
    mesh = _load(args.mesh).refine(args.levels)
    f = get_function(args.fn)
    if experiment == "interpolate":
        spline = project(f, mesh, args.p)
        norms = _norm_list(args.norms, ("linf",))
    else:
        basis = build_basis(mesh, args.p, threads=_threads(args))
        if experiment == "l2fit":
            spline = assembly.l2_fit(f, basis)
            norms = _norm_list(args.norms, ("linf", "l2"))
        else:
            spline = assembly.solve_biharmonic(f, basis)
            norms = _norm_list(args.norms, ("l2", "h1", "h2"))
    relative = experiment == "biharmonic"
    print("%s: p=%d fn=%s ndof=%d h=%.6f"
          % (experiment, args.p, args.fn,
             dimension_breakdown(mesh, args.p)["total"], mesh.longest_edge()))
    for norm in norms:
        if norm == "linf":
            err = analysis.error_linf(spline, f, mesh)
        else:
            order = {"l2": 0, "h1": 1, "h2": 2}[norm]
            err = analysis.error_sobolev(spline, f, mesh, order,
                                         relative=relative)
        tag = "relative " if relative and norm != "linf" else ""
        print("  %serr_%s = %.10e" % (tag, norm, err))
    if args.out:
        save_spline(spline, args.out)
        print("wrote %s" % args.out)
    return 0


def cmd_study(args):
    _check_degree(args.p)
    cfg = analysis.StudyConfig(
        experiment=args.exp,
        mesh=_resolve_mesh_path(args.mesh),
        p=args.p,
        levels=args.levels,
        fn=args.fn,
        norms=_norm_list(args.norms, ()),
        out=args.out,
        threads=_threads(args),
    )
    report = analysis.convergence_study(cfg)
    print(report.summary())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_csv())
        print("wrote %s" % args.out)
        if not args.no_plot:
            fig_path = os.path.splitext(args.out)[0] + ".png"
            analysis.render_figure(report, fig_path)
            print("wrote %s" % fig_path)
    if args.assert_rates:
        failures = analysis.check_rates(report)
        if failures:
            for msg in failures:
                print("rate assertion failed: %s" % msg, file=sys.stderr)
            return 2
        print("rate assertions passed")
    return 0


def cmd_export(args):
    _check_degree(args.p)
    if not args.out:
        raise CliError("export needs --out")
    mesh = _load(args.mesh).refine(args.levels)
    spline = project(get_function(args.fn), mesh, args.p)
    save_spline(spline, args.out)
    print("wrote %s (degree %d, %d elements, mesh hash %s)"
          % (args.out, args.p, len(mesh.elements),
             mesh.canonical_hash()[:12]))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="c1mixed",
        description="Super-smooth C1 splines over mixed triangle/quad meshes")
    parser.add_argument("--verbose", action="store_true",
                        help="log per-level progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, levels_default=0, with_fn=True, with_out=False):
        sp.add_argument("--mesh", required=True,
                        help="mesh JSON path or desk1..desk3")
        sp.add_argument("--p", type=int, default=5, help="degree (>= 5)")
        sp.add_argument("--levels", type=int, default=levels_default,
                        help="refinement levels")
        if with_fn:
            sp.add_argument("--fn", default="paper", help="test function id")
        if with_out:
            sp.add_argument("--out", help="output path")
        sp.add_argument("--norms", help="comma list of linf,l2,h1,h2")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default $C1MIXED_THREADS or 1)")

    sp = sub.add_parser("dim", help="dimension breakdown of the space")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--p", type=int, default=5)
    sp.set_defaults(func=cmd_dim)

    sp = sub.add_parser("validate", help="validate a mesh file")
    sp.add_argument("--mesh", required=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("refine", help="refine a mesh and write it out")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--levels", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_refine)

    for name in ("interpolate", "l2fit", "biharmonic"):
        sp = sub.add_parser(name, help="single %s run" % name)
        common(sp, with_out=True)
        sp.set_defaults(func=lambda a, n=name: _single_run(a, n))

    sp = sub.add_parser("study", help="convergence study (CSV + figure)")
    sp.add_argument("--exp", required=True,
                    choices=("interpolation", "l2fit", "biharmonic"))
    common(sp, levels_default=4, with_out=True)
    sp.add_argument("--assert-rates", action="store_true",
                    help="exit 2 unless final rates are optimal")
    sp.add_argument("--no-plot", action="store_true",
                    help="skip the convergence figure")
    sp.set_defaults(func=cmd_study)

    sp = sub.add_parser("export", help="write interpolant coefficients")
    common(sp, with_out=True)
    sp.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, MeshError, SpaceError, assembly.AssemblyError,
            KeyError, ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
