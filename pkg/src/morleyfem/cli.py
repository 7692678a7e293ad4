"""
Command-line front end.

Subcommands: mesh, check, interp, solve, convergence.  Exit status is 0 on
success, 1 on a numerical failure (failed identity check, solver error) and
2 on usage or I/O errors.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateSimplex,
    InsufficientLevels,
    InvalidSpec,
    MorleyError,
    NonConformalMesh,
    QuadratureInsufficient,
)
from .geometry import Mesh, generate_mesh, load_mesh, mesh_metrics, save_mesh
from .manufactured import get_solution
from .quadrature import TRIANGLE_DEGREES, default_degree
from .solver import METHODS, solve_biharmonic
from .verification import (
    boundary_layer_family,
    broken_error,
    convergence_study,
    identity_suite,
    interpolation_study,
    mesh_family,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
INTERP_KINDS = {"morley": "Morley", "cr": "CR", "p0": "P0"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    mesh_spec: Optional[dict] = None
    mesh_path: Optional[str] = None
    method: Optional[str] = None
    nu: float = 1.0
    psi: str = "sin2"
    delta: float = 1e-2
    degree: Optional[int] = None
    seed: int = 0
    out: Optional[str] = None
    deterministic: bool = False
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        spec = None
        for key in ("uniform", "tensor_graded", "boundary_layer", "perturbed"):
            if getattr(args, key, None) is not None:
                spec = {"kind": key, "value": getattr(args, key)}
        return cls(
            subcommand=args.command,
            mesh_spec=spec,
            mesh_path=getattr(args, "mesh", None),
            method=getattr(args, "method", None),
            nu=getattr(args, "nu", 1.0),
            psi=getattr(args, "psi", None) or "sin2",
            delta=getattr(args, "delta", None) or 1e-2,
            degree=args.quad_degree,
            seed=getattr(args, "seed", 0),
            out=getattr(args, "out", None) or getattr(args, "out_dir", None),
            deterministic=args.deterministic,
        )

    def validate(self) -> None:
        if not self.nu > 0:
            raise UsageError("--nu must be positive")
        if self.degree is not None and self.degree not in TRIANGLE_DEGREES:
            raise UsageError(f"quadrature degree must be one of {TRIANGLE_DEGREES}")
        if not self.delta > 0:
            raise UsageError("--delta must be positive")
        if self.out:
            parent = os.path.dirname(os.path.abspath(self.out))
            if not os.path.isdir(parent):
                raise UsageError(f"output directory {parent} does not exist")


# --------------------------------------------------------------------------
# output


def to_json(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def _g6(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".6g")
    return str(v)


def print_table(rows: list, cols: Optional[list] = None, out=sys.stdout) -> None:
    if not rows:
        return
    cols = cols or list(rows[0].keys())
    cells = [[_g6(r.get(c, "")) for c in cols] for r in rows]
    width = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    print("  ".join(c.rjust(w) for c, w in zip(cols, width)), file=out)
    for row in cells:
        print("  ".join(v.rjust(w) for v, w in zip(row, width)), file=out)


def _emit(args, payload: dict, human) -> None:
    if args.json:
        print(to_json(payload))
    else:
        human()


# --------------------------------------------------------------------------
# parsing


def _add_common(p):
    p.add_argument("--json", action="store_true", help="print a machine-readable JSON mirror of the output")
    p.add_argument("--threads", type=int, default=1, help="accepted for compatibility; work is single-threaded")
    p.add_argument("--deterministic", action="store_true", help="single-threaded, order-fixed accumulation")
    p.add_argument("--quad-degree", type=int, choices=TRIANGLE_DEGREES, default=None,
                   help="triangle quadrature degree (default: MORLEY_QUAD_DEGREE or 10)")


def _add_mesh_spec(p, required=False):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--mesh", help="mesh JSON file")
    g.add_argument("--uniform", type=int, metavar="N")
    g.add_argument("--tensor-graded", type=float, nargs=3, metavar=("NX", "NY", "GRADING"))
    g.add_argument("--boundary-layer", type=int, metavar="N")
    g.add_argument("--perturbed", type=int, metavar="N")
    p.add_argument("--delta", type=float, default=None, help="layer width (boundary-layer meshes and solution)")
    p.add_argument("--layer-fraction", type=float, default=0.5)
    p.add_argument("--amplitude", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morleyfem", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate a mesh and print its metrics")
    _add_mesh_spec(p, required=True)
    p.add_argument("--out", help="write the mesh JSON here")
    _add_common(p)

    p = sub.add_parser("check", help="run the exact-identity suite")
    _add_mesh_spec(p, required=True)
    p.add_argument("--debug-flip-sign", action="store_true", help="corrupt one edge sign (negative control)")
    _add_common(p)

    p = sub.add_parser("interp", help="interpolation error and bounds on one mesh")
    _add_mesh_spec(p, required=True)
    p.add_argument("--kind", choices=sorted(INTERP_KINDS), default="morley")
    p.add_argument("--psi", choices=("sin2", "poly", "layer"), default="sin2")
    _add_common(p)

    p = sub.add_parser("solve", help="solve the plate problem for a manufactured solution")
    _add_mesh_spec(p, required=True)
    p.add_argument("--method", choices=METHODS, default="modified")
    p.add_argument("--psi", choices=("sin2", "poly", "layer"), default="sin2")
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--out-dir", help="write mesh.json, field.json and report.json here")
    _add_common(p)

    p = sub.add_parser("convergence", help="convergence or interpolation study over a mesh family")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--method", choices=METHODS)
    g.add_argument("--interp", choices=sorted(INTERP_KINDS))
    p.add_argument("--psi", choices=("sin2", "poly", "layer"), default=None)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--start", type=int, default=None, help="coarsest n (default 8 uniform, 4 boundary-layer)")
    p.add_argument("--mesh-family", choices=("uniform", "boundary-layer", "perturbed"), default="uniform")
    p.add_argument("--delta", type=float, default=1e-2)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--compare-typical", action="store_true", help="also record the typical-vs-modified gap")
    p.add_argument("--out", help="CSV output path")
    _add_common(p)
    return parser


def _mesh_from_args(args) -> Mesh:
    if args.mesh:
        try:
            return load_mesh(args.mesh)
        except (DegenerateSimplex, NonConformalMesh) as exc:
            raise InvalidSpec(f"{args.mesh}: {exc}") from exc
    if args.uniform is not None:
        return generate_mesh("uniform", n=args.uniform)
    if args.tensor_graded is not None:
        nx, ny, gr = args.tensor_graded
        if nx != int(nx) or ny != int(ny):
            raise InvalidSpec("NX and NY must be integers")
        return generate_mesh("tensor_graded", nx=int(nx), ny=int(ny), grading=gr)
    if args.boundary_layer is not None:
        delta = 1e-2 if args.delta is None else args.delta
        return generate_mesh("boundary_layer", n=args.boundary_layer, delta=delta, layer_fraction=args.layer_fraction)
    if args.perturbed is not None:
        return generate_mesh("perturbed", n=args.perturbed, amplitude=args.amplitude, seed=args.seed)
    raise UsageError("no mesh given")


def _degree(args) -> int:
    return args.quad_degree if args.quad_degree is not None else default_degree()


# --------------------------------------------------------------------------
# subcommands


def cmd_mesh(args) -> int:
    mesh = _mesh_from_args(args)
    met = mesh_metrics(mesh)
    if args.out:
        save_mesh(mesh, args.out)
    payload = {"n_points": mesh.n_points, "n_cells": mesh.n_cells, "n_faces": mesh.n_faces, **met}
    if args.out:
        payload["out"] = args.out

    def human():
        print(f"points {mesh.n_points}  cells {mesh.n_cells}  faces {mesh.n_faces}")
        print(f"gamma0 (max H_T/h_T)  {_g6(met['gamma0'])}")
        print(f"max angle [rad]       {_g6(met['max_angle'])}")
        print(f"h (max h_T)           {_g6(met['h'])}")
        print(f"aspect h1/h2          {_g6(met['min_aspect'])} .. {_g6(met['max_aspect'])}")
        if args.out:
            print(f"wrote {args.out}")

    _emit(args, payload, human)
    return EXIT_OK


def cmd_check(args) -> int:
    mesh = _mesh_from_args(args)
    rep = identity_suite(mesh, seed=args.seed, flip_sign=args.debug_flip_sign)

    def human():
        print_table([{"identity": k, "residual": v, "status": "ok" if v < rep.tol else "FAIL"}
                     for k, v in rep.residuals.items()])
        print("PASS" if rep.passed else f"FAIL ({', '.join(rep.failures())})")

    _emit(args, rep.to_dict(), human)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_interp(args) -> int:
    mesh = _mesh_from_args(args)
    psi = get_solution(args.psi, delta=1e-2 if args.delta is None else args.delta)
    rec = interpolation_study(psi, [mesh], INTERP_KINDS[args.kind], degree=_degree(args))
    row = rec.rows[0]
    _emit(args, row, lambda: print_table([row]))
    return EXIT_OK


def cmd_solve(args) -> int:
    mesh = _mesh_from_args(args)
    psi = get_solution(args.psi, delta=1e-2 if args.delta is None else args.delta)
    deg = _degree(args)
    rep = solve_biharmonic(mesh, args.method, g=lambda p: psi.g(p, args.nu), f=lambda p: psi.f(p, args.nu),
                           nu=args.nu, degree=deg)
    report = rep.to_dict()
    report["err_H2"] = broken_error(psi, rep.solution, 2, degree=deg)
    report["err_L2"] = broken_error(psi, rep.solution, 0, degree=deg)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        save_mesh(mesh, os.path.join(args.out_dir, "mesh.json"))
        rep.solution.save(os.path.join(args.out_dir, "field.json"))
        with open(os.path.join(args.out_dir, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(to_json(report) + "\n")
    _emit(args, report, lambda: print_table([{k: v for k, v in report.items() if k != "timings"}]))
    return EXIT_OK


def cmd_convergence(args) -> int:
    if args.levels < 2:
        raise UsageError("--levels must be at least 2 to compute rates")
    family = args.mesh_family
    psi_name = args.psi or ("layer" if family == "boundary-layer" else "sin2")
    psi = get_solution(psi_name, delta=args.delta)
    deg = _degree(args)
    if family == "boundary-layer":
        meshes = mesh_family(family, args.levels, delta=args.delta)
        if args.start is not None:
            meshes = boundary_layer_family(args.levels, args.delta, start=args.start)
    else:
        meshes = mesh_family(family, args.levels, start=args.start or 8, seed=args.seed)
    if args.interp:
        rec = interpolation_study(psi, meshes, INTERP_KINDS[args.interp], degree=deg)
    else:
        rec = convergence_study(args.method or "modified", psi, meshes, nu=args.nu, degree=deg,
                                compare_typical=args.compare_typical)
    rec.to_csv(args.out)
    rates = rec.eoc
    payload = {"label": rec.label, "rows": rec.table(), "final_eoc": {k: v[-1] for k, v in rates.items()}}
    if args.out:
        payload["out"] = args.out

    def human():
        print_table(rec.table())
        print("final EOC: " + "  ".join(f"{k} {_g6(v[-1])}" for k, v in rates.items()))
        if args.out:
            print(f"wrote {args.out}")

    _emit(args, payload, human)
    return EXIT_OK


COMMANDS = {
    "mesh": cmd_mesh,
    "check": cmd_check,
    "interp": cmd_interp,
    "solve": cmd_solve,
    "convergence": cmd_convergence,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        RunConfig.from_args(args).validate()
        return COMMANDS[args.command](args)
    except (UsageError, InvalidSpec, InsufficientLevels, QuadratureInsufficient, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MorleyError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
