"""Command-line front end.

Exit codes: 0 success, 1 domain/workspace error or failed check, 2 usage error.
Without ``--out`` results go to stdout.  Files are written atomically.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import diffeo as D
from . import jets as JT
from .contraction import solve_curve
from .errors import ConvexDiffError, WorkspaceError
from .evolution import evolve, flow_sensitivity, flow_trajectory
from .fields import LieAlgebraCurve
from .geometry import interior_grid
from .io import csv_text, json_text, write_atomic
from .workspace import default_workspace, load_workspace, validate

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
GROWTH_NOTE = "Lipschitz certificates are sampled (x1.05); flow elements use the Gronwall bound e^theta - 1"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _points(text):
    """``"0.5"`` or ``"0.2,0.3"``; several points separated by ``;``."""
    try:
        rows = [[float(v) for v in chunk.split(",")] for chunk in text.split(";") if chunk.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a point list: {text!r}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise argparse.ArgumentTypeError(f"not a point list: {text!r}")
    return np.array(rows)


def _vector(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workspace", help="workspace JSON file (default: built-in workspace)")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--seed", type=int, default=0, help="seed for all sampling")
    common.add_argument("--grid", type=int, default=None, help="Picard grid size N (chart grid density for check-chart)")
    common.add_argument("--tol", type=float, default=None, help="solver tolerance")
    common.add_argument("--json", action="store_true", help="print JSON diagnostics to stdout")

    p = _Parser(prog="convexdiff", description="Boundary-fixing diffeomorphisms of convex bodies.")
    sub = p.add_subparsers(dest="verb", metavar="VERB", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("check-chart", parents=[common], help="test the chart conditions of an element")
    s.add_argument("--element", required=True)
    s.add_argument("--x0", type=_points, help="point whose image must be interior")

    s = sub.add_parser("compose", parents=[common], help="evaluate psi o phi at points")
    s.add_argument("--psi", required=True)
    s.add_argument("--phi", required=True)
    s.add_argument("--x", type=_points, required=True, help="points, e.g. '0.2,0.3;0.5,0.5'")

    s = sub.add_parser("invert-at", parents=[common], help="solve phi(x) = y")
    s.add_argument("--element", required=True)
    s.add_argument("--y", type=_points, required=True)

    s = sub.add_parser("jet-of", parents=[common], help="Taylor jet of an element at a point")
    s.add_argument("--element", required=True)
    s.add_argument("--x0", type=_points, required=True)
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--h", type=float, default=0.005)

    s = sub.add_parser("jet-compose", parents=[common], help="truncated composition p o q")
    s.add_argument("--p", required=True, help="jet id or path to a jet JSON file")
    s.add_argument("--q", required=True)

    s = sub.add_parser("jet-invert", parents=[common], help="inverse of a unit jet")
    s.add_argument("--jet", required=True)

    s = sub.add_parser("evolve", parents=[common], help="snapshots of the evolution of a field")
    s.add_argument("--field", required=True)
    s.add_argument("--M", type=int, default=64, help="number of snapshot intervals")
    s.add_argument("--samples", type=int, default=24)

    s = sub.add_parser("flow", parents=[common], help="single trajectory y(t) from x0")
    s.add_argument("--field", required=True)
    s.add_argument("--x0", type=_points, required=True)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--t0", type=float, default=None)
    s.add_argument("--p", type=_vector, default=None)

    s = sub.add_parser("flow-grid", parents=[common], help="advect a point grid, one CSV per time slice")
    s.add_argument("--field", required=True)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--t0", type=float, default=None)
    s.add_argument("--p", type=_vector, default=None)
    s.add_argument("--density", type=int, default=11)
    s.add_argument("--slices", type=int, default=5)

    s = sub.add_parser("sensitivity", parents=[common], help="finite-difference derivatives of the flow map")
    s.add_argument("--field", required=True)
    s.add_argument("--x0", type=_points, required=True)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--t0", type=float, default=None)
    s.add_argument("--p", type=_vector, default=None)
    s.add_argument("--h", type=float, default=1e-4)

    s = sub.add_parser("verify", parents=[common], help="run invariant suites")
    s.add_argument("suite", choices=["geometry", "fields", "contraction", "diffeo", "jets", "evolution", "all"])
    return p


# ---------------------------------------------------------------------------
# helpers

def _emit(args, text, default_name=None):
    if args.out:
        path = args.out
        if os.path.isdir(path) and default_name:
            path = os.path.join(path, default_name)
        write_atomic(path, text)
    else:
        sys.stdout.write(text)


def _emit_json(args, doc, schema):
    doc = json_ready(doc)
    validate(doc, schema)
    text = json_text(doc)
    if args.out:
        write_atomic(args.out, text)
        if args.json:
            sys.stdout.write(text)
    else:
        sys.stdout.write(text)


def _check_dim(points, dim, what):
    if points.shape[1] != dim:
        raise ConvexDiffError(f"{what} has dimension {points.shape[1]}, expected {dim}")


def _load_jet(ws, ref):
    if os.path.isfile(ref):
        with open(ref, encoding="utf-8") as fh:
            doc = json.load(fh)
        validate(doc, "jet")
        return JT.jet_from_json(doc)
    return ws.jet(ref)


def _flow_args(ws, args):
    spec = ws.flow_spec(args.field, N=args.grid or 2048, tol=args.tol or 1e-13)
    t0 = spec.J[0] if args.t0 is None else args.t0
    p = args.p if args.p is not None else list(spec.field.params.values())
    return spec, p, t0


# ---------------------------------------------------------------------------
# verbs

def cmd_check_chart(ws, args):
    phi = ws.element(args.element)
    x0 = None if args.x0 is None else args.x0[0]
    rep = D.chart_membership(phi, density=args.grid or 21, x0=x0, seed=args.seed)
    doc = rep.to_json()
    doc["element"] = args.element
    doc["certificate_note"] = GROWTH_NOTE
    _emit_json(args, doc, "chart_report")
    return EXIT_OK if rep.passed else EXIT_DOMAIN


def cmd_compose(ws, args):
    psi, phi = ws.element(args.psi), ws.element(args.phi)
    _check_dim(args.x, phi.dim, "--x")
    c = D.compose(psi, phi)
    Y = D.apply(c, args.x)
    n = phi.dim
    header = [f"x{j + 1}" for j in range(n)] + [f"y{j + 1}" for j in range(n)]
    _emit(args, csv_text(header, np.column_stack([args.x, Y])), "compose.csv")
    return EXIT_OK


def cmd_invert_at(ws, args):
    phi = ws.element(args.element)
    _check_dim(args.y, phi.dim, "--y")
    X, it = D.invert_at(phi, args.y, tol=args.tol or 1e-12, return_iterations=True)
    n = phi.dim
    header = [f"y{j + 1}" for j in range(n)] + [f"x{j + 1}" for j in range(n)]
    _emit(args, csv_text(header, np.column_stack([args.y, X])), "invert.csv")
    if args.json:
        sys.stdout.write(json_text({"iterations": it, "lip": phi.lip}))
    return EXIT_OK


def cmd_jet_of(ws, args):
    phi = ws.element(args.element)
    _check_dim(args.x0, phi.dim, "--x0")
    tj = JT.taylor_extract(phi, args.x0[0], args.k, args.h)
    doc = tj.to_json()
    doc.update(element=args.element, x0=args.x0[0].tolist())
    _emit_json(args, doc, "taylor_jet")
    return EXIT_OK


def cmd_jet_compose(ws, args):
    r = JT.jet_compose(_load_jet(ws, args.p), _load_jet(ws, args.q))
    _emit_json(args, r.to_json(), "jet")
    return EXIT_OK


def cmd_jet_invert(ws, args):
    _emit_json(args, JT.jet_invert(_load_jet(ws, args.jet)).to_json(), "jet")
    return EXIT_OK


def cmd_evolve(ws, args):
    f = ws.field(args.field)
    curve = LieAlgebraCurve(f)
    res = evolve(curve, M=args.M, N=args.grid or 2048, tol=args.tol or 1e-13,
                 samples=args.samples, seed=args.seed)
    diag = res.diagnostics()
    diag["certificate_note"] = GROWTH_NOTE
    diag = json_ready(diag)
    validate(diag, "evolution")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_atomic(os.path.join(args.out, "snapshots.csv"), res.csv())
        write_atomic(os.path.join(args.out, "diagnostics.json"), json_text(diag))
        if args.json:
            sys.stdout.write(json_text(diag))
    else:
        sys.stdout.write(res.csv() if not args.json else json_text(diag))
    return EXIT_OK


def cmd_flow(ws, args):
    spec, p, t0 = _flow_args(ws, args)
    _check_dim(args.x0, spec.field.dim, "--x0")
    res = flow_trajectory(spec, p, t0, args.t, args.x0[:1])
    diag = res.diagnostics()
    diag.update(final=res.final[0].tolist(), t0=t0, t=args.t)
    diag = json_ready(diag)
    validate(diag, "flow_diagnostics")
    if args.out:
        write_atomic(args.out, res.csv())
        write_atomic(args.out + ".json", json_text(diag))
        if args.json:
            sys.stdout.write(json_text(diag))
    else:
        sys.stdout.write(json_text(diag) if args.json else res.csv())
    return EXIT_OK if res.confinement_ok else EXIT_DOMAIN


def cmd_flow_grid(ws, args):
    spec, p, t0 = _flow_args(ws, args)
    body = spec.field.body
    X = interior_grid(body, args.density)
    if args.slices < 1:
        raise ConvexDiffError("--slices must be positive")
    res = flow_trajectory(spec, p, t0, args.t, X)
    idx = np.linspace(0, len(res.grid) - 1, args.slices + 1).round().astype(int)
    n = body.dim
    header = ["t", "point"] + [f"x{j + 1}" for j in range(n)] + [f"y{j + 1}" for j in range(n)]
    outdir = args.out or "."
    os.makedirs(outdir, exist_ok=True)
    names = []
    for s, i in enumerate(idx):
        name = f"slice_{s:03d}.csv"
        rows = np.column_stack([np.full(len(X), res.grid[i]), np.arange(len(X)), X, res.states[i]])
        write_atomic(os.path.join(outdir, name), csv_text(header, rows))
        names.append(name)
    doc = {"slices": names, "points": int(len(X)), "times": res.grid[idx].tolist(),
           "confinement_ok": bool(res.confinement_ok)}
    validate(doc, "flow_grid")
    write_atomic(os.path.join(outdir, "flow_grid.json"), json_text(doc))
    if args.json:
        sys.stdout.write(json_text(doc))
    return EXIT_OK


def cmd_sensitivity(ws, args):
    spec, p, t0 = _flow_args(ws, args)
    _check_dim(args.x0, spec.field.dim, "--x0")
    s = flow_sensitivity(spec, p, t0, args.t, args.x0[0], h=args.h)
    doc = s.to_json()
    doc["d_p"] = np.asarray(s.d_p).reshape(spec.field.dim, -1)
    _emit_json(args, doc, "sensitivity")
    return EXIT_OK


def json_ready(doc):
    """Round-trip through the serializer so numpy values validate as plain JSON."""
    return json.loads(json_text(doc))


def cmd_verify(ws, args):
    from . import verify

    def progress(rec, seconds):
        mark = "PASS" if rec["passed"] else "FAIL"
        print(f"{mark} {rec['name']} ({seconds:.1f}s)", file=sys.stderr)

    report = verify.run_suite(args.suite, progress=progress)
    _emit_json(args, report, "verify_report")
    return EXIT_OK if report["passed"] else EXIT_DOMAIN


COMMANDS = {
    "check-chart": cmd_check_chart, "compose": cmd_compose, "invert-at": cmd_invert_at,
    "jet-of": cmd_jet_of, "jet-compose": cmd_jet_compose, "jet-invert": cmd_jet_invert,
    "evolve": cmd_evolve, "flow": cmd_flow, "flow-grid": cmd_flow_grid,
    "sensitivity": cmd_sensitivity, "verify": cmd_verify,
}


def run(argv):
    args = build_parser().parse_args(argv)
    try:
        ws = load_workspace(args.workspace) if args.workspace else default_workspace()
        return COMMANDS[args.verb](ws, args)
    except WorkspaceError as exc:
        print(f"workspace error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ConvexDiffError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main(argv=None):
    try:
        code = run(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_USAGE
    return code


if __name__ == "__main__":
    sys.exit(main())
