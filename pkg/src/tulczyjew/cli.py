"""Command line entry point: ``tulczyjew {derive,identities,plateau,check,chart}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import nullcontext

import numpy as np

from .expr import ParseError, parse

log = logging.getLogger("tulczyjew")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _out(args, text=""):
    print(text, file=args.stdout)


# --------------------------------------------------------------------------
# derive


def _load_envelope(args) -> dict:
    doc = {}
    for key in ("lagrangian", "hamiltonian"):
        val = getattr(args, key)
        if val and val.endswith(".json"):
            with open(val) as fh:
                doc.update(json.load(fh))
            setattr(args, key, None)
    if args.input:
        with open(args.input) as fh:
            doc.update(json.load(fh))
    for key in ("dim", "metric", "lagrangian", "hamiltonian"):
        val = getattr(args, key)
        if val is not None:
            doc[key] = val
    if args.morse:
        doc["morse_family"] = {"expr": args.morse, "params": args.params or ["r"]}
    if "dim" not in doc:
        raise UsageError("derive needs --dim (or a JSON envelope with 'dim')")
    present = [k for k in ("lagrangian", "hamiltonian", "morse_family") if doc.get(k)]
    if len(present) != 1:
        raise UsageError("give exactly one of a Lagrangian, a Hamiltonian or a Morse family")
    return doc


def _derive(args) -> int:
    from .charts import base_chart
    from .dynamics import (
        Hamiltonian,
        Lagrangian,
        MorseFamily,
        euler_lagrange_residual,
        hamilton_phase,
        hamilton_surface_equations,
        lagrange_phase,
        legendre_map,
        metric_matrix,
        morse_family_phase,
    )
    from .expr import to_latex, to_text

    doc = _load_envelope(args)
    base = base_chart(int(doc["dim"]), doc.get("coordinates"))
    metric = doc.get("metric") or "euclidean"
    results = {}
    if doc.get("lagrangian"):
        spec = doc["lagrangian"]
        if spec == "nambu-goto":
            L = Lagrangian.nambu_goto(base, metric)
        elif spec == "quadratic":
            L = Lagrangian.quadratic(base, metric)
        else:
            L = Lagrangian(base, parse(spec), metric_matrix(base, metric) if doc.get("metric") else None)
        results["phase"] = lagrange_phase(L)
        results["legendre"] = legendre_map(L)
        if args.equations in ("all", "surface"):
            results["euler_lagrange"] = euler_lagrange_residual(L)
    elif doc.get("hamiltonian"):
        spec = doc["hamiltonian"]
        H = Hamiltonian.quadratic(base, metric) if spec == "quadratic" else Hamiltonian(base, parse(spec))
        results["phase"] = hamilton_phase(H)
        if args.equations in ("all", "surface"):
            results["hamilton"] = hamilton_surface_equations(H)
    else:
        spec = doc["morse_family"]
        if spec == "nambu-goto":
            F = MorseFamily.nambu_goto(base, metric)
        else:
            F = MorseFamily(base, parse(spec["expr"]), tuple(spec.get("params", ["r"])))
        results["phase"] = morse_family_phase(F)

    if args.emit == "json":
        payload = {}
        for k, v in results.items():
            payload[k] = {"map": {t: to_text(e) for t, e in v.items()}} if k == "legendre" else v.to_dict()
        _out(args, json.dumps(payload, indent=2, sort_keys=False))
        return EXIT_OK
    for k, v in results.items():
        _out(args, f"# {k}")
        if k == "legendre":
            for t, e in v.items():
                _out(args, f"{t} = {to_latex(e) if args.emit == 'latex' else to_text(e)}")
        else:
            lines = v.latex_lines() if args.emit == "latex" else v.text_lines()
            for line in lines:
                _out(args, line)
        _out(args)
    return EXIT_OK


# --------------------------------------------------------------------------
# identities


def _identities(args) -> int:
    from .charts import base_chart
    from .triple import (
        alpha_n,
        beta_n,
        bidegree_preserved,
        compose_relation,
        kappa_n,
        kernel_witness_kappa,
        level_sets_coincide,
        respects_fibrations,
        verify_theorem,
    )

    all_ok = True
    rows = []
    for n in args.n:
        for dim in args.dim:
            if n > dim:
                continue
            base = base_chart(dim)
            a, b = alpha_n(base, n), beta_n(base, n)
            rep = verify_theorem(base, n, alpha=a, beta=b)
            for name, ok, _ in rep.rows():
                rows.append((n, dim, name, ok))
            k = kappa_n(base, n)
            rows.append((n, dim, "kappa respects fibrations", respects_fibrations(k)))
            rows.append((n, dim, "kappa exchanges bi-degrees", bidegree_preserved(k)[0]))
            rows.append((n, dim, "level sets of alpha and beta coincide", level_sets_coincide(a, b, seed=args.seed)))
            try:
                compose_relation(b, a)
                rows.append((n, dim, "beta o alpha^-1 is a map", True))
            except ValueError:
                rows.append((n, dim, "beta o alpha^-1 is a map", False))
            if n == 2:
                rows.append((n, dim, "kappa kernel witness", kernel_witness_kappa(base, seed=args.seed)["passed"]))
    width = max((len(r[2]) for r in rows), default=10)
    for n, dim, name, ok in rows:
        all_ok &= bool(ok)
        if not args.quiet or not ok:
            _out(args, f"n={n} dim={dim}  {name:<{width}}  {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if all_ok else EXIT_FAIL


# --------------------------------------------------------------------------
# plateau


def _floats(text, count, what):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--{what} expects {count} comma separated numbers") from None
    if len(vals) != count:
        raise UsageError(f"--{what} expects {count} comma separated numbers")
    return vals


def _plateau(args) -> int:
    from .plateau import (
        SolverGrid,
        boundary_function,
        cross_check_with_symbolic,
        read_boundary_csv,
        residual,
        solve,
        write_csv,
        write_gnuplot,
    )

    domain = _floats(args.domain, 4, "domain")
    shape = tuple(int(v) for v in _floats(args.grid, 2, "grid"))
    if min(shape) < 3:
        raise UsageError("--grid needs at least 3 points per direction")
    if args.tol <= 0:
        raise UsageError("--tol must be positive")
    if args.boundary.endswith(".csv"):
        f = read_boundary_csv(args.boundary, domain, shape)
    elif args.boundary == "scherk":
        from .plateau import scherk as f
    else:
        f = boundary_function(args.boundary)
    grid = SolverGrid.from_boundary(domain, shape, f)
    rep = solve(grid, tol=args.tol, maxiter=args.maxiter)
    if args.out:
        write_csv(grid, args.out)
        if args.gnuplot:
            write_gnuplot(args.out, args.gnuplot)
    elif args.gnuplot:
        raise UsageError("--gnuplot needs --out")
    if not args.out:
        _out(args, "x,y,z")
        X, Y = grid.mesh()
        for i in range(grid.nx):
            for j in range(grid.ny):
                _out(args, f"{float(X[i, j])!r},{float(Y[i, j])!r},{float(grid.z[i, j])!r}")
    if not args.quiet:
        cc = cross_check_with_symbolic(grid)
        print(f"iterations={rep.iterations} residual={rep.residual_max:.3e} converged={rep.converged} "
              f"cross_check={'PASS' if cc.passed else 'FAIL'} wall_time={rep.wall_time:.3f}s",
              file=sys.stderr)
    if not rep.converged:
        print(f"plateau: {rep.message}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# --------------------------------------------------------------------------
# check


def _check(args) -> int:
    from .dynamics import el_vs_minimal_surface_consistency

    rep = el_vs_minimal_surface_consistency(samples=args.samples, seed=args.seed, tol=args.tol)
    if not args.quiet or not rep.passed:
        _out(args, str(rep))
    return EXIT_OK if rep.passed else EXIT_FAIL


def _chart(args) -> int:
    from .charts import build_chart

    functors = [f for f in args.functors.split(";") if f] if args.functors else []
    chart = build_chart(args.dim, functors)
    if args.json:
        _out(args, chart.to_json())
    else:
        for row in chart.table():
            _out(args, f"{row['name']:<14} {row['role']:<9} bideg={tuple(row['bidegree'])}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def globals_(parser, default):
        # subcommands repeat the global flags; SUPPRESS keeps them from
        # overwriting values given before the subcommand
        parser.add_argument("--seed", type=int, default=0 if default else argparse.SUPPRESS,
                            help="random seed for sampled checks")
        parser.add_argument("--threads", type=int, default=None if default else argparse.SUPPRESS,
                            help="cap on BLAS/OpenMP threads")
        parser.add_argument("--quiet", action="store_true", default=False if default else argparse.SUPPRESS,
                            help="print only failures and requested output")
        return parser

    common = globals_(argparse.ArgumentParser(add_help=False), False)
    p = globals_(argparse.ArgumentParser(prog="tulczyjew", description="Tulczyjew triple for strings: "
                                         "symbolic derivations and a minimal-surface solver."), True)
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("derive", parents=[common], help="phase dynamics and field equations")
    d.add_argument("--dim", type=int)
    d.add_argument("--metric", help="euclidean | minkowski | general")
    d.add_argument("--lagrangian", help="nambu-goto | quadratic | expression | envelope.json")
    d.add_argument("--hamiltonian", help="quadratic | expression | envelope.json")
    d.add_argument("--morse", help="Morse family expression")
    d.add_argument("--params", nargs="+", help="Morse family parameters (default r)")
    d.add_argument("--input", help="JSON envelope {dim, metric?, lagrangian?|hamiltonian?|morse_family?}")
    d.add_argument("--emit", choices=["text", "latex", "json"], default="text")
    d.add_argument("--equations", choices=["phase", "surface", "all"], default="all")
    d.set_defaults(func=_derive)

    i = sub.add_parser("identities", parents=[common], help="verify the triple identities")
    i.add_argument("--n", type=int, nargs="+", default=[2])
    i.add_argument("--dim", type=int, nargs="+", default=[3])
    i.set_defaults(func=_identities)

    pl = sub.add_parser("plateau", parents=[common], help="solve a Dirichlet minimal-graph problem")
    pl.add_argument("--domain", default="-0.4,0.4,-0.4,0.4")
    pl.add_argument("--grid", default="33,33")
    pl.add_argument("--boundary", required=True, help="expression in x,y | scherk | boundary.csv")
    pl.add_argument("--tol", type=float, default=1e-10)
    pl.add_argument("--maxiter", type=int, default=50)
    pl.add_argument("--out")
    pl.add_argument("--gnuplot")
    pl.set_defaults(func=_plateau)

    c = sub.add_parser("check", parents=[common], help="Euler-Lagrange vs minimal-surface consistency suite")
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--tol", type=float, default=1e-9)
    c.set_defaults(func=_check)

    ch = sub.add_parser("chart", parents=[common], help="print a chart, e.g. --functors 'WedgeTstar(2);WedgeT(2)'")
    ch.add_argument("--dim", type=int, required=True)
    ch.add_argument("--functors", default="")
    ch.add_argument("--json", action="store_true")
    ch.set_defaults(func=_chart)
    return p


def main(argv=None, stdout=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    args.stdout = stdout or sys.stdout
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    if args.threads is not None and args.threads < 1:
        print("tulczyjew: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    limiter = nullcontext()
    if args.threads:
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(limits=args.threads)
    np.random.seed(args.seed)
    try:
        with limiter:
            return args.func(args)
    except (UsageError, ParseError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"tulczyjew: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        return EXIT_OK
    except ValueError as exc:
        # bad expressions, charts or metrics supplied by the user
        print(f"tulczyjew: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
