"""Command-line front end.

Exit codes: 0 ok, 2 parse/input error, 3 a quantity required to vanish
does not, 4 a requested size is beyond the configured limits.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from fractions import Fraction

from . import io
from .algebra_core import ParseError, Poly
from .deformation import (
    associativity_defect,
    closedness_defect,
    obstruction_cocycle_check,
    star_apply,
)
from .moyal import FlatSymplectic, moyal_bracket, ordered_product

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INVALID = 3
EXIT_RESOURCE = 4

PRODUCTS = {"moyal": "weyl", "weyl": "weyl", "standard": "standard", "normal": "normal"}


@dataclass(frozen=True)
class Limits:
    max_order: int = 12
    max_dof: int = 4
    max_dmax: int = 16
    max_samples: int = 100_000_000
    max_nmax: int = 40
    max_torder: int = 24
    max_graph_n: int = 3


LIMITS = Limits()


class ResourceBound(Exception):
    pass


class Invalid(Exception):
    """A check ran and found a nonzero defect."""


def _bound(name: str, value: int, limit: int, low: int = 0):
    if value < low:
        raise ValueError(f"--{name} must be at least {low}")
    if value > limit:
        raise ResourceBound(f"--{name}={value} exceeds the limit {limit}")


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as e:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from e


class _Out:
    def __init__(self, fmt: str, stream):
        self.fmt = fmt
        self.stream = stream

    def emit(self, text: str, doc: dict | None = None):
        if self.fmt == "json" and doc is not None:
            self.stream.write(io.dumps(doc))
        else:
            self.stream.write(text.rstrip("\n") + "\n")


def _product(args):
    _bound("order", args.order, LIMITS.max_order)
    _bound("dof", args.dof, LIMITS.max_dof, 1)
    fs = FlatSymplectic(args.dof)
    return fs, ordered_product(PRODUCTS[args.product], fs, args.order)


def _load_star(path):
    return io.star_product_from_doc(io.read_file(path))


# -- subcommands ---------------------------------------------------------------


def cmd_mul(args, out):
    fs, S = _product(args)
    u, v = fs.parse(args.u), fs.parse(args.v)
    res = star_apply(S, u, v)
    out.emit(str(res), io.series_doc(res))


def cmd_assoc(args, out):
    if args.star:
        S = _load_star(args.star)
    else:
        _, S = _product(args)
    rows = []
    bad = []
    for r in range(S.order + 1):
        D = associativity_defect(S, r, args.jet)
        ok = D.is_zero()
        rows.append({"order": r, "zero": ok, "terms": len(D.terms)})
        if not ok:
            bad.append(r)
    text = "\n".join(f"r={row['order']}: " + ("0" if row["zero"] else f"nonzero ({row['terms']} terms)") for row in rows)
    out.emit(text, io.document("assoc_scan", label=S.label, rows=rows))
    if bad:
        raise Invalid(f"associativity defect nonzero at orders {bad}")


def cmd_bracket(args, out):
    _bound("order", args.order, LIMITS.max_order, 1)
    _bound("dof", args.dof, LIMITS.max_dof, 1)
    fs = FlatSymplectic(args.dof)
    res = moyal_bracket(fs, fs.parse(args.u), fs.parse(args.v), args.order)
    out.emit(str(res), io.series_doc(res))


def cmd_starexp(args, out):
    from .star_exp import QuadHamiltonian, exp_matches_closed_form, star_exponential

    _bound("torder", args.torder, LIMITS.max_torder)
    _bound("dof", args.dof, LIMITS.max_dof, 1)
    Hq = QuadHamiltonian(args.alpha, args.beta, args.gamma, args.dof)
    ts = star_exponential(Hq.fs, Hq.poly(), args.torder)
    match = exp_matches_closed_form(Hq, args.torder)
    verdict = "match" if match.ok else f"mismatch at t^{match.first_mismatch}"
    doc = io.document(
        "star_exponential",
        alpha=str(Hq.alpha), beta=str(Hq.beta), gamma=str(Hq.gamma), dof=Hq.dof, d=str(Hq.d),
        t_order=ts.t_order, coeffs=[io.series_doc(c) for c in ts.coeffs],
        closed_form_match=match.ok, first_mismatch=match.first_mismatch,
    )
    out.emit(f"{ts}\nclosed form: {verdict}", doc)
    if not match.ok:
        raise Invalid(verdict)


def cmd_spectrum(args, out):
    from .star_exp import harmonic_spectrum

    _bound("nmax", args.nmax, LIMITS.max_nmax)
    _bound("dof", args.dof, LIMITS.max_dof, 1)
    spec = harmonic_spectrum(args.dof, args.nmax)
    out.emit(str(spec), io.spectrum_doc(spec))
    if not all(lv.certified for lv in spec.levels):
        raise Invalid("an eigenvalue failed its star-eigen certificate")


def cmd_kgraphs(args, out):
    from . import kontsevich as K

    if args.action == "enumerate":
        _bound("n", args.n, LIMITS.max_graph_n, 1)
        if args.count_only:
            c = K.count_star_graphs(args.n) if args.m == 2 else len(K.enumerate_graphs(args.n, args.m))
            out.emit(str(c), io.document("graph_count", n=args.n, m=args.m, count=c))
            return
        gs = K.enumerate_graphs(args.n, args.m)
        out.emit("\n".join(str(g) for g in gs), io.document("graph_list", n=args.n, m=args.m, graphs=[g.to_json() for g in gs]))
    elif args.action == "weight":
        if args.seed is None:
            raise ValueError("--seed is required for weight estimation")
        g = io.graph_from_doc(io.read_file(args.graph))
        cfg = K.MCConfig.from_env(args.seed, args.samples, workers=args.workers)
        _bound("samples", cfg.samples, LIMITS.max_samples, 2)
        est = K.weight_estimate(g, cfg.samples, cfg.seed, cfg.chunk, cfg.workers)
        out.emit(f"{g}: {est.mean:.6f} +/- {est.std_error:.6f} (samples={est.samples}, seed={est.seed})", io.weight_doc(g, est))
    else:  # star2
        if args.poisson:
            alpha = io.poisson_from_doc(io.read_file(args.poisson), check_jacobi=False)
        else:
            alpha = _so3()
        from .polydiff import jacobi_check

        res = jacobi_check(alpha.bivector)
        if not res.ok:
            raise Invalid(f"Jacobi identity fails: {res.defect}")
        S = K.kontsevich_star_order2(alpha)
        _emit_star(S, args, out)


def _so3():
    from .polydiff import PoissonStructure

    names = ("x1", "x2", "x3")
    x = [Poly.var(names, i) for i in range(3)]
    z = Poly(names)
    return PoissonStructure(names, [[z, x[2], -x[1]], [-x[2], z, x[0]], [x[1], -x[0], z]])


def _emit_star(S, args, out):
    doc = io.star_product_doc(S)
    if args.emit:
        with open(args.emit, "w") as fh:
            fh.write(io.dumps(doc))
        out.emit(f"wrote {S.label} star-product through order {S.order} to {args.emit}", io.document("written", path=args.emit))
    else:
        text = "\n".join(f"C{r} = {c}" for r, c in enumerate(S.cochains))
        out.emit(text, doc)


def cmd_fedosov(args, out):
    from .fedosov import FedosovError, InsufficientDegree, SymplecticData, fedosov_product, solve_r

    if args.dmax < 3:
        raise ResourceBound(f"D_max={args.dmax} is too small; need at least 3")
    _bound("dmax", args.dmax, LIMITS.max_dmax)
    names, omega = io.matrix_from_doc(io.read_file(args.omega), "omega")
    gamma = io.christoffel_from_doc(io.read_file(args.connection), names) if args.connection else None
    try:
        sd = SymplecticData(names, omega, gamma)
        fc = solve_r(sd, args.dmax)
        S = fedosov_product(fc, args.order)
    except InsufficientDegree as e:
        raise ResourceBound(str(e)) from e
    except FedosovError as e:
        raise Invalid(str(e)) from e
    _emit_star(S, args, out)


def cmd_check(args, out):
    if args.what == "jacobi":
        from .polydiff import jacobi_check

        alpha = io.poisson_from_doc(io.read_file(args.poisson), check_jacobi=False) if args.poisson else _so3()
        res = jacobi_check(alpha.bivector)
        out.emit("jacobi: ok" if res.ok else f"jacobi: defect {res.defect}", io.document("check", what="jacobi", ok=res.ok))
        if not res.ok:
            raise Invalid("Jacobi identity fails")
        return
    S = _load_star(args.star) if args.star else _product(args)[1]
    rows = []
    if args.what == "cocycle":
        for t in range(1, S.order + 1):
            res = obstruction_cocycle_check(S.truncated(t), t, args.jet)
            rows.append({"t": t, "ok": res.is_cocycle})
        text = "\n".join(f"t={r['t']}: " + ("3-cocycle" if r["ok"] else "NOT a cocycle") for r in rows)
    else:
        for r in range(S.order + 1):
            rows.append({"order": r, "ok": closedness_defect(S, r).is_zero()})
        text = "\n".join(f"r={r['order']}: " + ("closed" if r["ok"] else "not closed") for r in rows)
    ok = all(r["ok"] for r in rows)
    out.emit(text, io.document("check", what=args.what, ok=ok, rows=rows))
    if not ok:
        raise Invalid(f"{args.what} check failed")


# -- parser --------------------------------------------------------------------


def _add_product_flags(p, order=3):
    p.add_argument("--product", choices=sorted(PRODUCTS), default="moyal")
    p.add_argument("--dof", type=int, default=1)
    p.add_argument("--order", type=int, default=order)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dquant", description="Exact deformation-quantization toolkit")
    ap.add_argument("--format", choices=("text", "json"), default="text")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("mul", help="star product of two polynomials")
    _add_product_flags(p)
    p.add_argument("u")
    p.add_argument("v")
    p.set_defaults(func=cmd_mul)

    p = sub.add_parser("assoc", help="associativity defect scan")
    _add_product_flags(p)
    p.add_argument("--star", help="star-product JSON instead of a built-in product")
    p.add_argument("--jet", type=int, default=None)
    p.set_defaults(func=cmd_assoc)

    p = sub.add_parser("bracket", help="Moyal bracket of two polynomials")
    p.add_argument("--dof", type=int, default=1)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("u")
    p.add_argument("v")
    p.set_defaults(func=cmd_bracket)

    p = sub.add_parser("starexp", help="star exponential of a quadratic Hamiltonian")
    p.add_argument("--alpha", type=_fraction, required=True)
    p.add_argument("--beta", type=_fraction, default=Fraction(0))
    p.add_argument("--gamma", type=_fraction, required=True)
    p.add_argument("--dof", type=int, default=1)
    p.add_argument("--torder", type=int, default=6)
    p.set_defaults(func=cmd_starexp)

    p = sub.add_parser("spectrum", help="harmonic-oscillator spectrum")
    p.add_argument("--dof", type=int, default=1)
    p.add_argument("--nmax", type=int, default=3)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("kgraphs", help="Kontsevich graphs")
    p.add_argument("action", choices=("enumerate", "weight", "star2"))
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--graph")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--poisson", help="Poisson matrix JSON (default so(3)*)")
    p.add_argument("--emit")
    p.set_defaults(func=cmd_kgraphs)

    p = sub.add_parser("fedosov", help="Fedosov star-product on a polynomial chart")
    p.add_argument("action", choices=("build",))
    p.add_argument("--omega", required=True)
    p.add_argument("--connection")
    p.add_argument("--dmax", type=int, default=8)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--emit")
    p.set_defaults(func=cmd_fedosov)

    p = sub.add_parser("check", help="structural checks")
    p.add_argument("what", choices=("jacobi", "cocycle", "closed"))
    _add_product_flags(p)
    p.add_argument("--star")
    p.add_argument("--poisson")
    p.add_argument("--jet", type=int, default=None)
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_PARSE if e.code else EXIT_OK
    out = _Out(args.format, stdout)
    try:
        args.func(args, out)
    except ParseError as e:
        stderr.write(f"parse error: {e}\n")
        return EXIT_PARSE
    except ResourceBound as e:
        stderr.write(f"resource bound: {e}\n")
        return EXIT_RESOURCE
    except Invalid as e:
        stderr.write(f"validation failed: {e}\n")
        return EXIT_INVALID
    except (io.DocumentError, OSError, KeyError, ValueError) as e:
        stderr.write(f"input error: {e}\n")
        return EXIT_PARSE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
