"""The Moyal family on R^{2l}.

Variables are ordered (q_1..q_l, p_1..p_l) and the Poisson tensor has
Lambda^{q_k p_k} = +1, so that P(q, p) = 1 and q * p = qp + L.

Every product here has the form exp(L B)(u, v) for a constant matrix
B = Lambda + S with S symmetric; S = 0 is the Weyl (Moyal) case.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Sequence

from .algebra_core import LambdaSeries, Poly, Scalar, pack
from .deformation import EquivalenceTransform, LieDeformation, StarProduct, apply_equivalence
from .polydiff import PoissonStructure, PolyDiffOp, apply_op, hochschild_coboundary, insert, split_key

KINDS = ("weyl", "standard", "normal")


@dataclass(frozen=True)
class FlatSymplectic:
    dof: int

    def __post_init__(self):
        if self.dof < 1:
            raise ValueError("need at least one degree of freedom")

    @property
    def dim(self) -> int:
        return 2 * self.dof

    @property
    def names(self) -> tuple:
        if self.dof == 1:
            return ("q", "p")
        return tuple(f"q{k + 1}" for k in range(self.dof)) + tuple(f"p{k + 1}" for k in range(self.dof))

    def q(self, k: int = 0) -> Poly:
        return Poly.var(self.names, k)

    def p(self, k: int = 0) -> Poly:
        return Poly.var(self.names, self.dof + k)

    def partner(self, i: int) -> int:
        return i + self.dof if i < self.dof else i - self.dof

    def sign(self, i: int) -> int:
        """Lambda^{i, partner(i)}."""
        return 1 if i < self.dof else -1

    def lam(self) -> list[list[Fraction]]:
        d = self.dim
        m = [[Fraction(0)] * d for _ in range(d)]
        for i in range(d):
            m[i][self.partner(i)] = Fraction(self.sign(i))
        return m

    def poisson(self) -> PoissonStructure:
        return PoissonStructure.constant(self.names, self.lam())

    def parse(self, text: str) -> Poly:
        from .algebra_core import parse_expression

        return parse_expression(text, self.names)


def _bounded_indices(bounds: Sequence[int], total: int):
    """Multi-indices a with a_i <= bounds[i] and |a| = total."""
    n = len(bounds)
    if n == 0:
        if total == 0:
            yield ()
        return
    suffix = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + bounds[i]

    def rec(i, left, cur):
        if i == n:
            if left == 0:
                yield tuple(cur)
            return
        lo = max(0, left - suffix[i + 1])
        for e in range(lo, min(bounds[i], left) + 1):
            cur.append(e)
            yield from rec(i + 1, left - e, cur)
            cur.pop()

    yield from rec(0, total, [])


def p_power(fs: FlatSymplectic, r: int, u: Poly, v: Poly) -> Poly:
    """P^r(u, v): the r-fold contraction of Lambda against derivatives of u and v."""
    if u.names != fs.names or v.names != fs.names:
        raise ValueError("arguments must live on the phase space of fs")
    if r == 0:
        return u * v
    d = fs.dim
    bounds = [min(u.degree_in(i), v.degree_in(fs.partner(i))) for i in range(d)]
    if min(bounds, default=0) < 0:
        return Poly(fs.names)
    rf = factorial(r)
    out = Poly(fs.names)
    for a in _bounded_indices(bounds, r):
        ja = [0] * d
        sign = 1
        for i, e in enumerate(a):
            if e:
                ja[fs.partner(i)] = e
                if i >= fs.dof and e % 2:
                    sign = -sign
        den = 1
        for e in a:
            den *= factorial(e)
        du = u.partial(a)
        if du.is_zero():
            continue
        dv = v.partial(ja)
        if dv.is_zero():
            continue
        out = out + (du * dv).scale(Fraction(sign * rf, den))
    return out


def moyal_star(fs: FlatSymplectic, u: Poly, v: Poly, order: int) -> LambdaSeries:
    """exp(L P)(u, v) through L^order."""
    coeffs = [p_power(fs, r, u, v).scale(Fraction(1, factorial(r))) for r in range(order + 1)]
    return LambdaSeries(fs.names, order, coeffs)


def moyal_bracket(fs: FlatSymplectic, u: Poly, v: Poly, order: int) -> LambdaSeries:
    """L^{-1} sinh(L P)(u, v) using P^r for odd r <= order; known through L^{order-1}."""
    if order < 1:
        raise ValueError("bracket needs order >= 1")
    coeffs = [Poly(fs.names) for _ in range(order)]
    for r in range(1, order + 1, 2):
        coeffs[r - 1] = p_power(fs, r, u, v).scale(Fraction(1, factorial(r)))
    return LambdaSeries(fs.names, order - 1, coeffs)


# ---------------------------------------------------------------------------
# constant-coefficient exponential products


def _pairs(B):
    return [(i, j, B[i][j]) for i in range(len(B)) for j in range(len(B)) if B[i][j] != 0]


@lru_cache(maxsize=None)
def _multisets(npairs: int, r: int) -> tuple:
    return tuple(itertools.combinations_with_replacement(range(npairs), r))


def exp_cochain(names: Sequence[str], B, r: int) -> PolyDiffOp:
    """(B^r / r!) as a bidifferential operator, B^{ij} d_i (x) d_j constant."""
    names = tuple(names)
    d = len(names)
    pairs = _pairs(B)
    acc: dict = {}
    for ms in _multisets(len(pairs), r):
        counts: dict = {}
        for t in ms:
            counts[t] = counts.get(t, 0) + 1
        c = Scalar(1)
        left = [0] * d
        right = [0] * d
        for t, n in counts.items():
            i, j, bij = pairs[t]
            c = c * Scalar.coerce(bij) ** n * Fraction(1, factorial(n))
            left[i] += n
            right[j] += n
        sig = (pack(left), pack(right))
        t = Poly.const(names, c)
        acc[sig] = acc[sig] + t if sig in acc else t
    return PolyDiffOp(names, 2, acc)


def ordering_matrix(kind: str, fs: FlatSymplectic):
    """B = Lambda + S for the chosen ordering, entries Fraction or Scalar."""
    if kind not in KINDS:
        raise ValueError(f"unknown ordering {kind!r}")
    lam = fs.lam()
    d = fs.dim
    if kind == "weyl":
        return lam
    B = [[Scalar(x) for x in row] for row in lam]
    l = fs.dof
    for k in range(l):
        q, p = k, k + l
        if kind == "standard":
            # all derivatives in p on the left, q on the right
            B[q][p] = Scalar(0)
            B[p][q] = Scalar(-2)
        else:
            # -4i d_a (x) d_abar with a = q + i p
            B[q][q] = Scalar(0, -1)
            B[p][p] = Scalar(0, -1)
    return B


def symmetric_part(kind: str, fs: FlatSymplectic):
    B = ordering_matrix(kind, fs)
    lam = fs.lam()
    d = fs.dim
    return [[Scalar.coerce(B[i][j]) - Scalar.coerce(lam[i][j]) for j in range(d)] for i in range(d)]


@lru_cache(maxsize=None)
def _cached_cochains(kind: str, dof: int, order: int) -> tuple:
    fs = FlatSymplectic(dof)
    B = ordering_matrix(kind, fs)
    return tuple(exp_cochain(fs.names, B, r) for r in range(order + 1))


def moyal_product(fs: FlatSymplectic, order: int) -> StarProduct:
    return StarProduct(fs.names, order, list(_cached_cochains("weyl", fs.dof, order)), True, fs.poisson(), "moyal")


def ordered_product(kind: str, fs: FlatSymplectic, order: int) -> StarProduct:
    if kind == "weyl":
        return moyal_product(fs, order)
    return StarProduct(fs.names, order, list(_cached_cochains(kind, fs.dof, order)), True, fs.poisson(), kind)


def moyal_bracket_deformation(fs: FlatSymplectic, order: int) -> LieDeformation:
    """Sinh-convention bracket cochains B_1..B_{order-1}."""
    B = []
    for k in range(1, order):
        r = k + 1
        if r % 2:
            B.append(exp_cochain(fs.names, fs.lam(), r))
        else:
            B.append(PolyDiffOp.zero(fs.names, 2))
    return LieDeformation(fs.names, order - 1, B, fs.poisson())


def ordered_star(kind: str, fs: FlatSymplectic, u: Poly, v: Poly, order: int) -> LambdaSeries:
    if kind == "weyl":
        return moyal_star(fs, u, v, order)
    S = ordered_product(kind, fs, order)
    return LambdaSeries(fs.names, order, [apply_op(c, [u, v]) for c in S.cochains])


def _second_order_exp(names, Q, order: int) -> list[PolyDiffOp]:
    """T_r for T = exp(L * sum_ij Q^{ij} d_i d_j), r = 1..order."""
    names = tuple(names)
    d = len(names)
    gen = {}
    for i in range(d):
        for j in range(d):
            c = Scalar.coerce(Q[i][j])
            if c:
                e = [0] * d
                e[i] += 1
                e[j] += 1
                k = pack(e)
                gen[k] = gen.get(k, Scalar(0)) + c
    G = PolyDiffOp(names, 1, {(k,): Poly.const(names, c) for k, c in gen.items()})
    out = []
    power = PolyDiffOp.identity(names)
    for r in range(1, order + 1):
        power = insert(power, 0, G)
        out.append(power.scale(Fraction(1, factorial(r))))
    return out


def ordering_transform_closed_form(kind: str, fs: FlatSymplectic, order: int) -> EquivalenceTransform:
    """exp(-(L/2) S^{ij} d_i d_j) with S the symmetric part of the ordering matrix."""
    if kind == "weyl":
        raise ValueError("the Weyl ordering is the reference product")
    S = symmetric_part(kind, fs)
    Q = [[x * Fraction(-1, 2) for x in row] for row in S]
    return EquivalenceTransform(fs.names, order, _second_order_exp(fs.names, Q, order))


def ordering_equivalence(kind: str, fs: FlatSymplectic, order: int) -> EquivalenceTransform:
    """T with T(u *_kind v) = T(u) *_M T(v), solved order by order.

    At order r the unknown T_r enters as bT_r; with a constant-coefficient
    ansatz t_m d^m, bT_r has coefficient -binom(m, b) t_m on d^b (x) d^{m-b}.
    """
    if kind == "weyl":
        raise ValueError("the Weyl ordering is the reference product")
    names = fs.names
    target = ordered_product(kind, fs, order)
    moyal = moyal_product(fs, order)
    maps: list[PolyDiffOp] = []
    d = fs.dim
    for r in range(1, order + 1):
        trial = EquivalenceTransform(names, r, maps + [PolyDiffOp.zero(names, 1)])
        K = apply_equivalence(trial, moyal.truncated(r)).cochains[r]
        R = target.cochains[r] - K
        t: dict = {}
        for (b, c), coeff in R.terms.items():
            if b == 0 or c == 0 or not coeff.is_constant():
                raise ValueError(f"ordering {kind} does not intertwine at order {r}")
            m = b + c
            binom = 1
            for mult, parts in split_key(m, 2, d):
                if parts == (b, c):
                    binom = mult
                    break
            val = coeff.constant_term() * Fraction(-1, binom)
            if m in t and t[m] != val:
                raise ValueError(f"ordering {kind} does not intertwine at order {r}")
            t[m] = val
        Tr = PolyDiffOp(names, 1, {(m,): Poly.const(names, v) for m, v in t.items()})
        if hochschild_coboundary(Tr) != R:
            raise ValueError(f"ordering {kind} does not intertwine at order {r}")
        maps.append(Tr)
    return EquivalenceTransform(names, order, maps)
