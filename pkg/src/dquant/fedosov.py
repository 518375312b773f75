"""Fedosov quantization on a single polynomial chart of R^{2m}.

Sections of the Weyl bundle tensor forms are finite sums

    a = sum  L^k  c(x)  y^alpha  dx^beta

with deg(L) = 2 and deg(y) = 1.  Coefficients may also be linear
differential operators in one or two function slots; lifting the operator
"f -> f" instead of a fixed f produces the star-product cochains directly.

Conventions.  The fiber product is exp(L Lam^{ij} d_{y^i} (x) d_{y^j}) with
Lam = -omega^{-1}, so it restricts to the Moyal product of this package at
each point.  Commutators are divided by 2L where the classical formulas
divide by i*hbar.  With

    D = -delta + nabla - [r, .]/2L,   nabla = d - [G, .]/2L,

the Weyl curvature R + nabla(gamma) - gamma o gamma / 2L equals -omega.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import factorial
from typing import Mapping, Sequence

from .algebra_core import LambdaSeries, Poly, Scalar, pack, unpack, falling
from .deformation import StarProduct
from .polydiff import PoissonStructure, PolyDiffOp, apply_op


class FedosovError(ValueError):
    pass


class InsufficientDegree(FedosovError):
    def __init__(self, needed: int, got: int):
        super().__init__(f"D_max={got} is too small; need at least {needed}")
        self.needed = needed
        self.got = got


# ---------------------------------------------------------------------------
# small exterior-algebra helpers on bitmasks


def _popcount(m: int) -> int:
    return bin(m).count("1")


def _wedge(m1: int, m2: int):
    """dx^{m1} ^ dx^{m2} = sign * dx^{m1|m2}; None when they overlap."""
    if m1 & m2:
        return None
    sign = 1
    # count pairs (i in m1, j in m2) with i > j
    b = m2
    while b:
        low = b & -b
        j = low.bit_length() - 1
        if _popcount(m1 >> (j + 1)) % 2:
            sign = -sign
        b ^= low
    return sign, m1 | m2


def _insert_left(j: int, m: int):
    """dx^j ^ dx^m."""
    if m >> j & 1:
        return None
    sign = -1 if _popcount(m & ((1 << j) - 1)) % 2 else 1
    return sign, m | (1 << j)


def _contract(j: int, m: int):
    """Interior product i(d_j) dx^m."""
    if not m >> j & 1:
        return None
    sign = -1 if _popcount(m & ((1 << j) - 1)) % 2 else 1
    return sign, m & ~(1 << j)


def _mask_indices(m: int) -> list[int]:
    return [j for j in range(m.bit_length()) if m >> j & 1]


def _add(acc: dict, key, val: Poly):
    if key in acc:
        s = acc[key] + val
        if s.is_zero():
            del acc[key]
        else:
            acc[key] = s
    elif not val.is_zero():
        acc[key] = val


# ---------------------------------------------------------------------------
# symplectic data


def _det(M: list[list[Poly]], names) -> Poly:
    n = len(M)
    if n == 0:
        return Poly.const(names, 1)
    out = Poly(names)
    for j in range(n):
        if M[0][j].is_zero():
            continue
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = M[0][j] * _det(minor, names)
        out = out + term if j % 2 == 0 else out - term
    return out


def poly_inverse(M: list[list[Poly]], names) -> list[list[Poly]]:
    """Adjugate inverse; requires a nonzero constant determinant."""
    n = len(M)
    det = _det(M, names)
    if det.is_zero() or not det.is_constant():
        raise FedosovError("omega must have a polynomial inverse (constant nonzero determinant)")
    inv_det = det.constant_term().inverse()
    out = [[Poly(names) for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:i] + row[i + 1:] for k, row in enumerate(M) if k != j]
            c = _det(minor, names)
            out[i][j] = c.scale(inv_det if (i + j) % 2 == 0 else -inv_det)
    return out


@dataclass
class SymplecticData:
    """omega_{ij}(x) and Christoffel symbols gamma[k][i][j] = Gamma^k_{ij}(x)."""

    names: tuple
    omega: list
    gamma: list | None = None
    check: bool = True

    def __post_init__(self):
        self.names = tuple(self.names)
        n = len(self.names)
        if n % 2:
            raise FedosovError("the chart must have even dimension")
        self.omega = [[self._poly(c) for c in row] for row in self.omega]
        if len(self.omega) != n or any(len(row) != n for row in self.omega):
            raise FedosovError("omega must be a square matrix over the chart")
        if self.gamma is None:
            self.gamma = [[[Poly(self.names) for _ in range(n)] for _ in range(n)] for _ in range(n)]
        else:
            self.gamma = [[[self._poly(c) for c in row] for row in mat] for mat in self.gamma]
        self.lam = [[-c for c in row] for row in poly_inverse(self.omega, self.names)]
        if self.check:
            self.validate()

    def _poly(self, c) -> Poly:
        if isinstance(c, Poly):
            return c
        if isinstance(c, str):
            from .algebra_core import parse_expression

            return parse_expression(c, self.names)
        return Poly.const(self.names, c)

    @classmethod
    def flat(cls, dof: int, gamma=None) -> "SymplecticData":
        """Standard omega = sum dq_k ^ dp_k with variables (q..., p...)."""
        from .moyal import FlatSymplectic

        fs = FlatSymplectic(dof)
        n = fs.dim
        om = [[Fraction(0)] * n for _ in range(n)]
        for k in range(dof):
            om[k][k + dof] = Fraction(1)
            om[k + dof][k] = Fraction(-1)
        return cls(fs.names, om, gamma)

    @property
    def dim(self) -> int:
        return len(self.names)

    def is_flat_connection(self) -> bool:
        return all(c.is_zero() for mat in self.gamma for row in mat for c in row)

    def validate(self):
        n = self.dim
        om, G = self.omega, self.gamma
        for i in range(n):
            for j in range(n):
                if om[i][j] != -om[j][i]:
                    raise FedosovError("omega is not antisymmetric")
        for i, j, k in itertools.combinations(range(n), 3):
            if not (om[j][k].diff(i) + om[k][i].diff(j) + om[i][j].diff(k)).is_zero():
                raise FedosovError(f"omega is not closed (indices {i},{j},{k})")
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    if G[k][i][j] != G[k][j][i]:
                        raise FedosovError("connection has torsion")
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    v = om[j][k].diff(i)
                    for l in range(n):
                        v = v - G[l][i][j] * om[l][k] - G[l][i][k] * om[j][l]
                    if not v.is_zero():
                        raise FedosovError("connection does not preserve omega")

    def poisson(self) -> PoissonStructure:
        return PoissonStructure(self.names, self.lam, check_jacobi=False)

    @cached_property
    def _pairs(self):
        n = self.dim
        return [(i, j, self.lam[i][j]) for i in range(n) for j in range(n) if not self.lam[i][j].is_zero()]

    def moyal_terms(self, r: int) -> dict:
        """(left y-exponents, right y-exponents) -> coefficient of L^r in exp(L Lam d(x)d)."""
        cache = self.__dict__.setdefault("_mt_cache", {})
        if r in cache:
            return cache[r]
        n = self.dim
        pairs = self._pairs
        acc: dict = {}
        for ms in itertools.combinations_with_replacement(range(len(pairs)), r):
            counts: dict = {}
            for t in ms:
                counts[t] = counts.get(t, 0) + 1
            c = Poly.const(self.names, 1)
            left = [0] * n
            right = [0] * n
            for t, m in counts.items():
                i, j, lij = pairs[t]
                c = c * lij ** m
                if m > 1:
                    c = c.scale(Fraction(1, factorial(m)))
                left[i] += m
                right[j] += m
            _add(acc, (tuple(left), tuple(right)), c)
        cache[r] = acc
        return acc


# ---------------------------------------------------------------------------
# Weyl-bundle sections


class WeylSection:
    """Finite sum of L^k c y^alpha dx^beta, truncated at total degree dmax.

    Terms are keyed by (k, alpha, mask, sig); ``sig`` is a tuple of packed
    derivative multi-indices, one per function slot (``arity`` of them), so a
    coefficient c with sig s stands for c * d^{s_1} f_1 * ... .
    """

    __slots__ = ("sd", "dmax", "arity", "terms")

    def __init__(self, sd: SymplecticData, dmax: int, arity: int = 0, terms: Mapping | None = None):
        self.sd = sd
        self.dmax = dmax
        self.arity = arity
        self.terms = {}
        for key, c in (terms or {}).items():
            if 2 * key[0] + sum(key[1]) <= dmax:
                _add(self.terms, key, c)

    @property
    def names(self):
        return self.sd.names

    @property
    def dim(self):
        return self.sd.dim

    # construction
    @classmethod
    def scalar(cls, sd, dmax, c: Poly) -> "WeylSection":
        n = sd.dim
        return cls(sd, dmax, 0, {(0, (0,) * n, 0, ()): c})

    @classmethod
    def y(cls, sd, dmax, i: int, c=1) -> "WeylSection":
        n = sd.dim
        e = [0] * n
        e[i] = 1
        return cls(sd, dmax, 0, {(0, tuple(e), 0, ()): Poly.const(sd.names, c)})

    @classmethod
    def dx(cls, sd, dmax, i: int) -> "WeylSection":
        n = sd.dim
        return cls(sd, dmax, 0, {(0, (0,) * n, 1 << i, ()): Poly.const(sd.names, 1)})

    @classmethod
    def identity_op(cls, sd, dmax) -> "WeylSection":
        """The operator f -> f, a section with one function slot."""
        n = sd.dim
        return cls(sd, dmax, 1, {(0, (0,) * n, 0, (0,)): Poly.const(sd.names, 1)})

    def _new(self, terms, dmax=None, arity=None) -> "WeylSection":
        return WeylSection(self.sd, self.dmax if dmax is None else dmax, self.arity if arity is None else arity, terms)

    def with_dmax(self, dmax: int) -> "WeylSection":
        return self._new(self.terms, dmax)

    # arithmetic
    def _check(self, other):
        if other.sd is not self.sd and other.names != self.names:
            raise FedosovError("sections over different charts")
        if other.arity != self.arity:
            raise FedosovError("sections with different slot counts")

    def __add__(self, other):
        self._check(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            _add(out, k, c)
        return self._new(out, min(self.dmax, other.dmax))

    def __neg__(self):
        return self._new({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "WeylSection":
        return self._new({k: v.scale(c) for k, v in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, WeylSection):
            return NotImplemented
        return self.arity == other.arity and self.terms == other.terms

    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def degree_part(self, d: int) -> "WeylSection":
        return self._new({k: c for k, c in self.terms.items() if 2 * k[0] + sum(k[1]) == d})

    def upto(self, d: int) -> "WeylSection":
        return self._new({k: c for k, c in self.terms.items() if 2 * k[0] + sum(k[1]) <= d}, d)

    def min_degree(self):
        if not self.terms:
            return None
        return min(2 * k[0] + sum(k[1]) for k in self.terms)

    def form_degrees(self) -> set:
        return {_popcount(k[2]) for k in self.terms}

    def shift_lambda(self, s: int, strict: bool = True) -> "WeylSection":
        """Multiply by L^s; with s < 0 any term that would get a negative power raises."""
        out = {}
        for (k, a, m, sig), c in self.terms.items():
            if k + s < 0:
                if strict:
                    raise FedosovError("division by L left a non-cancelling term")
                continue
            out[(k + s, a, m, sig)] = c
        return self._new(out, self.dmax + 2 * s)

    def over_2lambda(self) -> "WeylSection":
        return self.shift_lambda(-1).scale(Fraction(1, 2))

    def evaluate(self, *fs: Poly) -> "WeylSection":
        """Substitute functions into the slots."""
        if len(fs) != self.arity:
            raise FedosovError(f"expected {self.arity} functions")
        out: dict = {}
        for (k, a, m, sig), c in self.terms.items():
            v = c
            for key, f in zip(sig, fs):
                v = v * f.diff_key(key)
                if v.is_zero():
                    break
            _add(out, (k, a, m, ()), v)
        return WeylSection(self.sd, self.dmax, 0, out)

    def sigma(self) -> dict:
        """Center projection of the 0-form part: L-power -> coefficient by sig."""
        out: dict = {}
        n = self.dim
        zero = (0,) * n
        for (k, a, m, sig), c in self.terms.items():
            if a == zero and m == 0:
                out.setdefault(k, {})[sig] = c
        return out

    def a00(self) -> "WeylSection":
        zero = (0,) * self.dim
        return self._new({k: c for k, c in self.terms.items() if k[1] == zero and k[2] == 0})

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for (k, a, m, sig), c in sorted(self.terms.items(), key=lambda t: (2 * t[0][0] + sum(t[0][1]), t[0])):
            bits = [f"({c})"]
            if k:
                bits.append(f"L^{k}" if k > 1 else "L")
            for i, e in enumerate(a):
                if e:
                    bits.append(f"y{i + 1}^{e}" if e > 1 else f"y{i + 1}")
            if m:
                bits.append("^".join(f"dx{j + 1}" for j in _mask_indices(m)))
            if sig:
                bits.append("D" + ",".join(str(unpack(s, self.dim)) for s in sig))
            parts.append("*".join(bits))
        return " + ".join(parts)

    __repr__ = __str__


# ---------------------------------------------------------------------------
# products and the Fedosov differentials


def fiber_compose(a: WeylSection, b: WeylSection, dmax: int | None = None, center_only: bool = False) -> WeylSection:
    """Fiberwise Moyal product in y, wedge product in dx.

    Slots concatenate: the result acts on (slots of a, slots of b).  With
    ``center_only`` only the y-free part is produced, which is all a star
    product needs and is much cheaper.
    """
    if a.names != b.names:
        raise FedosovError("sections over different charts")
    sd = a.sd
    if dmax is None:
        dmax = min(a.dmax, b.dmax)
    out: dict = {}
    by_deg_b: dict = {}
    for kb, cb in b.terms.items():
        by_deg_b.setdefault(sum(kb[1]), []).append((kb, cb))
    for (k1, al, m1, s1), c1 in a.terms.items():
        da = 2 * k1 + sum(al)
        na = sum(al)
        for nb, blist in by_deg_b.items():
            if center_only and nb != na:
                continue
            for (k2, be, m2, s2), c2 in blist:
                if da + 2 * k2 + nb > dmax:
                    continue
                w = _wedge(m1, m2)
                if w is None:
                    continue
                sign, m = w
                base = c1 * c2
                if sign < 0:
                    base = -base
                if center_only:
                    terms = sd.moyal_terms(na)
                    lc = terms.get((al, be))
                    if lc is None:
                        continue
                    mult = 1
                    for e in al:
                        mult *= factorial(e)
                    for e in be:
                        mult *= factorial(e)
                    _add(out, (k1 + k2 + na, (0,) * len(al), m, s1 + s2), (base * lc).scale(mult))
                    continue
                for r in range(min(na, nb) + 1):
                    for (L, R), lc in sd.moyal_terms(r).items():
                        if any(x > y for x, y in zip(L, al)) or any(x > y for x, y in zip(R, be)):
                            continue
                        mult = 1
                        for e, l in zip(al, L):
                            mult *= falling(e, l)
                        for e, l in zip(be, R):
                            mult *= falling(e, l)
                        ynew = tuple(x - l + y - rr for x, l, y, rr in zip(al, L, be, R))
                        _add(out, (k1 + k2 + r, ynew, m, s1 + s2), (base * lc).scale(mult))
    return WeylSection(sd, dmax, a.arity + b.arity, out)


def graded_commutator(a: WeylSection, b: WeylSection, dmax: int | None = None) -> WeylSection:
    """[a, b] = a o b - (-1)^{pq} b o a, termwise in form degree."""
    if a.arity and b.arity:
        raise FedosovError("commutator of two operator-valued sections is slot-ambiguous")
    ab = fiber_compose(a, b, dmax)
    out = dict(ab.terms)
    a_by = _split_form_degree(a)
    b_by = _split_form_degree(b)
    for p, ap in a_by.items():
        for q, bq in b_by.items():
            ba = fiber_compose(bq, ap, dmax)
            sgn = -1 if (p * q) % 2 == 0 else 1
            for k, c in ba.terms.items():
                _add(out, k, c if sgn > 0 else -c)
    return WeylSection(a.sd, ab.dmax, a.arity + b.arity, out)


def _split_form_degree(a: WeylSection) -> dict:
    groups: dict = {}
    for k, c in a.terms.items():
        groups.setdefault(_popcount(k[2]), {})[k] = c
    return {p: a._new(t) for p, t in groups.items()}


def ad_over_2lambda(x: WeylSection, a: WeylSection) -> WeylSection:
    """[x, a] / 2L, computed two degrees higher so the result is exact through a.dmax."""
    d = min(x.dmax, a.dmax)
    c = graded_commutator(x.with_dmax(d + 2), a.with_dmax(d + 2), d + 2)
    return c.over_2lambda()


def delta(a: WeylSection) -> WeylSection:
    """sum_j dx^j ^ d_{y^j} a."""
    out: dict = {}
    for (k, al, m, sig), c in a.terms.items():
        for j, e in enumerate(al):
            if not e:
                continue
            w = _insert_left(j, m)
            if w is None:
                continue
            sign, m2 = w
            al2 = al[:j] + (e - 1,) + al[j + 1:]
            _add(out, (k, al2, m2, sig), c.scale(sign * e))
    return a._new(out)


def delta_star(a: WeylSection) -> WeylSection:
    """sum_j y^j i(d_{x^j}) a."""
    out: dict = {}
    for (k, al, m, sig), c in a.terms.items():
        for j in _mask_indices(m):
            sign, m2 = _contract(j, m)
            al2 = al[:j] + (al[j] + 1,) + al[j + 1:]
            _add(out, (k, al2, m2, sig), c if sign > 0 else -c)
    return a._new(out)


def delta_inv(a: WeylSection) -> WeylSection:
    """delta^* / (p+q) on (p,q)-homogeneous pieces, zero when p+q = 0."""
    out: dict = {}
    for (k, al, m, sig), c in a.terms.items():
        pq = sum(al) + _popcount(m)
        if pq == 0:
            continue
        for j in _mask_indices(m):
            sign, m2 = _contract(j, m)
            al2 = al[:j] + (al[j] + 1,) + al[j + 1:]
            _add(out, (k, al2, m2, sig), c.scale(Fraction(sign, pq)))
    return a._new(out)


def delta_ops(kind: str, a: WeylSection) -> WeylSection:
    ops = {"delta": delta, "delta_star": delta_star, "delta_inv": delta_inv}
    if kind not in ops:
        raise ValueError(f"unknown operation {kind!r}")
    return ops[kind](a)


def hodge_decompose(a: WeylSection):
    """(delta delta^{-1} a, delta^{-1} delta a, a_00); the three parts sum to a."""
    return delta(delta_inv(a)), delta_inv(delta(a)), a.a00()


def _dx_coeff(c: Poly, sig: tuple, i: int, dim: int):
    """d/dx^i of c * prod d^{sig_j} f_j, as (sig, coefficient) pairs."""
    out = []
    dc = c.diff(i)
    if not dc.is_zero():
        out.append((sig, dc))
    step = pack([1 if t == i else 0 for t in range(dim)])
    for j in range(len(sig)):
        out.append((sig[:j] + (sig[j] + step,) + sig[j + 1:], c))
    return out


def exterior_d(a: WeylSection) -> WeylSection:
    """sum_i dx^i ^ d/dx^i, acting through operator slots by the Leibniz rule."""
    out: dict = {}
    n = a.dim
    for (k, al, m, sig), c in a.terms.items():
        for i in range(n):
            w = _insert_left(i, m)
            if w is None:
                continue
            sign, m2 = w
            for sig2, c2 in _dx_coeff(c, sig, i, n):
                _add(out, (k, al, m2, sig2), c2 if sign > 0 else -c2)
    return a._new(out)


def nabla_hat(a: WeylSection) -> WeylSection:
    """dx^i ^ (d_i a - Gamma^k_{ij} y^j d_{y^k} a)."""
    sd = a.sd
    n = a.dim
    G = sd.gamma
    out = dict(exterior_d(a).terms)
    if sd.is_flat_connection():
        return a._new(out)
    for (k, al, m, sig), c in a.terms.items():
        for kk in range(n):
            e = al[kk]
            if not e:
                continue
            base = al[:kk] + (e - 1,) + al[kk + 1:]
            for i in range(n):
                w = _insert_left(i, m)
                if w is None:
                    continue
                sign, m2 = w
                for j in range(n):
                    g = G[kk][i][j]
                    if g.is_zero():
                        continue
                    al2 = base[:j] + (base[j] + 1,) + base[j + 1:]
                    _add(out, (k, al2, m2, sig), (g * c).scale(-sign * e))
    return a._new(out)


def connection_form(sd: SymplecticData, dmax: int) -> WeylSection:
    """G with nabla = d - [G, .]/2L: G = -dx^i (1/2) omega_{kl} Gamma^k_{in} y^l y^n."""
    n = sd.dim
    out: dict = {}
    for i in range(n):
        for l in range(n):
            for nn in range(n):
                c = Poly(sd.names)
                for k in range(n):
                    c = c + sd.omega[k][l] * sd.gamma[k][i][nn]
                if c.is_zero():
                    continue
                y = [0] * n
                y[l] += 1
                y[nn] += 1
                _add(out, (0, tuple(y), 1 << i, ()), c.scale(Fraction(-1, 2)))
    return WeylSection(sd, dmax, 0, out)


def theta_form(sd: SymplecticData, dmax: int) -> WeylSection:
    """theta = -omega_{kj} y^j dx^k, so that -[theta, .]/2L = -delta."""
    n = sd.dim
    out: dict = {}
    for k in range(n):
        for j in range(n):
            c = sd.omega[k][j]
            if c.is_zero():
                continue
            y = [0] * n
            y[j] = 1
            _add(out, (0, tuple(y), 1 << k, ()), -c)
    return WeylSection(sd, dmax, 0, out)


def omega_form(sd: SymplecticData, dmax: int, c=1) -> WeylSection:
    """c * omega as a central 2-form, omega = sum_{i<j} omega_{ij} dx^i ^ dx^j."""
    n = sd.dim
    out: dict = {}
    for i in range(n):
        for j in range(i + 1, n):
            if not sd.omega[i][j].is_zero():
                _add(out, (0, (0,) * n, (1 << i) | (1 << j), ()), sd.omega[i][j].scale(c))
    return WeylSection(sd, dmax, 0, out)


def curvature(sd: SymplecticData, dmax: int) -> WeylSection:
    """R = dG - G o G / 2L, the curvature of nabla in the form nabla^2 = -[R, .]/2L."""
    G = connection_form(sd, dmax + 2)
    GG = fiber_compose(G, G, dmax + 2).over_2lambda()
    return (exterior_d(G) - GG).upto(dmax)


# ---------------------------------------------------------------------------
# the flat connection


@dataclass
class FedosovConnection:
    sd: SymplecticData
    r: WeylSection
    dmax: int
    R: WeylSection = field(repr=False)

    def gamma_form(self) -> WeylSection:
        """gamma = theta + r, with D = nabla - [gamma, .]/2L."""
        return theta_form(self.sd, self.dmax) + self.r

    def D(self, a: WeylSection) -> WeylSection:
        return -delta(a) + nabla_hat(a) - ad_over_2lambda(self.r, a)

    def weyl_curvature(self) -> WeylSection:
        """R + nabla(gamma) - gamma o gamma / 2L, exact through degree dmax - 1."""
        g = self.gamma_form()
        d = self.dmax
        gg = fiber_compose(g.with_dmax(d + 2), g.with_dmax(d + 2), d + 2).over_2lambda()
        return (self.R + nabla_hat(g) - gg).upto(d - 1)

    def residual(self) -> WeylSection:
        """delta r - (R + nabla r - r o r / 2L), exact through degree dmax - 1."""
        r = self.r
        d = self.dmax
        rr = fiber_compose(r.with_dmax(d + 2), r.with_dmax(d + 2), d + 2).over_2lambda()
        return (delta(r) - self.R - nabla_hat(r) + rr).upto(d - 1)

    def is_flat(self) -> bool:
        return self.weyl_curvature() == omega_form(self.sd, self.dmax - 1, -1)


def solve_r(sd: SymplecticData, dmax: int, verify: bool = True) -> FedosovConnection:
    """r = delta^{-1}(R + nabla r - r o r / 2L), one filtration degree per pass."""
    if dmax < 3:
        raise InsufficientDegree(3, dmax)
    R = curvature(sd, dmax)
    r = WeylSection(sd, dmax)
    for _ in range(dmax - 2):
        rr = fiber_compose(r.with_dmax(dmax + 2), r.with_dmax(dmax + 2), dmax + 2).over_2lambda()
        nxt = delta_inv(R + nabla_hat(r) - rr).upto(dmax)
        if nxt == r:
            break
        r = nxt
    fc = FedosovConnection(sd, r, dmax, R)
    if verify:
        if not delta_inv(r).is_zero():
            raise FedosovError("normalization delta^{-1} r = 0 failed")
        if r.min_degree() is not None and r.min_degree() < 3:
            raise FedosovError("r has terms below filtration degree 3")
        if not fc.residual().is_zero():
            raise FedosovError("recursion residual is nonzero")
        if not fc.is_flat():
            raise FedosovError("Weyl curvature differs from -omega")
    return fc


def lift_operator(fc: FedosovConnection, dmax: int | None = None, verify: bool = True) -> WeylSection:
    """The horizontal lift as an operator-valued section: a = f + delta^{-1}(nabla a - [r, a]/2L)."""
    dmax = fc.dmax if dmax is None else dmax
    if dmax > fc.dmax:
        raise InsufficientDegree(dmax, fc.dmax)
    base = WeylSection.identity_op(fc.sd, dmax)
    r = fc.r.upto(dmax)
    a = base
    for _ in range(dmax):
        nxt = base + delta_inv(nabla_hat(a) - ad_over_2lambda(r, a))
        if nxt == a:
            break
        a = nxt
    if verify:
        Da = (-delta(a) + nabla_hat(a) - ad_over_2lambda(r, a)).upto(dmax - 1)
        if not Da.is_zero():
            raise FedosovError("lift is not horizontal")
    return a


def horizontal_lift(f: Poly, fc: FedosovConnection, dmax: int | None = None) -> WeylSection:
    return lift_operator(fc, dmax).evaluate(f)


def fedosov_cochains(fc: FedosovConnection, order: int) -> list[PolyDiffOp]:
    """C_0..C_order read off sigma(lift o lift) with operator-valued lifts."""
    need = 2 * order
    if fc.dmax < need:
        raise InsufficientDegree(need, fc.dmax)
    A = lift_operator(fc, need)
    prod = fiber_compose(A, A, need, center_only=True)
    sig = prod.sigma()
    if any(k > order for k in sig):
        raise FedosovError("unexpected L power in the center projection")
    return [PolyDiffOp(fc.sd.names, 2, sig.get(k, {})) for k in range(order + 1)]


def fedosov_product(fc: FedosovConnection, order: int | None = None) -> StarProduct:
    order = fc.dmax // 2 if order is None else order
    cs = fedosov_cochains(fc, order)
    return StarProduct(fc.sd.names, order, cs, True, fc.sd.poisson(), "fedosov")


def fedosov_star(f: Poly, g: Poly, fc: FedosovConnection, dmax: int | None = None) -> LambdaSeries:
    """sigma(lift(f) o lift(g)) through L^{dmax // 2}."""
    dmax = fc.dmax if dmax is None else dmax
    order = dmax // 2
    if order < 1:
        raise InsufficientDegree(2, dmax)
    a = horizontal_lift(f, fc, 2 * order)
    b = horizontal_lift(g, fc, 2 * order)
    prod = fiber_compose(a, b, 2 * order, center_only=True).sigma()
    coeffs = [prod.get(k, {}).get((), Poly(fc.sd.names)) for k in range(order + 1)]
    return LambdaSeries(fc.sd.names, order, coeffs)
