"""Polydifferential operators, polyvector fields and the cochain calculus.

A :class:`PolyDiffOp` of arity k is stored as a map from a signature (one
packed derivative multi-index per slot) to a coefficient polynomial, so that

    D(f_1, ..., f_k) = sum_sig coeff(sig) * prod_j d^{sig_j} f_j .

Terms with equal signature are always merged, which makes zero-testing a
dictionary emptiness check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Iterable, Mapping, Sequence

from .algebra_core import SHIFT, MASK, Poly, Scalar, _add_into, _clean, pack, unpack, key_degree, parse_expression


@lru_cache(maxsize=None)
def _compositions(e: int, parts: int) -> tuple:
    """All (multinomial, parts-tuple) with entries summing to e."""
    if parts == 0:
        return ((1, ()),) if e == 0 else ()
    if parts == 1:
        return ((1, (e,)),)
    out = []
    for first in range(e + 1):
        for c, rest in _compositions(e - first, parts - 1):
            out.append((c * _binom(e, first), (first,) + rest))
    return tuple(out)


@lru_cache(maxsize=None)
def _binom(n: int, k: int) -> int:
    if k < 0 or k > n:
        return 0
    return factorial(n) // (factorial(k) * factorial(n - k))


@lru_cache(maxsize=200000)
def split_key(key: int, parts: int, dim: int) -> tuple:
    """Leibniz splitting of d^key over ``parts`` factors: (multinomial, keys)."""
    exps = unpack(key, dim)
    per_var = []
    for i, e in enumerate(exps):
        if e == 0:
            continue
        per_var.append([(c, tuple(x << (SHIFT * i) for x in comp)) for c, comp in _compositions(e, parts)])
    if not per_var:
        return ((1, (0,) * parts),)
    out = []
    for combo in itertools.product(*per_var):
        c = 1
        ks = [0] * parts
        for cc, comp in combo:
            c *= cc
            for j in range(parts):
                ks[j] += comp[j]
        out.append((c, tuple(ks)))
    return tuple(out)


def _slot_orders(sig, dim):
    return [key_degree(k) for k in sig]


class PolyDiffOp:
    """Finite sum of coefficient-times-derivatives terms acting on ``arity`` slots."""

    __slots__ = ("names", "arity", "terms")

    def __init__(self, names: Sequence[str], arity: int, terms: Mapping[tuple, Poly] | None = None):
        self.names = tuple(names)
        self.arity = arity
        self.terms = {s: c for s, c in (terms or {}).items() if not c.is_zero()}

    # -- construction -------------------------------------------------------
    @classmethod
    def zero(cls, names, arity) -> "PolyDiffOp":
        return cls(names, arity)

    @classmethod
    def multiplication(cls, names, arity: int = 2) -> "PolyDiffOp":
        return cls(names, arity, {(0,) * arity: Poly.const(names, 1)})

    @classmethod
    def identity(cls, names) -> "PolyDiffOp":
        return cls.multiplication(names, 1)

    @classmethod
    def from_terms(cls, names, arity: int, terms: Iterable) -> "PolyDiffOp":
        """Build from (coeff, [multi-index per slot]) pairs, merging duplicates."""
        names = tuple(names)
        acc: dict = {}
        for coeff, derivs in terms:
            if len(derivs) != arity:
                raise ValueError(f"expected {arity} multi-indices, got {len(derivs)}")
            for d in derivs:
                if len(d) != len(names):
                    raise ValueError("multi-index length does not match dimension")
            if not isinstance(coeff, Poly):
                coeff = Poly.const(names, coeff)
            sig = tuple(pack(d) for d in derivs)
            acc[sig] = acc[sig] + coeff if sig in acc else coeff
        return cls(names, arity, acc)

    # -- inspection ---------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.names)

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def term_list(self) -> list[tuple[Poly, list[tuple[int, ...]]]]:
        """Canonically ordered (coeff, multi-indices) list."""
        d = self.dim
        rows = [(tuple(unpack(k, d) for k in sig), c) for sig, c in self.terms.items()]
        rows.sort(key=lambda r: r[0])
        return [(c, list(m)) for m, c in rows]

    def max_order(self) -> int:
        return max((sum(key_degree(k) for k in s) for s in self.terms), default=0)

    def slot_order(self, slot: int) -> int:
        return max((key_degree(s[slot]) for s in self.terms), default=0)

    def _check(self, other: "PolyDiffOp"):
        if other.names != self.names:
            raise ValueError("operators over different coordinate rings")
        if other.arity != self.arity:
            raise ValueError(f"arity mismatch: {self.arity} vs {other.arity}")

    # -- linear structure ---------------------------------------------------
    def __add__(self, other: "PolyDiffOp") -> "PolyDiffOp":
        self._check(other)
        acc = dict(self.terms)
        for s, c in other.terms.items():
            acc[s] = acc[s] + c if s in acc else c
        return PolyDiffOp(self.names, self.arity, acc)

    def __neg__(self):
        return PolyDiffOp(self.names, self.arity, {s: -c for s, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "PolyDiffOp":
        if isinstance(c, Poly):
            return PolyDiffOp(self.names, self.arity, {s: v * c for s, v in self.terms.items()})
        return PolyDiffOp(self.names, self.arity, {s: v.scale(c) for s, v in self.terms.items()})

    __mul__ = scale
    __rmul__ = scale

    def __eq__(self, other):
        if not isinstance(other, PolyDiffOp):
            return NotImplemented
        return self.names == other.names and self.arity == other.arity and self.terms == other.terms

    def __hash__(self):
        return hash((self.names, self.arity, frozenset(self.terms.items())))

    def truncate_jet(self, jet: int | None) -> "PolyDiffOp":
        if jet is None:
            return self
        return PolyDiffOp(self.names, self.arity,
                          {s: c for s, c in self.terms.items() if all(key_degree(k) <= jet for k in s)})

    # -- evaluation ---------------------------------------------------------
    def __call__(self, *args: Poly) -> Poly:
        return apply_op(self, list(args))

    def __repr__(self):
        return f"PolyDiffOp(arity={self.arity}, dim={self.dim}, terms={len(self.terms)})"

    def __str__(self):
        if not self.terms:
            return "0"
        rows = []
        for c, ms in self.term_list():
            rows.append(f"({c})*" + "|".join("d" + "".join(map(str, m)) for m in ms))
        return " + ".join(rows)

    # -- interchange --------------------------------------------------------
    def to_records(self) -> dict:
        return {
            "arity": self.arity,
            "dim": self.dim,
            "names": list(self.names),
            "terms": [{"coeff": str(c), "derivs": [list(m) for m in ms]} for c, ms in self.term_list()],
        }

    @classmethod
    def from_records(cls, rec: Mapping) -> "PolyDiffOp":
        names = tuple(rec.get("names") or [f"x{i + 1}" for i in range(rec["dim"])])
        if len(names) != rec["dim"]:
            raise ValueError("names do not match dim")
        terms = [(parse_expression(t["coeff"], names), t["derivs"]) for t in rec["terms"]]
        return cls.from_terms(names, rec["arity"], terms)


def apply_op(D: PolyDiffOp, args: Sequence[Poly]) -> Poly:
    """Evaluate ``D`` on polynomial arguments."""
    if len(args) != D.arity:
        raise ValueError(f"operator has arity {D.arity}, got {len(args)} arguments")
    for a in args:
        if a.names != D.names:
            raise ValueError("argument ring does not match operator ring")
    caches = [dict() for _ in args]
    out = Poly(D.names)
    for sig, c in D.terms.items():
        term = c
        for j, k in enumerate(sig):
            dj = caches[j].get(k)
            if dj is None:
                dj = args[j].diff_key(k)
                caches[j][k] = dj
            if dj.is_zero():
                term = None
                break
            term = term * dj
        if term is not None:
            out = out + term
    return out


def _acc_product(acc: dict, sig: tuple, c1: Poly, c2: Poly, mult: int):
    """acc[sig] += mult * c1 * c2 on raw (re, im) coefficient dicts."""
    re_, im_ = acc.setdefault(sig, ({}, {}))
    get = re_.get
    b = list(c2.re.items())
    for ka, ca in c1.re.items():
        ca = ca * mult
        for kb, cb in b:
            k = ka + kb
            re_[k] = get(k, 0) + ca * cb
    if c1.im or c2.im:
        for x, y, out, sgn in ((c1.im, c2.im, re_, -1), (c1.re, c2.im, im_, 1), (c1.im, c2.re, im_, 1)):
            for ka, ca in x.items():
                ca = ca * (mult * sgn)
                for kb, cb in y.items():
                    k = ka + kb
                    out[k] = out.get(k, 0) + ca * cb


def _from_raw(names, arity: int, acc: dict) -> "PolyDiffOp":
    terms = {}
    for sig, (re_, im_) in acc.items():
        re_ = {k: v for k, v in re_.items() if v}
        im_ = {k: v for k, v in im_.items() if v} if im_ else {}
        if re_ or im_:
            terms[sig] = Poly(names, re_, im_)
    op = PolyDiffOp.__new__(PolyDiffOp)
    op.names, op.arity, op.terms = tuple(names), arity, terms
    return op


def insert(D1: PolyDiffOp, slot: int, D2: PolyDiffOp, jet: int | None = None) -> PolyDiffOp:
    """The operator ``D1(f_0..f_{slot-1}, D2(f_slot..), ...)`` of arity k1+k2-1.

    ``jet`` drops result terms taking more than ``jet`` derivatives of any
    single argument; results are then exact on inputs of degree <= jet.
    """
    return _from_raw(D1.names, D1.arity + D2.arity - 1, _insert_raw(D1, slot, D2, jet))


def _insert_raw(D1: PolyDiffOp, slot: int, D2: PolyDiffOp, jet: int | None = None) -> dict:
    if D1.names != D2.names:
        raise ValueError("operators over different coordinate rings")
    if not 0 <= slot < D1.arity:
        raise IndexError("slot out of range")
    dim = D1.dim
    k2 = D2.arity
    acc: dict = {}
    for sig1, c1 in D1.terms.items():
        a = sig1[slot]
        pre, post = sig1[:slot], sig1[slot + 1:]
        if jet is not None and any(key_degree(k) > jet for k in pre + post):
            continue
        for sig2, c2 in D2.terms.items():
            const2 = c2.is_constant()
            if const2:
                splits = split_key(a, k2, dim)
                for mult, parts in splits:
                    mid = tuple(p + b for p, b in zip(parts, sig2))
                    if jet is not None and any(key_degree(k) > jet for k in mid):
                        continue
                    _acc_product(acc, pre + mid + post, c1, c2, mult)
            else:
                dcache = {}
                for mult, parts in split_key(a, k2 + 1, dim):
                    k0 = parts[0]
                    dc = dcache.get(k0)
                    if dc is None:
                        dc = c2.diff_key(k0)
                        dcache[k0] = dc
                    if dc.is_zero():
                        continue
                    mid = tuple(p + b for p, b in zip(parts[1:], sig2))
                    if jet is not None and any(key_degree(k) > jet for k in mid):
                        continue
                    _acc_product(acc, pre + mid + post, c1, dc, mult)
    return acc


def permute_slots(D: PolyDiffOp, perm: Sequence[int]) -> PolyDiffOp:
    """R(f_0..f_{k-1}) = D(f_{perm[0]}, ..., f_{perm[k-1]})."""
    if sorted(perm) != list(range(D.arity)):
        raise ValueError("not a permutation of the slots")
    acc = {}
    for sig, c in D.terms.items():
        new = [0] * D.arity
        for i, k in enumerate(sig):
            new[perm[i]] = k
        acc[tuple(new)] = c
    return PolyDiffOp(D.names, D.arity, acc)


def multiply_slot(D: PolyDiffOp, where: str) -> PolyDiffOp:
    """Append a bare multiplicative argument on the left or right."""
    if where == "left":
        return PolyDiffOp(D.names, D.arity + 1, {(0,) + s: c for s, c in D.terms.items()})
    if where == "right":
        return PolyDiffOp(D.names, D.arity + 1, {s + (0,): c for s, c in D.terms.items()})
    raise ValueError(where)


def _perm_sign(p: Sequence[int]) -> int:
    s = 1
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                s = -s
    return s


def is_antisymmetric(D: PolyDiffOp) -> bool:
    for i in range(D.arity - 1):
        perm = list(range(D.arity))
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
        if permute_slots(D, perm) != -D:
            return False
    return True


def antisymmetrize(D: PolyDiffOp) -> PolyDiffOp:
    out = PolyDiffOp.zero(D.names, D.arity)
    for perm in itertools.permutations(range(D.arity)):
        t = permute_slots(D, perm)
        out = out + (t if _perm_sign(perm) > 0 else -t)
    return out.scale(Fraction(1, factorial(D.arity)))


# ---------------------------------------------------------------------------
# Gerstenhaber structure


def gerstenhaber_compose(D1: PolyDiffOp, D2: PolyDiffOp, jet: int | None = None) -> PolyDiffOp:
    """Alternating sum of insertions of D2 into each slot of D1 (shifted grading)."""
    k2 = D2.arity - 1
    out = PolyDiffOp.zero(D1.names, D1.arity + D2.arity - 1)
    for j in range(D1.arity):
        t = insert(D1, j, D2, jet)
        out = out + (t if (j * k2) % 2 == 0 else -t)
    return out


def gerstenhaber_bracket(D1: PolyDiffOp, D2: PolyDiffOp, jet: int | None = None) -> PolyDiffOp:
    k1, k2 = D1.arity - 1, D2.arity - 1
    a = gerstenhaber_compose(D1, D2, jet)
    b = gerstenhaber_compose(D2, D1, jet)
    return a - b if (k1 * k2) % 2 == 0 else a + b


def hochschild_coboundary(C: PolyDiffOp, jet: int | None = None) -> PolyDiffOp:
    """bC(u_0..u_p) with alternating insertions of the pointwise product."""
    p = C.arity
    if p < 1:
        raise ValueError("Hochschild coboundary needs arity >= 1")
    m = PolyDiffOp.multiplication(C.names)
    out = multiply_slot(C, "left")
    for i in range(p):
        t = insert(C, i, m, jet)
        out = out + (t if (i + 1) % 2 == 0 else -t)
    last = multiply_slot(C, "right")
    out = out + (last if (p + 1) % 2 == 0 else -last)
    return out.truncate_jet(jet)


def hochschild_delta(D: PolyDiffOp) -> PolyDiffOp:
    """The differential [m, D]_G; equals (-1)^{arity-1} times ``hochschild_coboundary``."""
    return gerstenhaber_bracket(PolyDiffOp.multiplication(D.names), D)


# ---------------------------------------------------------------------------
# polyvector fields


def _sort_with_sign(idx: Sequence[int]):
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, None
    return _perm_sign(idx), tuple(sorted(idx))


class PolyVector:
    """Antisymmetric k-vector field, stored by strictly increasing index tuples.

    The component for ``(i_1 < ... < i_k)`` is the coefficient of
    ``d_{i_1} ^ ... ^ d_{i_k}``; it equals the antisymmetric tensor entry
    with those indices.
    """

    __slots__ = ("names", "degree", "comps")

    def __init__(self, names, degree: int, comps: Mapping[tuple, Poly] | None = None):
        self.names = tuple(names)
        self.degree = degree
        self.comps = {}
        for k, v in (comps or {}).items():
            k = tuple(k)
            if len(k) != degree or list(k) != sorted(set(k)):
                raise ValueError(f"component key {k} is not a strictly increasing {degree}-tuple")
            if any(not 0 <= i < len(self.names) for i in k):
                raise IndexError(f"direction index out of range in {k}")
            if not v.is_zero():
                self.comps[k] = v

    @classmethod
    def from_tensor(cls, names, degree: int, tensor: Mapping[tuple, Poly], check: bool = True) -> "PolyVector":
        """Antisymmetrize a full tensor by group averaging; optionally require it was already antisymmetric."""
        names = tuple(names)
        zero = Poly(names)
        inv = Fraction(1, factorial(degree))
        avg: dict = {}
        keys = {tuple(sorted(k)) for k in tensor if len(set(k)) == len(k)}
        for base in keys:
            acc = zero
            for perm in itertools.permutations(range(degree)):
                idx = tuple(base[p] for p in perm)
                t = tensor.get(idx)
                if t is not None:
                    acc = acc + (t if _perm_sign(perm) > 0 else -t)
            avg[base] = acc.scale(inv)
        out = cls(names, degree, avg)
        if check:
            for k, v in tensor.items():
                s, srt = _sort_with_sign(k)
                expect = zero if s == 0 else out.comps.get(srt, zero).scale(s)
                if v != expect:
                    raise ValueError(f"tensor is not antisymmetric at index {k}")
        return out

    @classmethod
    def from_matrix(cls, names, matrix: Sequence[Sequence[Poly]]) -> "PolyVector":
        names = tuple(names)
        d = len(names)
        if len(matrix) != d or any(len(r) != d for r in matrix):
            raise ValueError("matrix shape does not match dimension")
        tensor = {(i, j): matrix[i][j] for i in range(d) for j in range(d) if not matrix[i][j].is_zero()}
        return cls.from_tensor(names, 2, tensor)

    @classmethod
    def vector(cls, names, coeffs: Sequence[Poly]) -> "PolyVector":
        return cls(names, 1, {(i,): c for i, c in enumerate(coeffs)})

    @classmethod
    def basis(cls, names, idx: Sequence[int], coeff=None) -> "PolyVector":
        names = tuple(names)
        s, srt = _sort_with_sign(idx)
        if s == 0:
            return cls(names, len(idx))
        c = coeff if coeff is not None else Poly.const(names, 1)
        return cls(names, len(idx), {srt: c.scale(s)})

    @property
    def dim(self):
        return len(self.names)

    def component(self, idx: Sequence[int]) -> Poly:
        s, srt = _sort_with_sign(idx)
        if s == 0:
            return Poly(self.names)
        return self.comps.get(srt, Poly(self.names)).scale(s)

    def matrix(self) -> list[list[Poly]]:
        if self.degree != 2:
            raise ValueError("matrix form only for bivectors")
        d = self.dim
        return [[self.component((i, j)) for j in range(d)] for i in range(d)]

    def is_zero(self):
        return not self.comps

    def __add__(self, other):
        if other.names != self.names or other.degree != self.degree:
            raise ValueError("polyvector mismatch")
        acc = dict(self.comps)
        for k, v in other.comps.items():
            acc[k] = acc[k] + v if k in acc else v
        return PolyVector(self.names, self.degree, acc)

    def __neg__(self):
        return PolyVector(self.names, self.degree, {k: -v for k, v in self.comps.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        if isinstance(c, Poly):
            return PolyVector(self.names, self.degree, {k: v * c for k, v in self.comps.items()})
        return PolyVector(self.names, self.degree, {k: v.scale(c) for k, v in self.comps.items()})

    def __eq__(self, other):
        if not isinstance(other, PolyVector):
            return NotImplemented
        return self.names == other.names and self.degree == other.degree and self.comps == other.comps

    def wedge(self, other: "PolyVector") -> "PolyVector":
        acc: dict = {}
        for k1, v1 in self.comps.items():
            for k2, v2 in other.comps.items():
                s, srt = _sort_with_sign(k1 + k2)
                if s == 0:
                    continue
                t = (v1 * v2).scale(s)
                acc[srt] = acc[srt] + t if srt in acc else t
        return PolyVector(self.names, self.degree + other.degree, acc)

    def __str__(self):
        if not self.comps:
            return "0"
        return " + ".join(f"({v})*d" + "^d".join(str(i + 1) for i in k) for k, v in sorted(self.comps.items()))

    __repr__ = __str__


def _vf_bracket(a: dict, b: dict, names) -> dict:
    """Lie bracket of vector fields given as {index: coeff}."""
    out: dict = {}
    for i, ai in a.items():
        for j, bj in b.items():
            t = ai * bj.diff(i)
            if not t.is_zero():
                out[j] = out[j] + t if j in out else t
            t = bj * ai.diff(j)
            if not t.is_zero():
                out[i] = out[i] - t if i in out else -t
    return out


def schouten_bracket(A: PolyVector, B: PolyVector) -> PolyVector:
    """Schouten-Nijenhuis bracket via the decomposable-tensor expansion.

    Each stored component c * d_{i_1}^...^d_{i_k} is read as the decomposable
    (c d_{i_1}) ^ d_{i_2} ^ ... ^ d_{i_k}; only the first factor is non-constant.
    """
    if A.names != B.names:
        raise ValueError("polyvectors over different coordinate rings")
    names = A.names
    deg = A.degree + B.degree - 1
    if A.degree == 0 or B.degree == 0:
        raise ValueError("bracket with functions is not handled here")
    one = Poly.const(names, 1)
    acc: dict = {}
    for I, c in A.comps.items():
        xs = [{I[0]: c}] + [{i: one} for i in I[1:]]
        for J, e in B.comps.items():
            ys = [{J[0]: e}] + [{j: one} for j in J[1:]]
            for i, xi in enumerate(xs):
                for j, yj in enumerate(ys):
                    br = _vf_bracket(xi, yj, names)
                    if not br:
                        continue
                    sgn = -1 if (i + j) % 2 else 1
                    rest_x = [x for t, x in enumerate(xs) if t != i]
                    rest_y = [y for t, y in enumerate(ys) if t != j]
                    # the remaining factors are single-direction fields
                    coeff_rest = one
                    idx_rest = []
                    for f in rest_x + rest_y:
                        (k, v), = f.items()
                        coeff_rest = coeff_rest * v
                        idx_rest.append(k)
                    for m, bm in br.items():
                        s, srt = _sort_with_sign([m] + idx_rest)
                        if s == 0:
                            continue
                        t = (bm * coeff_rest).scale(s * sgn)
                        acc[srt] = acc[srt] + t if srt in acc else t
    return PolyVector(names, deg, acc)


@dataclass(frozen=True)
class JacobiResult:
    ok: bool
    defect: PolyVector


def jacobi_check(alpha) -> JacobiResult:
    """Vanishing of the Schouten self-bracket of a bivector (matrix or PolyVector)."""
    if isinstance(alpha, PoissonStructure):
        bv = alpha.bivector
    elif isinstance(alpha, PolyVector):
        bv = alpha
    else:
        matrix = [list(r) for r in alpha]
        bv = PolyVector.from_matrix(matrix[0][0].names, matrix)
    if bv.degree != 2:
        raise ValueError("Jacobi check needs a bivector")
    d = schouten_bracket(bv, bv)
    return JacobiResult(d.is_zero(), d)


def hkr_inject(xi: PolyVector) -> PolyDiffOp:
    """(1/k!) det(xi_i(f_j)) extended linearly to all k-vectors."""
    k = xi.degree
    inv = Fraction(1, factorial(k))
    d = xi.dim
    acc: dict = {}
    for I, c in xi.comps.items():
        for perm in itertools.permutations(range(k)):
            sig = tuple(pack([1 if t == I[perm[s]] else 0 for t in range(d)]) for s in range(k))
            t = c.scale(inv * _perm_sign(perm))
            acc[sig] = acc[sig] + t if sig in acc else t
    return PolyDiffOp(xi.names, k, acc)


class PoissonStructure:
    """Antisymmetric matrix of polynomials defining {f,g} = a^{ij} d_i f d_j g."""

    __slots__ = ("names", "matrix", "bivector", "_op")

    def __init__(self, names, matrix: Sequence[Sequence[Poly]], check_jacobi: bool = True):
        self.names = tuple(names)
        self.matrix = [list(r) for r in matrix]
        self.bivector = PolyVector.from_matrix(self.names, self.matrix)
        self._op = None
        if check_jacobi:
            res = jacobi_check(self.bivector)
            if not res.ok:
                raise ValueError(f"Jacobi identity fails; Schouten defect {res.defect}")

    @classmethod
    def from_bivector(cls, bv: PolyVector, check_jacobi=True) -> "PoissonStructure":
        return cls(bv.names, bv.matrix(), check_jacobi)

    @classmethod
    def constant(cls, names, matrix) -> "PoissonStructure":
        names = tuple(names)
        return cls(names, [[Poly.const(names, x) for x in r] for r in matrix])

    @property
    def dim(self):
        return len(self.names)

    def operator(self) -> PolyDiffOp:
        if self._op is None:
            d = self.dim
            acc = {}
            for i in range(d):
                for j in range(d):
                    c = self.matrix[i][j]
                    if not c.is_zero():
                        ei = [0] * d
                        ej = [0] * d
                        ei[i] = 1
                        ej[j] = 1
                        acc[(pack(ei), pack(ej))] = c
            self._op = PolyDiffOp(self.names, 2, acc)
        return self._op

    def bracket(self, f: Poly, g: Poly) -> Poly:
        return apply_op(self.operator(), [f, g])

    def is_constant(self) -> bool:
        return all(c.is_constant() for r in self.matrix for c in r)


def _accumulate_permuted(acc: dict, raw: dict, perm: Sequence[int], sign: int):
    """acc += sign * (raw operator with slots permuted as in permute_slots)."""
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    setdefault = acc.setdefault
    for sig, (cre, cim) in raw.items():
        re_, im_ = setdefault(tuple([sig[j] for j in inv]), ({}, {}))
        get = re_.get
        if sign > 0:
            for k, v in cre.items():
                re_[k] = get(k, 0) + v
        else:
            for k, v in cre.items():
                re_[k] = get(k, 0) - v
        if cim:
            for k, v in cim.items():
                im_[k] = im_.get(k, 0) + (v if sign > 0 else -v)


def chevalley_coboundary(B: PolyDiffOp, bracket: PoissonStructure, check: bool = True) -> PolyDiffOp:
    """Chevalley-Eilenberg coboundary of an antisymmetric cochain, adjoint coefficients."""
    if check and not is_antisymmetric(B):
        raise ValueError("Chevalley cochains must be antisymmetric")
    P = bracket.operator()
    n = B.arity + 1
    acc: dict = {}
    outer = _insert_raw(P, 1, B)  # (u, a_1..a_p) -> {u, B(a)}
    for j in range(n):
        others = [t for t in range(n) if t != j]
        # R(u_0..u_p) = outer(u_j, others...)
        _accumulate_permuted(acc, outer, [j] + others, 1 if j % 2 == 0 else -1)
    if B.arity == 0:
        return _from_raw(B.names, n, acc)
    inner = _insert_raw(B, 0, P)  # ({a,b}, rest...) as (a, b, rest)
    for i in range(n):
        for j in range(i + 1, n):
            others = [t for t in range(n) if t not in (i, j)]
            _accumulate_permuted(acc, inner, [i, j] + others, 1 if (i + j) % 2 == 0 else -1)
    return _from_raw(B.names, n, acc)


def extract_bidifferential(action, names, max_order: int) -> PolyDiffOp:
    """Recover an arity-2 operator from its action on monomials.

    ``action(f, g)`` must be bidifferential with derivatives of order at most
    ``max_order`` in each slot.  Coefficients are reconstructed by Moebius
    inversion over monomials centred at the point x.
    """
    names = tuple(names)
    d = len(names)
    xs = [Poly.var(names, i) for i in range(d)]
    idx = [m for m in itertools.product(range(max_order + 1), repeat=d) if sum(m) <= max_order]

    def mono(m):
        out = Poly.const(names, Fraction(1, 1))
        den = 1
        for i, e in enumerate(m):
            out = out * xs[i] ** e
            den *= factorial(e)
        return out.scale(Fraction(1, den))

    # shifted monomials (y - x)^a / a! expanded: sum_{a'<=a} (-x)^{a-a'}/(a-a')! * y^{a'}/a'!
    def neg_x(m):
        out = Poly.const(names, 1)
        den = 1
        for i, e in enumerate(m):
            out = out * (-xs[i]) ** e
            den *= factorial(e)
        return out.scale(Fraction(1, den))

    vals: dict = {}

    def val(a, b):
        key = (a, b)
        if key not in vals:
            vals[key] = action(mono(a), mono(b))
        return vals[key]

    acc = {}
    for a in idx:
        for b in idx:
            c = Poly(names)
            for a2 in itertools.product(*[range(e + 1) for e in a]):
                for b2 in itertools.product(*[range(e + 1) for e in b]):
                    v = val(a2, b2)
                    if v.is_zero():
                        continue
                    ra = tuple(x - y for x, y in zip(a, a2))
                    rb = tuple(x - y for x, y in zip(b, b2))
                    c = c + neg_x(ra) * neg_x(rb) * v
            if not c.is_zero():
                acc[(pack(a), pack(b))] = c
    return PolyDiffOp(names, 2, acc)
