"""Star-products and Lie deformations as sequences of cochains.

Associativity at order r reads  D_r = bC_r  where D_r collects the products
of lower cochains; every check here returns the difference as an operator so
that "holds" means "is the zero operator".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .algebra_core import LambdaSeries, Poly, key_degree, unpack, pack
from .polydiff import (
    PoissonStructure,
    PolyDiffOp,
    apply_op,
    chevalley_coboundary,
    hochschild_coboundary,
    insert,
    is_antisymmetric,
    permute_slots,
    split_key,
)

SWAP = (1, 0)


def swap(D: PolyDiffOp) -> PolyDiffOp:
    return permute_slots(D, SWAP)


@dataclass
class StarProduct:
    """u * v = sum_r L^r C_r(u, v), truncated at order ``order``."""

    names: tuple
    order: int
    cochains: list
    normalized: bool = False
    poisson: PoissonStructure | None = None
    label: str = ""

    def __post_init__(self):
        self.names = tuple(self.names)
        if len(self.cochains) != self.order + 1:
            raise ValueError(f"need {self.order + 1} cochains, got {len(self.cochains)}")
        for c in self.cochains:
            if c.arity != 2 or c.names != self.names:
                raise ValueError("cochains must be arity-2 operators over the same ring")
        if self.cochains[0] != PolyDiffOp.multiplication(self.names):
            raise ValueError("C_0 must be pointwise multiplication")
        if self.normalized:
            if self.poisson is None:
                raise ValueError("normalized star-product needs a Poisson structure")
            if self.order >= 1:
                anti = self.cochains[1] - swap(self.cochains[1])
                if anti != self.poisson.operator().scale(2):
                    raise ValueError("antisymmetric part of C_1 is not the designated bracket")

    @property
    def dim(self):
        return len(self.names)

    def truncated(self, t: int) -> "StarProduct":
        if t > self.order:
            raise ValueError("cannot raise the order by truncation")
        return StarProduct(self.names, t, self.cochains[: t + 1], self.normalized, self.poisson, self.label)

    def __eq__(self, other):
        if not isinstance(other, StarProduct):
            return NotImplemented
        return self.names == other.names and self.order == other.order and self.cochains == other.cochains

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "names": list(self.names),
            "order": self.order,
            "normalized": self.normalized,
            "cochains": [c.to_records() for c in self.cochains],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "StarProduct":
        cs = [PolyDiffOp.from_records(r) for r in doc["cochains"]]
        names = tuple(doc.get("names") or cs[0].names)
        return cls(names, doc["order"], cs)


@dataclass
class LieDeformation:
    """[u, v] = {u, v} + sum_{r>=1} L^r B_r(u, v)."""

    names: tuple
    order: int
    cochains: list  # B_1 .. B_N
    base: PoissonStructure

    def __post_init__(self):
        self.names = tuple(self.names)
        if len(self.cochains) != self.order:
            raise ValueError(f"need {self.order} cochains B_1..B_N")
        for b in self.cochains:
            if not is_antisymmetric(b):
                raise ValueError("Lie deformation cochains must be antisymmetric")

    def cochain(self, r: int) -> PolyDiffOp:
        return self.base.operator() if r == 0 else self.cochains[r - 1]

    def bracket(self, u: Poly, v: Poly) -> LambdaSeries:
        return LambdaSeries(self.names, self.order, [apply_op(self.cochain(r), [u, v]) for r in range(self.order + 1)])


@dataclass
class EquivalenceTransform:
    """T = I + sum_{r>=1} L^r T_r."""

    names: tuple
    order: int
    maps: list  # T_1 .. T_N

    def __post_init__(self):
        self.names = tuple(self.names)
        if len(self.maps) != self.order:
            raise ValueError(f"need {self.order} maps T_1..T_N")
        for t in self.maps:
            if t.arity != 1:
                raise ValueError("equivalence maps are arity-1 operators")

    def map(self, r: int) -> PolyDiffOp:
        return PolyDiffOp.identity(self.names) if r == 0 else self.maps[r - 1]

    def apply(self, u: Poly) -> LambdaSeries:
        return LambdaSeries(self.names, self.order, [apply_op(self.map(r), [u]) for r in range(self.order + 1)])

    @classmethod
    def identity(cls, names, order) -> "EquivalenceTransform":
        return cls(names, order, [PolyDiffOp.zero(names, 1) for _ in range(order)])


# ---------------------------------------------------------------------------


def star_apply(S: StarProduct, u: Poly, v: Poly) -> LambdaSeries:
    if u.names != S.names or v.names != S.names:
        raise ValueError("argument ring does not match the star-product")
    return LambdaSeries(S.names, S.order, [apply_op(c, [u, v]) for c in S.cochains])


def star_series(S: StarProduct, a: LambdaSeries, b: LambdaSeries) -> LambdaSeries:
    """Star product extended L-linearly to series arguments (non-negative powers)."""
    if a.neg or b.neg:
        raise ValueError("series arguments must not carry negative powers")
    n = min(S.order, a.trunc_order, b.trunc_order)
    out = [Poly(S.names) for _ in range(n + 1)]
    for i, ai in a.items():
        if i > n:
            break
        for j, bj in b.items():
            if i + j > n:
                break
            for k in range(n - i - j + 1):
                out[i + j + k] = out[i + j + k] + apply_op(S.cochains[k], [ai, bj])
    return LambdaSeries(S.names, n, out)


def associator(S: StarProduct, u: Poly, v: Poly, w: Poly) -> LambdaSeries:
    """(u*v)*w - u*(v*w) as a series; its L^r coefficient is the order-r defect at (u, v, w)."""
    lu = LambdaSeries.from_poly(u, S.order)
    lw = LambdaSeries.from_poly(w, S.order)
    left = star_series(S, star_apply(S, u, v), lw)
    right = star_series(S, lu, star_apply(S, v, w))
    return left - right


def _d_operator(S: StarProduct, r: int, jet=None, upto: int | None = None) -> PolyDiffOp:
    upto = S.order if upto is None else upto
    out = PolyDiffOp.zero(S.names, 3)
    for j in range(1, r):
        k = r - j
        if j > upto or k > upto:
            continue
        out = out + insert(S.cochains[j], 0, S.cochains[k], jet) - insert(S.cochains[j], 1, S.cochains[k], jet)
    return out


def associativity_defect(S: StarProduct, r: int, jet: int | None = None) -> PolyDiffOp:
    """D_r - bC_r; zero iff associativity holds at order r.

    With ``jet`` set, terms differentiating any argument more than ``jet``
    times are dropped: the result is then exact on arguments of degree <= jet.
    """
    if r > S.order:
        raise ValueError(f"order {r} exceeds the star-product order {S.order}")
    if r == 0:
        return PolyDiffOp.zero(S.names, 3)
    return (_d_operator(S, r, jet) - hochschild_coboundary(S.cochains[r], jet)).truncate_jet(jet)


def cyclic_sum(Q: PolyDiffOp) -> PolyDiffOp:
    return Q + permute_slots(Q, (1, 2, 0)) + permute_slots(Q, (2, 0, 1))


def jacobi_defect(L: LieDeformation, r: int) -> PolyDiffOp:
    """E_r - dB_r with E_r the cyclic sum of B_j(B_k(u,v),w), j,k >= 1."""
    if r > L.order:
        raise ValueError(f"order {r} exceeds the deformation order {L.order}")
    E = PolyDiffOp.zero(L.names, 3)
    for j in range(1, r):
        E = E + cyclic_sum(insert(L.cochain(j), 0, L.cochain(r - j)))
    if r == 0:
        return cyclic_sum(insert(L.cochain(0), 0, L.cochain(0)))
    return E - chevalley_coboundary(L.cochain(r), L.base)


@dataclass(frozen=True)
class ObstructionResult:
    is_cocycle: bool
    cocycle: PolyDiffOp
    driver_is_cocycle: bool | None = None


def obstruction_cocycle_check(S: StarProduct, t: int, jet: int | None = None) -> ObstructionResult:
    """Given associativity through order t, D_{t+1} (built from C_1..C_t) must be a 3-cocycle."""
    if t + 1 > S.order + 1:
        raise ValueError("order out of range")
    for r in range(1, min(t, S.order) + 1):
        if not associativity_defect(S, r, jet).is_zero():
            raise ValueError(f"associativity fails at order {r} <= {t}; obstruction theory does not apply")
    D = _d_operator(S, t + 1, jet, upto=t)
    bD = hochschild_coboundary(D, jet)
    driver = None
    if t == 0 and S.order >= 1:
        driver = hochschild_coboundary(S.cochains[1], jet).is_zero()
    return ObstructionResult(bD.is_zero(), D, driver)


def apply_equivalence(T: EquivalenceTransform, S: StarProduct) -> StarProduct:
    """The product *' with T(u *' v) = T(u) * T(v), solved order by order."""
    if T.names != S.names:
        raise ValueError("transform and star-product over different rings")
    n = min(T.order, S.order)
    new = [PolyDiffOp.multiplication(S.names)]
    for r in range(1, n + 1):
        acc = PolyDiffOp.zero(S.names, 2)
        for a in range(r + 1):
            for b in range(r - a + 1):
                c = r - a - b
                op = S.cochains[a]
                if b:
                    op = insert(op, 0, T.map(b))
                if c:
                    op = insert(op, 1, T.map(c))
                acc = acc + op
        for a in range(1, r + 1):
            acc = acc - insert(T.map(a), 0, new[r - a])
        new.append(acc)
    poisson = S.poisson
    return StarProduct(S.names, n, new, S.normalized and poisson is not None, poisson, S.label + "'")


def commutator_bracket(S: StarProduct) -> LieDeformation:
    """(2L)^{-1}(u*v - v*u) as a Lie deformation of the first-order bracket."""
    if S.order < 1:
        raise ValueError("need at least first order to form the commutator bracket")
    names = S.names
    # L^r coefficient of the commutator, then divide by 2L through the series negative part
    comm = [S.cochains[r] - swap(S.cochains[r]) for r in range(S.order + 1)]
    if not comm[0].is_zero():
        raise ValueError("order-zero commutator does not vanish; (2L)^{-1} cannot cancel")
    if comm[1].is_zero():
        raise ValueError("C_1 is symmetric: the commutator has no first-order bracket")
    B = [c.scale(Fraction(1, 2)) for c in comm[1:]]
    base_op = B[0]
    d = len(names)
    matrix = [[Poly(names) for _ in range(d)] for _ in range(d)]
    for sig, c in base_op.terms.items():
        a, b = sig
        if key_degree(a) != 1 or key_degree(b) != 1:
            raise ValueError("first-order commutator is not a bivector field")
        i = unpack(a, d).index(1)
        j = unpack(b, d).index(1)
        matrix[i][j] = c
    base = S.poisson if S.poisson is not None and S.poisson.operator() == base_op else PoissonStructure(names, matrix)
    return LieDeformation(names, S.order - 1, B[1:], base)


def closedness_normal_form(K: PolyDiffOp) -> PolyDiffOp:
    """Move all derivatives off the first slot by formal integration by parts.

    c d^a u d^b v  ~  u (-1)^{|a|} d^a(c d^b v), expanded by Leibniz.
    """
    if K.arity != 2:
        raise ValueError("normal form is defined for bidifferential operators")
    dim = K.dim
    acc: dict = {}
    for (a, b), c in K.terms.items():
        sign = -1 if key_degree(a) % 2 else 1
        for mult, (a0, a1) in split_key(a, 2, dim):
            dc = c.diff_key(a0)
            if dc.is_zero():
                continue
            sig = (0, a1 + b)
            t = dc.scale(mult * sign)
            acc[sig] = acc[sig] + t if sig in acc else t
    return PolyDiffOp(K.names, 2, acc)


def closedness_defect(S: StarProduct, r: int) -> PolyDiffOp:
    """Adjoint normal form of the order-r commutator cochain; zero certifies the trace identity."""
    if r > S.order:
        raise ValueError(f"order {r} exceeds the star-product order {S.order}")
    K = S.cochains[r] - swap(S.cochains[r])
    return closedness_normal_form(K)
