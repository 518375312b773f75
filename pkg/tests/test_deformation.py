from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dquant.algebra_core import Poly, pack
from dquant.deformation import (
    EquivalenceTransform,
    LieDeformation,
    StarProduct,
    apply_equivalence,
    associativity_defect,
    closedness_defect,
    jacobi_defect,
    obstruction_cocycle_check,
    star_apply,
    swap,
)
from dquant.moyal import FlatSymplectic, moyal_bracket_deformation, moyal_product
from dquant.polydiff import PolyDiffOp

from conftest import polys

FS = FlatSymplectic(1)
NAMES = FS.names


def _mult():
    return PolyDiffOp.multiplication(NAMES)


def test_unit_and_zero():
    S = moyal_product(FS, 4)
    q, p = FS.q(), FS.p()
    one = Poly.const(NAMES, 1)
    u = q * q * p + p
    assert star_apply(S, one, u).coeffs == [u] + [Poly(NAMES)] * 4
    assert star_apply(S, u, Poly(NAMES)).is_zero()


def test_star_product_validation():
    P = FS.poisson()
    with pytest.raises(ValueError):
        StarProduct(NAMES, 1, [P.operator(), P.operator()])
    with pytest.raises(ValueError):
        StarProduct(NAMES, 1, [_mult(), P.operator().scale(3)], True, P)


def test_truncated_bracket_is_not_associative():
    P = FS.poisson().operator()
    S = StarProduct(NAMES, 2, [_mult(), P, PolyDiffOp.zero(NAMES, 2)])
    assert associativity_defect(S, 0).is_zero()
    assert associativity_defect(S, 1).is_zero()
    assert not associativity_defect(S, 2).is_zero()


def test_jacobi_defect_moyal_bracket():
    L = moyal_bracket_deformation(FS, 5)
    assert all(jacobi_defect(L, r).is_zero() for r in range(L.order + 1))


def test_jacobi_defect_detects_non_cocycle():
    # B_1 = d_q^2 (x) d_p - swap: antisymmetric but not a Chevalley cocycle
    # (biderivations are always cocycles in two dimensions, so use a second-order slot)
    a = PolyDiffOp(NAMES, 2, {(pack([2, 0]), pack([0, 1])): Poly.const(NAMES, 1)})
    B1 = a - swap(a)
    L = LieDeformation(NAMES, 1, [B1], FS.poisson())
    assert not jacobi_defect(L, 1).is_zero()


@pytest.mark.parametrize("t", [1, 2, 3])
def test_obstruction_is_cocycle(t):
    S = moyal_product(FS, 4).truncated(t)
    assert obstruction_cocycle_check(S, t).is_cocycle


def test_obstruction_refuses_non_associative():
    P = FS.poisson().operator()
    S = StarProduct(NAMES, 2, [_mult(), P, PolyDiffOp.zero(NAMES, 2)])
    with pytest.raises(ValueError):
        obstruction_cocycle_check(S, 2)


def test_identity_equivalence():
    S = moyal_product(FS, 3)
    assert apply_equivalence(EquivalenceTransform.identity(NAMES, 3), S).cochains == S.cochains


@given(st.integers(-3, 3), st.integers(-3, 3))
def test_equivalent_product_stays_associative(a, b):
    # T = 1 + L (a d_q^2 + b d_q d_p) is invertible; its conjugate of Moyal must stay associative
    T1 = PolyDiffOp(NAMES, 1, {(pack([2, 0]),): Poly.const(NAMES, a), (pack([1, 1]),): Poly.const(NAMES, b)})
    T = EquivalenceTransform(NAMES, 3, [T1, PolyDiffOp.zero(NAMES, 1), PolyDiffOp.zero(NAMES, 1)])
    S2 = apply_equivalence(T, moyal_product(FS, 3))
    assert all(associativity_defect(S2, r).is_zero() for r in range(4))


def test_moyal_strongly_closed():
    S = moyal_product(FlatSymplectic(2), 5)
    assert all(closedness_defect(S, r).is_zero() for r in range(6))


def test_closedness_detects_non_trace():
    q = FS.q()
    P = FS.poisson().operator()
    extra = PolyDiffOp(NAMES, 2, {(pack([1, 0]), 0): q})
    S = StarProduct(NAMES, 1, [_mult(), P + extra])
    assert not closedness_defect(S, 1).is_zero()


def test_star_product_json_roundtrip():
    S = moyal_product(FlatSymplectic(2), 3)
    assert StarProduct.from_json(S.to_json()) == S
