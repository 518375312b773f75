import pytest
from hypothesis import given, strategies as st

from dquant.algebra_core import Poly, pack
from dquant.polydiff import (
    PoissonStructure,
    PolyDiffOp,
    PolyVector,
    apply_op,
    chevalley_coboundary,
    gerstenhaber_bracket,
    gerstenhaber_compose,
    hkr_inject,
    hochschild_coboundary,
    hochschild_delta,
    insert,
    jacobi_check,
    permute_slots,
    schouten_bracket,
)

from conftest import polys

N2 = ("x1", "x2")
N3 = ("x1", "x2", "x3")


@st.composite
def cochains(draw, names, arity, max_order=2, max_terms=3):
    d = len(names)
    terms = {}
    for _ in range(draw(st.integers(1, max_terms))):
        sig = []
        for _ in range(arity):
            e = draw(st.lists(st.integers(0, max_order), min_size=d, max_size=d))
            sig.append(pack(e))
        terms[tuple(sig)] = draw(polys(names, max_deg=2, max_terms=2))
    return PolyDiffOp(names, arity, terms)


def test_identity_insertion_counts_slots():
    D = PolyDiffOp.multiplication(N2, 3)
    I = PolyDiffOp.identity(N2)
    assert gerstenhaber_compose(D, I) == D.scale(3)


def test_insert_matches_evaluation():
    x1, x2 = (Poly.var(N2, i) for i in range(2))
    D1 = PolyDiffOp(N2, 2, {(pack([1, 0]), pack([0, 1])): x1})
    D2 = PolyDiffOp(N2, 2, {(pack([0, 1]), 0): x2})
    E = insert(D1, 0, D2)
    u, v, w = x1 * x2, x1 * x1 + x2, x2 * x2 * x1
    assert apply_op(E, [u, v, w]) == apply_op(D1, [apply_op(D2, [u, v]), w])


def test_permute_slots_semantics():
    x1, x2 = (Poly.var(N2, i) for i in range(2))
    D = PolyDiffOp(N2, 2, {(pack([1, 0]), 0): Poly.const(N2, 1)})
    S = permute_slots(D, (1, 0))
    assert apply_op(S, [x1, x2]) == apply_op(D, [x2, x1])


@given(cochains(N2, 1))
def test_b_squared_arity1(C):
    assert hochschild_coboundary(hochschild_coboundary(C)).is_zero()


@given(cochains(N2, 2, max_order=1))
def test_b_squared_arity2(C):
    assert hochschild_coboundary(hochschild_coboundary(C)).is_zero()


@given(cochains(N2, 2, max_order=1))
def test_delta_matches_coboundary_sign(C):
    assert hochschild_delta(C) == hochschild_coboundary(C).scale(-1)


@given(cochains(N2, 2, max_order=1, max_terms=2), cochains(N2, 1, max_terms=2))
def test_gerstenhaber_graded_antisymmetry(A, B):
    k1, k2 = A.arity - 1, B.arity - 1
    sign = -((-1) ** (k1 * k2))
    assert gerstenhaber_bracket(A, B) == gerstenhaber_bracket(B, A).scale(sign)


def test_pointwise_product_is_a_cocycle():
    m = PolyDiffOp.multiplication(N2)
    assert hochschild_coboundary(m).is_zero()
    assert gerstenhaber_bracket(m, m).is_zero()


@given(polys(N2, max_deg=3), polys(N2, max_deg=3))
def test_hkr_of_vector_field_is_derivation(a, b):
    xi = PolyVector.vector(N2, [a, b])
    D = hkr_inject(xi)
    assert hochschild_coboundary(D).is_zero()


def test_hkr_bivector_is_antisymmetric_cocycle(so3):
    D = hkr_inject(so3.bivector)
    assert hochschild_coboundary(D).is_zero()
    assert permute_slots(D, (1, 0)) == -D


def test_jacobi_so3(so3):
    assert jacobi_check(so3.bivector).ok


def test_jacobi_detects_failure():
    x = [Poly.var(N3, i) for i in range(3)]
    z = Poly(N3)
    one = Poly.const(N3, 1)
    # {x1,x2} = 1, {x2,x3} = x2: the Jacobiator on (x1,x2,x3) is 1
    bad = [[z, one, z], [-one, z, x[1]], [z, -x[1], z]]
    assert not jacobi_check(bad).ok
    with pytest.raises(ValueError):
        PoissonStructure(N3, bad)


@given(polys(N2, max_deg=3))
def test_every_planar_bivector_is_poisson(a):
    z = Poly(N2)
    assert jacobi_check([[z, a], [-a, z]]).ok


@given(polys(N3, max_deg=2), polys(N3, max_deg=2))
def test_schouten_of_vector_fields_is_lie_bracket(a, b):
    X = PolyVector.vector(N3, [a, b, Poly(N3)])
    Y = PolyVector.vector(N3, [b, Poly(N3), a])
    Z = schouten_bracket(X, Y)
    f = Poly.var(N3, 0) * Poly.var(N3, 1) + Poly.var(N3, 2) ** 2

    def act(V, g):
        return sum((V.component((i,)) * g.diff(i) for i in range(3)), Poly(N3))

    assert act(Z, f) == act(X, act(Y, f)) - act(Y, act(X, f))


def test_schouten_graded_symmetry(so3):
    P = so3.bivector
    X = PolyVector.vector(N3, [Poly.var(N3, 1), Poly(N3), Poly.var(N3, 0) ** 2])
    # [X, P] = -(-1)^{(1-1)(2-1)} [P, X]
    assert schouten_bracket(X, P) == -schouten_bracket(P, X)


def test_chevalley_squares_to_zero(so3):
    x = [Poly.var(N3, i) for i in range(3)]
    B = PolyDiffOp(N3, 1, {(pack([1, 0, 0]),): x[1] * x[2], (pack([0, 2, 0]),): x[0]})
    assert chevalley_coboundary(chevalley_coboundary(B, so3), so3).is_zero()


def test_operator_records_roundtrip(so3):
    D = hkr_inject(so3.bivector)
    assert PolyDiffOp.from_records(D.to_records()) == D
