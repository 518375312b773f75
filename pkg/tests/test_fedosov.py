from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dquant.algebra_core import Poly
from dquant.deformation import associativity_defect
from dquant.fedosov import (
    FedosovError,
    InsufficientDegree,
    SymplecticData,
    WeylSection,
    ad_over_2lambda,
    connection_form,
    curvature,
    delta,
    delta_inv,
    delta_ops,
    delta_star,
    exterior_d,
    fedosov_product,
    fedosov_star,
    fiber_compose,
    graded_commutator,
    hodge_decompose,
    horizontal_lift,
    lift_operator,
    nabla_hat,
    omega_form,
    solve_r,
    theta_form,
)
from dquant.moyal import FlatSymplectic, moyal_product, moyal_star

FLAT = SymplecticData.flat(1)
Q, P = Poly.var(FLAT.names, 0), Poly.var(FLAT.names, 1)


def curved():
    """R^2 with omega = dq^dp and the symplectic connection Gamma^p_{qq} = p."""
    z = Poly(FLAT.names)
    G = [[[z, z], [z, z]], [[P, z], [z, z]]]
    return SymplecticData(FLAT.names, [[0, 1], [-1, 0]], G)


@st.composite
def sections(draw, sd, dmax=12, max_terms=4):
    n = sd.dim
    terms = {}
    for _ in range(draw(st.integers(1, max_terms))):
        k = draw(st.integers(0, 1))
        al = tuple(draw(st.lists(st.integers(0, 2), min_size=n, max_size=n)))
        m = draw(st.integers(0, (1 << n) - 1))
        c = Poly.from_terms(sd.names, {tuple(draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))): draw(st.integers(-3, 3))})
        terms[(k, al, m, ())] = c
    return WeylSection(sd, dmax, 0, terms)


def test_delta_examples():
    y1 = WeylSection.y(FLAT, 4, 0)
    assert delta(y1) == WeylSection.dx(FLAT, 4, 0)
    assert delta_star(WeylSection.dx(FLAT, 4, 0)) == y1
    a = fiber_compose(y1, WeylSection.dx(FLAT, 4, 1))
    assert (delta(delta_star(a)) + delta_star(delta(a))) == a.scale(2)
    with pytest.raises(ValueError):
        delta_ops("nabla", a)


@given(sections(SymplecticData.flat(2)))
def test_delta_squares_and_hodge(a):
    assert delta(delta(a)).is_zero()
    assert delta_star(delta_star(a)).is_zero()
    ex, co, a00 = hodge_decompose(a)
    assert ex + co + a00 == a


@given(sections(FLAT))
def test_homotopy_identity(a):
    lhs = delta(delta_star(a)) + delta_star(delta(a))
    rhs = {}
    for key, c in a.terms.items():
        pq = sum(key[1]) + bin(key[2]).count("1")
        rhs[key] = c.scale(pq)
    assert lhs == WeylSection(FLAT, a.dmax, 0, rhs)


def test_fiber_product_basics():
    y1, y2 = WeylSection.y(FLAT, 4, 0), WeylSection.y(FLAT, 4, 1)
    comm = fiber_compose(y1, y2) - fiber_compose(y2, y1)
    assert comm == WeylSection(FLAT, 4, 0, {(1, (0, 0), 0, ()): Poly.const(FLAT.names, 2)})
    one = WeylSection.scalar(FLAT, 4, Poly.const(FLAT.names, 1))
    a = fiber_compose(y1, WeylSection.dx(FLAT, 4, 1))
    assert fiber_compose(a, one) == a and fiber_compose(one, a) == a
    # odd forms: (y1 dx1) o (y2 dx2) + (y2 dx2) o (y1 dx1) is the graded commutator
    A = fiber_compose(y1, WeylSection.dx(FLAT, 4, 0))
    B = fiber_compose(y2, WeylSection.dx(FLAT, 4, 1))
    assert graded_commutator(A, B) == fiber_compose(A, B) + fiber_compose(B, A)


@given(sections(FLAT, 4, 2), sections(FLAT, 4, 2), sections(FLAT, 4, 2))
def test_fiber_product_associative(a, b, c):
    assert fiber_compose(fiber_compose(a, b), c) == fiber_compose(a, fiber_compose(b, c))


@given(sections(FLAT, 5, 3))
def test_connection_identities(a):
    sd = curved()
    a = WeylSection(sd, 5, 0, a.terms)
    G = connection_form(sd, 7)
    assert nabla_hat(a) == (exterior_d(a) - ad_over_2lambda(G, a)).upto(5)
    R = curvature(sd, 7)
    assert nabla_hat(nabla_hat(a)).upto(5) == (-ad_over_2lambda(R, a)).upto(5)
    th = theta_form(sd, 7)
    assert (-ad_over_2lambda(th, a)).upto(5) == (-delta(a)).upto(5)


def test_flat_r_vanishes():
    assert solve_r(FLAT, 6).r.is_zero()
    assert solve_r(SymplecticData.flat(2), 6).r.is_zero()


def test_curved_r():
    fc = solve_r(curved(), 8)
    r = fc.r
    assert not r.degree_part(3).is_zero()
    assert r.min_degree() == 3
    assert delta_inv(r).is_zero()
    assert fc.residual().is_zero()
    assert fc.weyl_curvature() == omega_form(fc.sd, 7, -1)


def test_lift_examples():
    fc = solve_r(FLAT, 6)
    y1 = WeylSection.y(FLAT, 6, 0)
    x = WeylSection.scalar(FLAT, 6, Q)
    assert horizontal_lift(Q, fc) == x + y1
    sq = horizontal_lift(Q * Q, fc)
    expect = WeylSection.scalar(FLAT, 6, Q * Q) + fiber_compose(y1, x).scale(2) + WeylSection(FLAT, 6, 0, {(0, (2, 0), 0, ()): Poly.const(FLAT.names, 1)})
    assert sq == expect
    one = Poly.const(FLAT.names, 1)
    assert horizontal_lift(one, fc) == WeylSection.scalar(FLAT, 6, one)


def test_star_examples():
    fc = solve_r(FLAT, 6)
    assert str(fedosov_star(Q, P, fc)) == "q*p + (1)*L"
    s = fedosov_star(Q * Q, P * P, fc)
    assert s.coeffs[:3] == [Q * Q * P * P, (Q * P).scale(4), Poly.const(FLAT.names, 2)]
    c = fedosov_star(Poly.const(FLAT.names, 3), Q * P, fc)
    assert c.coeff(0) == (Q * P).scale(3) and all(c.coeff(k).is_zero() for k in range(1, 4))


@pytest.mark.parametrize("dof", [1, 2])
def test_flat_equals_moyal(dof):
    fc = solve_r(SymplecticData.flat(dof), 8)
    assert fedosov_product(fc, 4).cochains == moyal_product(FlatSymplectic(dof), 4).cochains


def test_curved_product():
    fc = solve_r(curved(), 8)
    S = fedosov_product(fc, 4)
    assert all(associativity_defect(S, r).is_zero() for r in range(5))
    M = moyal_product(FlatSymplectic(1), 4)
    assert S.cochains[1] == M.cochains[1]
    assert S.cochains[2] != M.cochains[2]


def test_lift_is_algebra_morphism():
    fc = solve_r(curved(), 8)
    a = horizontal_lift(Q * P, fc)
    b = horizontal_lift(P * P, fc)
    ab = fiber_compose(a, b)
    D = fc.D(ab).upto(6)
    assert D.is_zero()


def test_errors():
    with pytest.raises(FedosovError):
        SymplecticData(FLAT.names, [[0, 1], [1, 0]])
    z = Poly(FLAT.names)
    with pytest.raises(FedosovError):
        SymplecticData(FLAT.names, [[0, 1], [-1, 0]], [[[z, P], [z, z]], [[z, z], [z, z]]])
    with pytest.raises(FedosovError):
        SymplecticData(FLAT.names, [[0, Q], [-Q, 0]])
    fc = solve_r(FLAT, 4)
    with pytest.raises(InsufficientDegree) as e:
        fedosov_product(fc, 3)
    assert e.value.needed == 6


def test_operator_lift_evaluates_to_lift():
    fc = solve_r(curved(), 6)
    A = lift_operator(fc)
    f = Q ** 3 * P + P * P
    assert A.evaluate(f) == horizontal_lift(f, fc)
