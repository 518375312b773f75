from fractions import Fraction
from math import comb

import pytest
from hypothesis import given, strategies as st

from dquant.algebra_core import LambdaSeries, Poly, Scalar, substitute_hbar
from dquant.moyal import FlatSymplectic, moyal_star
from dquant.star_exp import (
    QuadHamiltonian,
    RadialFunction,
    angular_casimir,
    angular_casimir_expected,
    exp_matches_closed_form,
    harmonic_spectrum,
    laguerre,
    quadratic_closed_form,
    radial_star_H,
    radial_to_poly,
    spectrum_formula,
    star_eigen_defect,
    star_exponential,
    star_power,
)

HARM = QuadHamiltonian(Fraction(1, 2), 0, Fraction(1, 2))


def test_star_power_small():
    fs = HARM.fs
    H = HARM.poly()
    assert star_power(fs, H, 0, 3).coeff(0) == Poly.const(fs.names, 1)
    assert star_power(fs, H, 1, 3).coeff(0) == H
    h2 = star_power(fs, H, 2, 3)
    assert h2.coeff(0) == H * H and h2.coeff(2) == Poly.const(fs.names, 1)


def test_star_exponential_low_terms():
    fs = HARM.fs
    H = HARM.poly()
    ts = star_exponential(fs, H, 2)
    assert ts.coeffs[0].coeff(0) == Poly.const(fs.names, 1)
    assert ts.coeffs[1].coeff(-1) == H.scale(Scalar(0, -1))
    t2 = ts.coeffs[2]
    assert t2.coeff(-2) == (H * H).scale(Fraction(-1, 2))
    assert t2.coeff(0) == Poly.const(fs.names, Fraction(1, 8))


def test_closed_form_harmonic_t2():
    cf = quadratic_closed_form(HARM, 2)
    H = HARM.poly()
    assert cf.coeffs[2].coeff(-2) == (H * H).scale(Fraction(-1, 2))
    assert cf.coeffs[2].coeff(0) == Poly.const(HARM.fs.names, Fraction(1, 8))


@pytest.mark.parametrize("abg", [(1, 0, 0), (1, 0, -1), (Fraction(1, 2), 0, Fraction(1, 2)), (1, 1, 1), (1, 2, 1), (1, 3, 1)])
def test_closed_form_branches(abg):
    Hq = QuadHamiltonian(*abg)
    assert exp_matches_closed_form(Hq, 6).ok


def test_frequency_needs_quarter_beta_squared():
    # with beta != 0 the naive alpha*gamma - beta^2 frequency fails to match
    Hq = QuadHamiltonian(1, 1, 1)
    naive = Hq.alpha * Hq.gamma - Hq.beta ** 2
    assert not exp_matches_closed_form(Hq, 4, d=naive).ok
    assert exp_matches_closed_form(Hq, 4).ok


def test_two_dof_closed_form():
    assert exp_matches_closed_form(QuadHamiltonian(Fraction(1, 2), 0, Fraction(1, 2), dof=2), 4).ok


@given(st.lists(st.integers(-3, 3), min_size=1, max_size=4), st.integers(1, 3))
def test_radial_reduction_against_moyal(gs, dof):
    """H*f(H) from the ODE shortcut equals the Moyal product for polynomial f."""
    Hq = QuadHamiltonian(Fraction(1, 2), 0, Fraction(1, 2), dof)
    fs = Hq.fs
    H = Hq.poly()
    f = RadialFunction(Fraction(0), tuple(Scalar(g) for g in gs), len(gs) - 1)
    lhs = radial_to_poly(radial_star_H(f, dof), Hq, len(gs) + 2)
    # direct: sum_k g_k hbar^{hpow-k} (H * H^k)
    acc = LambdaSeries(fs.names, len(gs) + 2, var="h")
    for k, g in enumerate(gs):
        hk = substitute_hbar(moyal_star(fs, H, H ** k, len(gs) + 4))
        acc = acc + hk.shift(f.hpow - k).scale(g)
    assert lhs.agrees_with(acc, len(gs) + 1)


def test_eigen_defect_examples():
    g0 = RadialFunction(Fraction(-2), (Scalar(2),))
    assert star_eigen_defect(HARM, g0, Fraction(1, 2)).is_zero()
    pi1 = RadialFunction(Fraction(-2), (Scalar(-1), Scalar(4)))
    assert star_eigen_defect(HARM, pi1, Fraction(3, 2)).is_zero()
    off = star_eigen_defect(HARM, g0, Fraction(3, 2))
    assert off == RadialFunction(Fraction(-2), (Scalar(-2),), 1)


@given(st.integers(-4, 4), st.integers(-4, 4), st.integers(0, 3))
def test_eigen_defect_affine_in_energy(a, b, n):
    f = RadialFunction(Fraction(-2), tuple(Scalar(x) for x in laguerre(n)))
    d1 = star_eigen_defect(HARM, f, Fraction(a))
    d2 = star_eigen_defect(HARM, f, Fraction(b))
    shift = RadialFunction(f.s, tuple(c * (b - a) for c in f.g), 1)
    assert d1 - d2 == shift


@pytest.mark.parametrize("dof", [1, 2, 3])
def test_spectrum(dof):
    spec = harmonic_spectrum(dof, 3)
    assert spec.eigenvalues == spectrum_formula(dof, 3)
    for lv in spec.levels:
        assert lv.certified
        # the level projector's trace is the degeneracy of the level
        assert lv.trace == Scalar(comb(lv.n + dof - 1, dof - 1))
        assert lv.laguerre_ratio == Scalar((-1) ** lv.n * 2 ** dof)


def test_spectrum_text():
    assert str(harmonic_spectrum(1, 2)) == "1/2*h, 3/2*h, 5/2*h"
    assert harmonic_spectrum(3, 0).eigenvalues == [Fraction(3, 2)]


def test_angular_casimir():
    assert angular_casimir(2).agrees_with(angular_casimir_expected(2), 4)
    assert angular_casimir(3).agrees_with(angular_casimir_expected(3), 4)
