from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from nlshier.diffpoly import (
    CONJ, DerivativeSlot as D, DiffPolynomial as P, SubstitutionRule, ZERO_POLY, derive_x, euler_operator,
    from_json, is_total_derivative, parse_polynomial, partial_wrt, substitute, to_json, to_pretty, to_text, var,
)
from nlshier.gaussian import GaussianRational as G

q, r = var("q"), var("r")
half_i_inv = 1 / G(0, 2)


def qr_poly(draw_terms):
    p = ZERO_POLY
    for coeff, powers in draw_terms:
        p = p + P.monomial(powers, coeff)
    return p


slots = st.builds(D, st.sampled_from(["q", "r"]), st.integers(0, 3))
monomials = st.dictionaries(slots, st.integers(1, 2), min_size=0, max_size=3)
coeffs = st.builds(G, st.integers(-5, 5), st.integers(-3, 3))
polys = st.lists(st.tuples(coeffs, monomials), max_size=4).map(qr_poly)


def test_additive_inverse():
    assert q * r + (-1) * (q * r) == ZERO_POLY


def test_like_terms_merge():
    p = r * half_i_inv + r * half_i_inv
    assert p == r * G(0, -1)


def test_disjoint_keys():
    p = var("q", 1) * r + q * var("r", 1)
    assert len(p) == 2


def test_products():
    assert (q * r).terms == {((D("q"), 1), (D("r"), 1)): G(1)}
    assert (r * half_i_inv) * (r * half_i_inv) == r ** 2 * half_i_inv ** 2
    assert ZERO_POLY * (q + r) == ZERO_POLY


def test_derive_x_examples():
    assert derive_x(q * r) == var("q", 1) * r + q * var("r", 1)
    assert derive_x(q ** 2) == 2 * q * var("q", 1)
    assert derive_x(-r * half_i_inv) == -var("r", 1) * half_i_inv
    assert derive_x(q, times=3) == var("q", 3)


def test_partial_examples():
    assert partial_wrt(q ** 2 * r ** 2, ("r", 0)) == 2 * q ** 2 * r
    assert partial_wrt(q * var("r", 2), ("r", 2)) == q
    assert partial_wrt(var("q", 1) * var("r", 1), ("q", 0)) == ZERO_POLY


def test_substitution_examples():
    nls = -var("q", 2) + 2 * q ** 2 * r
    assert substitute(nls, CONJ) == -var("u", 2) + 2 * var("u") ** 2 * var("ubar")
    assert substitute(var("r", 1), SubstitutionRule("q")) == var("q", 1)
    assert substitute(q * r ** 2, SubstitutionRule("constant", -1)) == q
    assert substitute(q * r, SubstitutionRule.parse("1")) == q
    assert substitute(q * var("r", 1), SubstitutionRule.parse("-1")) == ZERO_POLY


def test_total_derivative_examples():
    assert is_total_derivative(var("q", 1) * r + q * var("r", 1))
    assert not is_total_derivative(q * r)
    assert is_total_derivative(-q * var("r", 2) - var("q", 1) * var("r", 1))
    assert not is_total_derivative(P.constant(1))
    assert is_total_derivative(ZERO_POLY)


def test_text_forms():
    p = parse_polynomial("-q_xxxx + 8 q q_xx r - 6 q^3 r^2")
    assert p.coefficient({D("q", 1): 3, D("r"): 2}) == 0
    assert p.coefficient({D("q"): 3, D("r"): 2}) == -6
    assert parse_polynomial(to_text(p)) == p
    assert parse_polynomial(to_pretty(p)) == p
    assert to_pretty(-var("q", 2) + 2 * q ** 2 * r) == "-q_xx + 2 q^2 r"
    assert parse_polynomial("(1/2 - i) * q_x * r") == var("q", 1) * r * G(Fraction(1, 2), -1)


def test_conjugate_swaps_alphabet():
    p = var("u", 2) * var("ubar") * G(0, 3)
    assert p.conjugate() == var("ubar", 2) * var("u") * G(0, -3)


def test_invalid_slot():
    with pytest.raises(ValueError):
        var("w")


@given(polys, polys, polys)
def test_ring_axioms(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c


@given(polys, polys)
def test_derive_x_is_derivation(a, b):
    assert derive_x(a * b) == derive_x(a) * b + a * derive_x(b)


@given(polys)
def test_euler_kills_derivatives(p):
    d = derive_x(p)
    assert euler_operator(d, "q") == ZERO_POLY
    assert euler_operator(d, "r") == ZERO_POLY
    assert is_total_derivative(d)


@given(polys)
def test_substitution_commutes_with_derivative(p):
    assert substitute(derive_x(p), CONJ) == derive_x(substitute(p, CONJ))


@given(polys)
def test_canonical_idempotence(p):
    assert P(p.terms) == p
    assert from_json(to_json(p)) == p
    assert parse_polynomial(to_text(p)) == p
