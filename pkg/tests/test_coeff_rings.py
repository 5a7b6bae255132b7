import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, strategies as st

from breuil_tame.coeff_rings import (CoeffRing, FiniteCoeffAlgebra, FiniteField, exact_divide_p,
                                     teichmuller_lift, vp)
from breuil_tame.errors import NoRootInE, PrecisionExhausted, UnsupportedMap

RINGS = {(p, n, eE): CoeffRing(p, n, eE, 5) for p in (3, 5) for n in (1, 2) for eE in (1, 2)}


def elements(ring):
    return st.lists(st.integers(0, ring.p ** ring.level - 1), min_size=ring.dim, max_size=ring.dim).map(
        ring.element)


@st.composite
def ring_and_elems(draw, k=3):
    key = draw(st.sampled_from(sorted(RINGS)))
    R = RINGS[key]
    return R, [draw(elements(R)) for _ in range(k)]


@given(ring_and_elems())
def test_ring_axioms(data):
    R, (a, b, c) = data
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a
    assert a - a == R.zero()


@given(ring_and_elems(1))
def test_unit_inverse(data):
    R, (a,) = data
    if a.is_unit():
        assert a * a.inverse() == R.one()


def test_uniformizer_relation():
    R = CoeffRing(5, 2, 2, 6)
    pi = R.gen("pi")
    assert pi * pi == R.from_int(-5)
    assert pi.valuation() == Fraction(1, 2)


def test_valuation_of_p_power():
    R = CoeffRing(3, 1, 1, 6)
    assert R.from_int(18).valuation() == 2
    assert R.zero().valuation() is None


def test_teichmuller_is_root_of_unity():
    R = CoeffRing(5, 2, 1, 6)
    for x in (1, 2, R.kE.generator):
        z = teichmuller_lift(x, R)
        assert z ** (R.kE.q - 1) == R.one()
        assert z.residue() == x


def test_frobenius_on_t():
    R = CoeffRing(3, 2, 1, 5)
    t = R.gen("t")
    assert t.frobenius().frobenius() == t
    assert t.frobenius() != t


def test_sqrt_and_missing_root():
    R = CoeffRing(5, 1, 1, 6)
    assert R.from_int(4).sqrt() ** 2 == R.from_int(4)
    with pytest.raises(NoRootInE):
        R.from_int(2).sqrt()
    with pytest.raises(NoRootInE):
        R.from_int(5).sqrt()


def test_exact_division_loses_a_digit():
    R = CoeffRing(3, 1, 1, 4)
    x = exact_divide_p(R.from_int(6))
    assert x.level == 3 and x == R.from_int(2, 3)
    with pytest.raises(PrecisionExhausted):
        exact_divide_p(R.from_int(3, 1))


def test_family_relation_X1X2():
    R = CoeffRing(3, 2, 1, 4, "X1X2", w=(2,))
    assert R.gen("X1") * R.gen("X2") == R.from_int(6)


def test_bad_generator():
    with pytest.raises(UnsupportedMap):
        CoeffRing(3, 1, 1, 4).gen("Y")


def test_vp():
    assert vp(250, 5) == 3


@given(st.sampled_from([3, 5, 7]), st.integers(1, 2), st.data())
def test_finite_field_inverse(p, n, data):
    k = FiniteField(p, n)
    x = data.draw(st.sampled_from(list(k.units())))
    assert k.mul(x, k.inv(x)) == 1


@given(st.sampled_from([(3, 1), (3, 2), (5, 2)]), st.integers(0, 2), st.data())
def test_square_zero_algebra(pn, nvars, data):
    A = FiniteCoeffAlgebra(FiniteField(*pn), nvars)
    vec = st.lists(st.integers(0, pn[0] - 1), min_size=A.dim, max_size=A.dim).map(np.array)
    a, b, c = (data.draw(vec) for _ in range(3))
    assert np.array_equal(A.mul(A.mul(a, b), c), A.mul(a, A.mul(b, c)))
    assert np.array_equal(A.mul(a, b), A.mul(b, a))
    mask = A.nilpotent_mask()
    if nvars:
        x = np.where(mask, a, 0)
        assert not A.mul(x, x).any()
