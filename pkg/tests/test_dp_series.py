import pytest
from hypothesis import given, strategies as st

from breuil_tame.coeff_rings import CoeffRing
from breuil_tame.dp_series import (DescentElement, DPSeries, FieldDatum, descent_act, expand_by_E,
                                   fil1_membership, phi, reassemble)
from breuil_tame.errors import PrecisionExhausted

F1 = FieldDatum("F1", CoeffRing(3, 1, 1, 5))
F2 = FieldDatum("F2", CoeffRing(3, 2, 1, 4))


@st.composite
def series(draw, F=F1, terms=4):
    s = DPSeries.zero(F)
    for _ in range(terms):
        j = draw(st.integers(0, F.U - 1))
        c = draw(st.integers(1, 20))
        s = s + DPSeries.monomial(F, j, c)
    return s


@given(series(), series())
def test_phi_is_multiplicative(a, b):
    assert phi(a * b).equals(phi(a) * phi(b))


@given(series(), series(), series())
def test_product_associative(a, b, c):
    assert ((a * b) * c).equals(a * (b * c))


@given(series(F2, 3))
def test_descent_group_law(s):
    g, h = DescentElement(1, 0), DescentElement(2, 1)
    gh = g.compose(h, F2)
    assert descent_act(g, descent_act(h, s)).equals(descent_act(gh, s))


@given(series(F2, 3), series(F2, 3))
def test_descent_is_multiplicative(a, b):
    g = DescentElement(3, 1)
    assert descent_act(g, a * b).equals(descent_act(g, a) * descent_act(g, b))


@given(series())
def test_E_expansion_round_trip(s):
    assert reassemble(expand_by_E(s), s.U).equals(s)


def test_E_lies_in_fil1():
    assert fil1_membership(DPSeries.E(F1))
    assert not fil1_membership(DPSeries.constant(F1, 1))


def test_divided_powers_are_integral():
    e, p = F1.e, F1.p
    # u^{pe}/p is integral in S: it is (pe)!/p... times the divided power
    s = DPSeries.monomial(F1, p * e, p_denominator=1)
    assert not s.is_zero()
    with pytest.raises(ValueError):
        DPSeries.monomial(F1, e - 1, p_denominator=1)


def test_divide_p_runs_out():
    s = DPSeries.constant(FieldDatum("F1", CoeffRing(3, 1, 1, 1)), 3)
    with pytest.raises(PrecisionExhausted):
        s.divide_p()


def test_N_is_a_derivation():
    a = DPSeries.monomial(F1, 3) + DPSeries.constant(F1, 2)
    b = DPSeries.monomial(F1, 5, 4)
    assert (a * b).N().equals(a.N() * b + a * b.N())
