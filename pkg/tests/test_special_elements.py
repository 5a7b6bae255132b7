import pytest
from hypothesis import given, strategies as st

from breuil_tame.coeff_rings import CoeffRing
from breuil_tame.dp_series import FieldDatum
from breuil_tame.errors import InadmissibleParameters, NoRootInE
from breuil_tame.special_elements import (denominator_bound_holds, solve, solve_U, solve_V, solve_W,
                                          solve_X, w_constant_term, x_constant_term)


def f1(p, level=5, eE=1):
    return FieldDatum("F1", CoeffRing(p, 1, eE, level))


def f2(p, level=5, eE=1):
    return FieldDatum("F2", CoeffRing(p, 2, eE, level))


def test_V_frozen_coefficients():
    # p = 3, j = 2, x = w = 1: divided-power coordinates r_6 = 6, r_9 = 0, r_12 = 240
    F = f1(3, 6)
    V = solve_V(1, 1, 2, F).series
    assert V.coefficient(0).to_str() == "1"
    assert V.coefficient(6) == F.ring.from_int(6)
    assert V.coefficient(9).is_zero()
    assert V.coefficient(12) == F.ring.from_int(240)


@given(st.sampled_from([3, 5, 7]), st.integers(1, 6), st.integers(1, 6), st.data())
def test_V_and_U_residuals(p, x, w, data):
    x, w = x % p or 1, w % p or 1
    j = data.draw(st.integers(1, p - 2))
    F = f1(p)
    for solver in (solve_V, solve_U):
        try:
            el = solver(x, w, j, F)
        except InadmissibleParameters:
            assert j in (1, p - 2) and (x * x - w) % p == 0
            continue
        assert el.residual().is_zero()
        assert denominator_bound_holds(el)


def test_boundary_case_rejected():
    with pytest.raises(InadmissibleParameters):
        solve_V(2, 4, 1, f1(5))


def test_U_range():
    with pytest.raises(InadmissibleParameters):
        solve_U(1, 2, 4, f1(5))


@given(st.sampled_from([3, 5]), st.integers(1, 4), st.integers(1, 4), st.sampled_from(["+", "-"]))
def test_W_constant_root(p, b, w, branch):
    R = CoeffRing(p, 2, 1, 5)
    b, w = R.from_int(b % p or 1), R.from_int(w % p or 1)
    try:
        z = w_constant_term(b, w, branch)
    except NoRootInE:
        return
    assert (b * b * z * z - z - w).is_zero()


def test_W_branches_differ():
    F = f2(5)
    plus = solve_W(1, 2, 5, F, "+")
    minus = solve_W(1, 2, 5, F, "-")
    assert plus.residual().is_zero() and minus.residual().is_zero()
    assert not plus.series.equals(minus.series)


def test_W_needs_square():
    # 1 + 4 w b^2 = 5: a root only exists after a ramified extension
    with pytest.raises(NoRootInE):
        solve_W(1, 1, 5, f2(5))
    W = solve_W(1, 1, 5, f2(5, eE=2))
    assert W.residual().is_zero()


@given(st.sampled_from([3, 5]), st.sampled_from(["+", "-"]), st.integers(1, 4))
def test_X_residual(p, branch, w):
    F = f2(p)
    w = w % p or 1
    try:
        X = solve_X(p, w, F, branch)
    except NoRootInE:
        assert F.ring.kE.sqrt(w) is None
        return
    assert X.residual().is_zero()
    x0 = x_constant_term(F.ring.from_int(p), F.ring.from_int(w), branch)
    assert (x0 * x0 - F.ring.from_int(w)).residue() == 0


def test_X_needs_nonunit_b():
    with pytest.raises(InadmissibleParameters):
        solve_X(1, 1, f2(3))


def test_dispatch_rejects_unknown_kind():
    with pytest.raises(ValueError):
        solve("Z", f1(3), {})
