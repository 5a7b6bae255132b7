import pytest
from fractions import Fraction

from breuil_tame.coeff_rings import CoeffRing
from breuil_tame.errors import BadValuation, ScalarType
from breuil_tame.filtered_modules import (TameType, build_D_character, build_D_principal,
                                          build_D_supercuspidal, check_weak_admissibility, galois_type,
                                          relabel_supercuspidal)

R = CoeffRing(5, 2, 2, 6)


def el(n):
    return R.from_int(n)


@pytest.mark.parametrize("x1,x2", [(el(2), el(5)), (el(10), el(3)), (R.gen("pi"), R.gen("pi") * 3)])
@pytest.mark.parametrize("over", ["F1", "F2"])
def test_principal_admissible(x1, x2, over):
    D = build_D_principal(x1, x2, 0, 2, over)
    out = check_weak_admissibility(D)
    assert out["admissible"]
    full = out["witnesses"][-1]
    assert full["t_H"] == full["t_N"] == "1"
    assert galois_type(D) == TameType.principal(0, 2, 5)


@pytest.mark.parametrize("vals", [(0, 0), (Fraction(1, 2), 1), (1, 1), (2, -1)])
def test_principal_mutants_fail(vals):
    D = build_D_principal(el(2), el(5), 0, 1).with_valuations(vals)
    assert not check_weak_admissibility(D)["admissible"]


def test_supercuspidal_admissible_and_relabelled():
    D = build_D_supercuspidal(7, el(1), el(2), el(5))
    assert check_weak_admissibility(D)["admissible"]
    D2 = relabel_supercuspidal(D, el(1))
    assert galois_type(D2) == galois_type(D) == TameType.supercuspidal(7, 5)
    assert not check_weak_admissibility(D.with_valuations([2]))["admissible"]


def test_character_module():
    D = build_D_character(1, 2, el(3), 5)
    assert check_weak_admissibility(D)["admissible"]


def test_rejections():
    with pytest.raises(ScalarType):
        build_D_principal(el(2), el(5), 1, 1)
    with pytest.raises(ScalarType):
        TameType.supercuspidal(6, 5)
    with pytest.raises(BadValuation):
        build_D_principal(el(2), el(3), 0, 1)


def test_type_keys():
    assert TameType.principal(0, 2, 5) == TameType.principal(2, 0, 5)
    assert TameType.supercuspidal(7, 5) == TameType.supercuspidal(11, 5)
