import numpy as np
import pytest
from hypothesis import given, strategies as st

from breuil_tame.breuil import (CharacterDescriptor, _batched_constraints, _unknown_entries,
                                brute_force_all_maps, brute_force_morphisms, character_of_rank1,
                                find_morphisms, is_morphism, maximal_model, minimal_model,
                                morphism_constraints, morphism_coordinates, reduce_T0,
                                restrict_descent, scan_rank1, span_set, standard_rank1,
                                unknown_basis)
from breuil_tame.coeff_rings import FiniteField
from breuil_tame.errors import UnsupportedMap
from breuil_tame.sdm_lattices import SdmParameters, build_sdm


@pytest.fixture(scope="module")
def case1():
    return reduce_T0(build_sdm(SdmParameters("prin_case1", 5, {"x1": 2, "x2": 5, "j": 1})))


@pytest.fixture(scope="module")
def supercusp():
    return reduce_T0(build_sdm(SdmParameters("super_general", 5, {"m": 2, "b": 1, "w": 1})))


@pytest.mark.parametrize("which,n", [("F1", 1), ("F2", 2), ("F2/Qp2", 2)])
@pytest.mark.parametrize("a", [1, 2, 3])
def test_standard_round_trip(which, n, a):
    kE = FiniteField(5, n)
    exponent = {"F1": 3, "F2": 12, "F2/Qp2": 7}[which]
    S = standard_rank1(which, a, exponent, kE)
    assert all(S.verify().values())
    chi = character_of_rank1(S)
    assert character_of_rank1(maximal_model(chi, kE, which)).describe() == chi.describe()


def test_models_are_extremal():
    kE = FiniteField(3, 1)
    chi = CharacterDescriptor.make(3, "Qp", 1, 2)
    assert maximal_model(chi, kE, "F1").is_maximal()
    assert minimal_model(chi, kE, "F1").is_minimal()


def test_reduced_lattice_is_a_breuil_module(case1, supercusp):
    for R in (case1, supercusp):
        assert all(R.verify().values())


@given(st.data())
def test_phi1_matrix_agrees_with_direct(data):
    R = data.draw(st.sampled_from(["case1", "supercusp"]))
    M = _MODULES[R]
    v = data.draw(st.lists(st.integers(0, 4), min_size=M.zero().size, max_size=M.zero().size))
    v = np.array(v, dtype=np.int64).reshape(M.zero().shape)
    v[:, :, 2 * M.base.e:] = 0
    assert np.array_equal(M.phi1(v), M.phi1_direct(v))


_MODULES = {}


@pytest.fixture(autouse=True, scope="module")
def _register(case1, supercusp):
    _MODULES.update(case1=case1, supercusp=supercusp)


def test_batched_constraints_match_single(case1):
    kE = FiniteField(5, 1)
    N = standard_rank1("F1", 3, 1, kE)
    entries = _unknown_entries(case1, N)
    C = _batched_constraints(case1, N, entries)
    single = np.stack([morphism_constraints(case1, N, en) for en in entries], axis=1)
    assert np.array_equal(C, single)


def test_find_morphisms_matches_brute_force():
    kE = FiniteField(3, 1)
    M = reduce_T0(build_sdm(SdmParameters("prin_case1", 3, {"x1": 1, "x2": 6, "j": 1})))
    for a in (1, 2):
        for j in (0, 1):
            N = standard_rank1("F1", a, j, kE)
            ms = find_morphisms(M, N)
            assert all(is_morphism(M, N, f.matrix) for f in ms)
            d = len(unknown_basis(M, N))
            assert span_set(morphism_coordinates(M, N, ms), 3, d) == {tuple(r) for r in brute_force_morphisms(M, N)}


def test_descent_is_automatic_for_endomorphisms():
    S = standard_rank1("F1", 2, 0, FiniteField(3, 1))
    assert brute_force_all_maps(S, S) == 3 ** len(find_morphisms(S, S))


def test_case1_characters(case1):
    subs = {c.describe() for c, _, _ in scan_rank1(case1, "sub")}
    quots = {c.describe() for c, _, _ in scan_rank1(case1, "quotient")}
    assert subs == {"lambda_3 * omega^1"}
    assert quots == {"lambda_1 * omega^1"}


def test_restriction_needs_F2(case1):
    with pytest.raises(UnsupportedMap):
        restrict_descent(case1)


def test_character_arithmetic():
    a = CharacterDescriptor.make(5, "Qp", 1, 2)
    b = CharacterDescriptor.make(5, "Qp", 2, 3)
    assert a.times(b) == CharacterDescriptor.make(5, "Qp", 3, 1)
    r = a.restrict()
    assert r.base == "Qp2" and r.omega2_exponent == 6 and r.unramified == 4
