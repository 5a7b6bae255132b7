import pytest

from breuil_tame.coeff_rings import CoeffRing
from breuil_tame.errors import DegenerateCase, InadmissibleParameters
from breuil_tame.sdm_lattices import (TAMPER_KINDS, SdmParameters, build_family, build_sdm,
                                      specialize_coefficients, tampered_sdm, verify_sdm)


def statuses(report):
    return {k: v["status"] for k, v in report["axioms"].items()}


def scalar_cases(p):
    R2 = CoeffRing(p, 2, 1, 10)
    Rr = CoeffRing(p, 2, 2, 10)
    pi = Rr.gen("pi")
    yield SdmParameters("char_F1", p, {"a": 2, "j": 1})
    yield SdmParameters("char_F2", p, {"ring": R2, "a": 2, "j": 1})
    yield SdmParameters("char_F2_Qp2", p, {"ring": R2, "a": 2, "m": 1})
    yield SdmParameters("prin_case1", p, {"x1": 2, "x2": p, "j": 1})
    yield SdmParameters("prin_case2", p, {"x1": p, "x2": 2, "j": p - 2})
    yield SdmParameters("prin_case3", p, {"ring": Rr, "x1": pi, "x2": -pi * 2, "j": 1})
    yield SdmParameters("super_general", p, {"ring": R2, "m": 2, "b": 1, "w": 1})
    yield SdmParameters("super_general", p, {"ring": R2, "m": p, "b": 1, "w": 2}, branch="+")
    yield SdmParameters("super_i1", p, {"ring": R2, "m": 1, "b": p, "w": 1}, branch="-")


@pytest.mark.parametrize("params", list(scalar_cases(3)) + list(scalar_cases(5)),
                         ids=lambda P: f"{P.variant}-p{P.p}")
def test_scalar_lattices_pass_all_axioms(params):
    report = verify_sdm(build_sdm(params))
    assert report["all_pass"], statuses(report)
    assert len(report["axioms"]) == 12
    assert all(report.get("identities", {}).values())


FAMILIES = [("family_Y1", {"xt": 1, "w": 2, "j": 1}), ("family_Y2", {"xt": 1, "w": 2, "j": 1}),
            ("family_X1X2", {"w": 1, "j": 1}), ("family_B", {"m": 2, "w": 1}),
            ("family_Bprime", {"m": 2, "bt": 1, "w": 1}), ("family_X", {"m": 1, "w": 1})]


@pytest.mark.parametrize("variant,values", FAMILIES, ids=[f[0] for f in FAMILIES])
def test_families_pass_all_axioms(variant, values):
    report = verify_sdm(build_family(variant, 3, values, level=8))
    assert report["all_pass"], statuses(report)


@pytest.mark.parametrize("kind", TAMPER_KINDS)
def test_tampering_is_caught(kind):
    P = SdmParameters("prin_case1", 5, {"x1": 2, "x2": 5, "j": 2})
    assert not verify_sdm(tampered_sdm(P, kind))["all_pass"]


def test_degenerate_principal():
    with pytest.raises(DegenerateCase):
        build_sdm(SdmParameters("prin_case1", 5, {"x1": 2, "x2": 10, "j": 1}))


def test_unknown_variant():
    with pytest.raises(InadmissibleParameters):
        build_sdm(SdmParameters("nope", 3, {}))


def test_specialization_matches_scalar_build():
    p = 3
    M = build_sdm(SdmParameters("family_Y1", p, {"xt": 1, "w": 2, "j": 1}))
    T = CoeffRing(p, 1, 1, M.ring.level)
    S = specialize_coefficients(M, T, {"Y": T.zero()})
    M0 = build_sdm(SdmParameters("prin_case1", p, {"ring": T, "x1": 1, "x2": 6, "j": 1}))
    assert all((a - b).is_zero() for ra, rb in zip(S.phi_mat, M0.phi_mat) for a, b in zip(ra, rb))
    assert verify_sdm(S)["all_pass"]


def test_special_to_one_moves_axiom_4_at_the_boundary():
    P = SdmParameters("prin_case1", 3, {"x1": 1, "x2": 6, "j": 1})
    report = verify_sdm(tampered_sdm(P, "special_to_one"))
    assert report["axioms"]["4"]["status"] == "FAIL"
