"""End-to-end acceptance checks, one test per criterion.

Each test records its verdict through the ``acceptance`` fixture so the
terminal summary prints one PASS/FAIL line per criterion.
"""
import json
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from breuil_tame.breuil import (CharacterDescriptor, brute_force_morphisms, find_morphisms,
                                is_morphism, minimal_model, morphism_coordinates, reduce_T0,
                                span_set, standard_rank1, unknown_basis)
from breuil_tame.cli import main
from breuil_tame.coeff_rings import CoeffRing, FiniteCoeffAlgebra, FiniteField
from breuil_tame.dp_series import FieldDatum
from breuil_tame.errors import DegenerateCase, InadmissibleParameters, NoRootInE
from breuil_tame.filtered_modules import (TameType, build_D_character, build_D_principal,
                                          build_D_supercuspidal, check_weak_admissibility)
from breuil_tame.reduction_engine import (FAMILIES, PadicInput, c_from_case5,
                                          check_no_subalgebra_descent, classify,
                                          modular_form_reduction, reduce_principal,
                                          reduce_supercuspidal, supercuspidal_case, symbolic_forms)
from breuil_tame.sdm_lattices import (SdmParameters, build_family, build_sdm,
                                      specialize_coefficients, tampered_sdm, verify_sdm)
from breuil_tame.special_elements import solve

from conftest import algebra_hom

PRIMES = (3, 5, 7)
ZERO, ONE, HALF = Fraction(0), Fraction(1), Fraction(1, 2)


def inv(a, p):
    return pow(a, -1, p)


def lam(chi):
    return chi.unramified, chi.exponent


# ---------------------------------------------------------------------------
# 1

def _expected_refusal(kind, val, u, w, ji, branch, p):
    if kind in ("V", "U", "Vprime", "Uprime"):
        return val == 0 and ji in (1, p - 2) and (u * u - w) % p == 0
    if kind == "X":
        return val == 0
    if kind == "W" and ji == p:
        if val > 0:
            return branch == "+"
        return (1 + 4 * w * u * u) % p == 0
    return False


def test_criterion_1_special_element_residuals(acceptance):
    problems, solved, slowest = [], 0, 0.0
    for p in PRIMES:
        fields = {}
        for kind in ("V", "U", "Vprime", "Uprime", "W", "X"):
            n = 1 if kind in ("V", "U", "Vprime", "Uprime") else 2
            for val in (ZERO, HALF, ONE):
                eE = 2 if val.denominator == 2 else 1
                if (n, eE) not in fields:
                    fields[n, eE] = FieldDatum("F1" if n == 1 else "F2", CoeffRing(p, n, eE, 5))
                F = fields[n, eE]
                assert F.U == 3 * F.e * p
                if n == 1:
                    indices, branches = range(1, p - 1), (None,)
                elif kind == "W":
                    indices, branches = range(2, p + 1), ("+", "-")
                else:
                    indices, branches = (None,), ("+", "-")
                for u in range(1, p):
                    x = PadicInput(val, u).element(F.ring)
                    for w in range(1, p):
                        for ji in indices:
                            for br in branches:
                                prm = {"w": F.ring.from_int(w)}
                                if n == 1:
                                    prm.update(x=x, j=ji)
                                else:
                                    prm["b"] = x
                                    if kind == "W":
                                        prm["i"] = ji
                                case = (kind, str(val), u, w, ji, br, p)
                                t = time.perf_counter()
                                try:
                                    el = solve(kind, F, prm, br)
                                except (InadmissibleParameters, NoRootInE):
                                    if not _expected_refusal(kind, val, u, w, ji, br, p):
                                        problems.append(("refused", case))
                                    continue
                                if p == 7:
                                    slowest = max(slowest, time.perf_counter() - t)
                                solved += 1
                                if not el.residual().is_zero():
                                    problems.append(("residual", case))
    acceptance(1, not problems and slowest < 1.0,
               f"special-element residuals exact on {solved} elements, p in (3,5,7); "
               f"slowest at p=7 {slowest:.2f}s; problems {problems[:3]}")


# ---------------------------------------------------------------------------
# 2

def _scalar_params(p):
    R2 = CoeffRing(p, 2, 1, 10)
    Rr = CoeffRing(p, 2, 2, 10)
    pi = Rr.gen("pi")
    yield SdmParameters("char_F1", p, {"a": 2, "j": 1})
    yield SdmParameters("char_F2", p, {"ring": R2, "a": 2, "j": 1})
    yield SdmParameters("char_F2_Qp2", p, {"ring": R2, "a": 2, "m": 1})
    for j in range(1, p - 1):
        yield SdmParameters("prin_case1", p, {"x1": 2, "x2": p, "j": j})
        yield SdmParameters("prin_case2", p, {"x1": p, "x2": 2, "j": j})
        yield SdmParameters("prin_case3", p, {"ring": Rr, "x1": pi, "x2": -pi * 2, "j": j})
    yield SdmParameters("super_general", p, {"ring": R2, "m": 2, "b": 1, "w": 1})
    yield SdmParameters("super_general", p, {"ring": R2, "m": p, "b": 1, "w": 2}, branch="+")
    yield SdmParameters("super_general", p, {"ring": R2, "m": p, "b": 1, "w": 2}, branch="-")
    yield SdmParameters("super_general", p, {"ring": R2, "m": p + 3, "b": p, "w": 1})
    yield SdmParameters("super_i1", p, {"ring": R2, "m": 1, "b": p, "w": 1}, branch="+")
    yield SdmParameters("super_i1", p, {"ring": R2, "m": p + 2, "b": p, "w": 1}, branch="-")


FAMILY_VALUES = [("family_Y1", {"xt": 1, "w": 2, "j": 1}), ("family_Y2", {"xt": 1, "w": 2, "j": 1}),
                 ("family_X1X2", {"w": 1, "j": 1}), ("family_B", {"m": 2, "w": 1}),
                 ("family_Bprime", {"m": 2, "bt": 1, "w": 1}), ("family_X", {"m": 1, "w": 1})]

TAMPER_TARGET = {"fil_times_p": "2", "descent_shift": "12", "phi_times_p": "4"}


def _clean(report):
    return report["all_pass"] and len(report["axioms"]) == 12 and all(report.get("identities", {}).values())


def test_criterion_2_sdm_axioms(acceptance):
    bad, count = [], 0
    for p in PRIMES:
        for P in _scalar_params(p):
            count += 1
            if not _clean(verify_sdm(build_sdm(P))):
                bad.append((P.variant, p, P.values.get("j"), P.branch))
    for p in (3, 5):
        for variant, values in FAMILY_VALUES:
            count += 1
            if not _clean(verify_sdm(build_family(variant, p, values, level=8))):
                bad.append((variant, p))
    P = SdmParameters("prin_case1", 5, {"x1": 2, "x2": 5, "j": 2})
    for kind, axiom in TAMPER_TARGET.items():
        if verify_sdm(tampered_sdm(P, kind))["axioms"][axiom]["status"] != "FAIL":
            bad.append(("tamper missed", kind))
    rep = verify_sdm(tampered_sdm(P, "special_to_one"))
    if all(rep["identities"].values()):
        bad.append(("tamper missed", "special_to_one"))
    edge = SdmParameters("prin_case1", 3, {"x1": 1, "x2": 6, "j": 1})
    if verify_sdm(tampered_sdm(edge, "special_to_one"))["axioms"]["4"]["status"] != "FAIL":
        bad.append(("tamper missed", "special_to_one at j=1"))
    acceptance(2, not bad, f"{count} modules pass 12 axioms and identities; tampering caught; issues {bad[:3]}")


# ---------------------------------------------------------------------------
# 3

def _principal_draws(p, case, rng, count=5):
    out = []
    while len(out) < count:
        j = rng.randrange(1, p - 1)
        a, b = rng.randrange(1, p), rng.randrange(1, p)
        if case == 1:
            x1, x2, w = PadicInput(ZERO, a), PadicInput(ONE, b), a * b % p
            if j == 1 and (a * a - w) % p == 0:
                continue
        elif case == 2:
            x1, x2, w = PadicInput(ONE, a), PadicInput(ZERO, b), a * b % p
            if j == p - 2 and (b * b - w) % p == 0:
                continue
        else:
            x1, x2, w = PadicInput(HALF, a), PadicInput(HALF, b), -a * b % p
        out.append((x1, x2, w, j))
    return out


def test_criterion_3_principal_table(acceptance):
    rng = random.Random(611)
    bad, runs = [], 0
    for p in PRIMES:
        q = p * p - 1
        for case in (1, 2, 3):
            by_j = {}
            for x1, x2, w, j in _principal_draws(p, case, rng):
                rep = reduce_principal(p, x1, x2, j)
                runs += 1
                if case == 1:
                    u = x1.unit % p
                    want = ((inv(u, p), 1), (u * inv(w, p) % p, j % (p - 1)))
                elif case == 2:
                    u = x2.unit % p
                    want = ((inv(u, p), (1 + j) % (p - 1)), (u * inv(w, p) % p, 0))
                if case in (1, 2):
                    got = (lam(rep.sub_character), lam(rep.quotient_character))
                    if rep.shape != "triangular_nonsplit" or got != want or not rep.extension_nonzero:
                        bad.append((p, case, j, got, want))
                else:
                    exps = frozenset(rep.niveau2_exponents)
                    if rep.shape != "niveau2_irreducible" or exps != {(1 + j) % q, p * (1 + j) % q}:
                        bad.append((p, case, j, sorted(exps)))
                    by_j.setdefault(j, set()).add((rep.shape, exps, rep.extension_nonzero))
            if case == 3 and any(len(v) != 1 for v in by_j.values()):
                bad.append((p, "case 3 depends on the draw"))
    acceptance(3, not bad, f"principal-series table reproduced on {runs} draws; mismatches {bad[:3]}")


# ---------------------------------------------------------------------------
# 4

def _super_draw(p, case, rng):
    """(m, b, w) landing in the requested case."""
    while True:
        j = rng.randrange(0, p - 1)
        w = rng.randrange(1, p)
        unit = rng.randrange(1, p)
        if case == 1:
            i = rng.randrange(2, p)
            b = PadicInput(ZERO, unit)
        elif case == 2:
            i, b = 1, PadicInput(ZERO, unit)
        elif case == 3:
            i, b = p, PadicInput(ZERO, unit)
            if (1 + 4 * unit * unit * w) % p == 0:
                continue
        elif case == "3deg":
            i, b = p, PadicInput(ZERO, unit)
            w = -inv(4 * unit * unit, p) % p
        elif case == 4:
            i = rng.randrange(2, p + 1)
            b = rng.choice([PadicInput(ONE, unit), PadicInput(Fraction(2), unit), PadicInput(None, 0)])
        else:
            i = 1
            b = rng.choice([PadicInput(ONE, unit), PadicInput(Fraction(3), unit), PadicInput(None, 0)])
        return i + (p + 1) * j, b, w


def test_criterion_4_supercuspidal_table(acceptance):
    rng = random.Random(612)
    bad, runs = [], 0
    for p in PRIMES:
        q = p * p - 1
        for case in (1, 2, 3, "3deg", 4, 5):
            for _ in range(5):
                m, b, w = _super_draw(p, case, rng)
                number, i, j = supercuspidal_case(p, m, b)
                if number != (3 if case == "3deg" else case):
                    bad.append((p, m, case, "dispatch", number))
                    continue
                reps = reduce_supercuspidal(p, m, b, w)
                runs += 1
                shapes = [r.shape for r in reps]
                if case == 1:
                    (r,) = reps
                    bu = b.unit % p
                    want = ((inv(bu * w, p), (i + j) % (p - 1)), (-bu % p, (1 + j) % (p - 1)))
                    got = (lam(r.sub_character), lam(r.quotient_character))
                    flag_ok = bool(r.peu_ramifie_flag) == (i == 2)
                    if shapes != ["triangular_nonsplit"] or got != want or not r.extension_nonzero or not flag_ok:
                        bad.append((p, m, case, got, want))
                elif case in (2, "3deg"):
                    if shapes != ["not_trivial_endomorphisms"] or not reps[0].diagnosis:
                        bad.append((p, m, case, shapes))
                elif case == 3:
                    a, c = reps if len(reps) == 2 else (reps[0], None)
                    if (c is None or shapes != ["triangular_nonsplit"] * 2
                            or a.sub_character != c.quotient_character
                            or a.quotient_character != c.sub_character
                            or a.sub_character == c.sub_character):
                        bad.append((p, m, case, shapes))
                elif case == 4:
                    want = {(m + p) % q, (p * m + 1) % q}
                    if shapes != ["niveau2_irreducible"] or set(reps[0].niveau2_exponents) != want:
                        bad.append((p, m, case, reps[0].niveau2_exponents))
                else:
                    for r in reps:
                        # c may only exist in the quadratic extension of F_p
                        kE = FiniteField(p, r.quotient_character.kE_n)
                        cc = c_from_case5(r)
                        ci = kE.inv(cc)
                        want = ((kE.neg(ci), (1 + j) % (p - 1)), (ci, (1 + j) % (p - 1)))
                        got = (lam(r.sub_character), lam(r.quotient_character))
                        if kE.mul(cc, cc) != w or got != want or not r.extension_nonzero:
                            bad.append((p, m, case, got, want))
    acceptance(4, not bad, f"supercuspidal table reproduced on {runs} draws; mismatches {bad[:3]}")


# ---------------------------------------------------------------------------
# 5

def _principal_forms(i, j, p):
    q = p * p - 1
    br = (j - i) % (p - 1)
    k = 1 + br + (p + 1) * i
    return [("tri", (1 + i) % (p - 1), j % (p - 1)), ("tri", (1 + j) % (p - 1), i % (p - 1)),
            ("n2", frozenset({k % q, (p - br + (p + 1) * j) % q}))]


def _super_forms(m, p):
    q = p * p - 1
    i = (m - 1) % (p + 1) + 1
    j = (m - i) // (p + 1)
    return [("tri", (i + j) % (p - 1), (1 + j) % (p - 1)), ("tri", (1 + j) % (p - 1), (i + j) % (p - 1)),
            ("n2", frozenset({(p + m) % q, (1 + p * m) % q})),
            ("n2", frozenset({(1 + m) % q, p * (1 + m) % q}))]


def test_criterion_5_classification(acceptance):
    p, bad = 5, []
    for i in range(p - 1):
        for j in range(p - 1):
            if i != j and symbolic_forms(TameType.principal(i, j, p)) != _principal_forms(i, j, p):
                bad.append(("prin", i, j))
    for m in range(1, p * p - 1):
        if m % (p + 1) and symbolic_forms(TameType.supercuspidal(m, p)) != _super_forms(m, p):
            bad.append(("super", m))
    p, sweeps = 3, 0
    types = [TameType.principal(0, 1, p), TameType.principal(1, 0, p)]
    types += [TameType.supercuspidal(m, p) for m in range(1, p * p - 1) if m % (p + 1)]
    for tau in types:
        result = classify(tau, sweep=True)
        sweeps += len(result.reports)
        if not (result.sound and result.complete):
            bad.append(("sweep", tau.describe()))
    acceptance(5, not bad, f"symbolic lists match for every type at p=5; "
                           f"p=3 sweeps over {sweeps} reductions agree; issues {bad[:3]}")


# ---------------------------------------------------------------------------
# 6

def test_criterion_6_descent(acceptance):
    bad, slowest = [], 0.0
    for p in (3, 5):
        for fam in FAMILIES:
            t = time.perf_counter()
            chk = check_no_subalgebra_descent(fam, p)
            elapsed = time.perf_counter() - t
            if p == 5:
                slowest = max(slowest, elapsed)
            if chk.status != "PASS" or not chk.records:
                bad.append((p, fam, chk.status))
            if check_no_subalgebra_descent(fam, p, corruption="drop_nilpotent").status != "FAIL":
                bad.append((p, fam, "corruption passed"))
    acceptance(6, not bad and slowest < 30, f"six families PASS at p=3,5 and the corruption FAILs; "
                                            f"slowest family at p=5 {slowest:.1f}s; issues {bad[:3]}")


# ---------------------------------------------------------------------------
# 7

def _catalogue():
    kE = FiniteField(3, 1)
    mods = [reduce_T0(build_sdm(SdmParameters("prin_case1", 3, {"x1": 1, "x2": 6, "j": 1}))),
            reduce_T0(build_sdm(SdmParameters("prin_case2", 3, {"x1": 3, "x2": 2, "j": 1})))]
    for a in (1, 2):
        for j in (0, 1):
            mods.append(standard_rank1("F1", a, j, kE))
            mods.append(minimal_model(CharacterDescriptor.make(3, "Qp", j, a), kE, "F1"))
    fam = reduce_T0(build_sdm(SdmParameters("family_Y1", 3, {"xt": 1, "w": 2, "j": 1})))
    mods.append(fam)
    A = fam.base.algebra
    for a in (1, 2):
        for j in (0, 1):
            mods.append(standard_rank1("F1", a, j, kE, A))
    return mods


def test_criterion_7_morphism_oracle(acceptance):
    mods = _catalogue()
    pairs, bad = 0, []
    for X in mods:
        for Y in mods:
            if X.base.dA != Y.base.dA:
                continue
            found = find_morphisms(X, Y)
            try:
                brute = brute_force_morphisms(X, Y)
            except ValueError:
                continue
            pairs += 1
            d = len(unknown_basis(X, Y))
            same = span_set(morphism_coordinates(X, Y, found), 3, d) == {tuple(r) for r in brute}
            if not same or not all(is_morphism(X, Y, f.matrix) for f in found):
                bad.append((X.name, Y.name))
    acceptance(7, pairs >= 20 and not bad,
               f"find_morphisms equals brute force on {pairs} pairs at p=3; mismatches {bad[:3]}")


# ---------------------------------------------------------------------------
# 8

def _filtered_modules(p):
    R1 = CoeffRing(p, 1, 1, 6)
    R2 = CoeffRing(p, 2, 1, 6)
    Rr = CoeffRing(p, 1, 2, 6)
    Rr2 = CoeffRing(p, 2, 2, 6)
    for over, R, Rram in (("F1", R1, Rr), ("F2", R2, Rr2)):
        for i, j in ((0, 1), (1, 0), (0, p - 2)):
            yield build_D_principal(R.from_int(2), R.from_int(p), i, j, over)
            yield build_D_principal(R.from_int(p), R.from_int(p - 1), i, j, over)
            pi = Rram.gen("pi")
            yield build_D_principal(pi, pi * 2, i, j, over)
    for m in (1, 2, p, p + 2):
        for a, b in ((1, 0), (0, 1), (1, 1), (2, p)):
            yield build_D_supercuspidal(m, R2.from_int(a), R2.from_int(b), R2.from_int(p * (p - 1)))
    yield build_D_character(1, 1, R1.from_int(2), p)


def _mutants(D):
    if D.shape == "diagonal":
        v1, v2 = D.phi_valuations
        yield D.with_valuations((v1 - 1, v2))
        yield D.with_valuations((v1, v2 + 1))
        yield D.with_valuations((2, -1))
    elif D.shape == "antidiagonal":
        yield D.with_valuations((2,))
        yield D.with_valuations((0,))


def test_criterion_8_weak_admissibility(acceptance):
    bad, count, mutants = [], 0, 0
    for p in PRIMES:
        for D in _filtered_modules(p):
            count += 1
            out = check_weak_admissibility(D)
            full = out["witnesses"][-1]
            if not out["admissible"] or full["t_H"] != full["t_N"] or (D.rank == 2 and full["t_H"] != "1"):
                bad.append((p, D.shape, D.params))
            for mut in _mutants(D):
                mutants += 1
                if check_weak_admissibility(mut)["admissible"]:
                    bad.append((p, "mutant", D.shape, mut.phi_valuations))
    acceptance(8, not bad, f"{count} filtered modules admissible with t_H = t_N; "
                           f"{mutants} valuation mutants rejected; issues {bad[:3]}")


# ---------------------------------------------------------------------------
# 9

def test_criterion_9_modular_forms(acceptance):
    p, bad = 5, []
    for j in range(1, p - 1):
        for a in range(1, p):
            for chi in range(1, p):
                # a_p^2 = chi_N(p) is the boundary configuration with extra endomorphisms
                boundary = (a * a - chi) % p == 0
                try:
                    r0 = modular_form_reduction(p, j, PadicInput(ZERO, a), chi)
                    want0 = ((chi * inv(a, p) % p, (j + 1) % (p - 1)), (a, 0))
                    if r0.shape != "triangular_nonsplit" or (lam(r0.sub_character), lam(r0.quotient_character)) != want0:
                        bad.append(("slope 0", j, a, chi))
                except DegenerateCase:
                    if not (boundary and j == p - 2):
                        bad.append(("slope 0 refused", j, a, chi))
                try:
                    r1 = modular_form_reduction(p, j, PadicInput(ONE, a), chi)
                    want1 = ((a, 1), (chi * inv(a, p) % p, j % (p - 1)))
                    if r1.shape != "triangular_nonsplit" or (lam(r1.sub_character), lam(r1.quotient_character)) != want1:
                        bad.append(("slope 1", j, a, chi, lam(r1.sub_character), want1))
                except DegenerateCase:
                    if not (boundary and j == 1):
                        bad.append(("slope 1 refused", j, a, chi))
            rh = modular_form_reduction(p, j, PadicInput(HALF, 1), 1)
            q = p * p - 1
            if rh.shape != "niveau2_irreducible" or set(rh.niveau2_exponents) != {(1 + j) % q, p * (1 + j) % q}:
                bad.append(("slope 1/2", j))
    acceptance(9, not bad, f"modular-form dispatch at p=5 matches for slopes 0, 1, 1/2; issues {bad[:3]}")


# ---------------------------------------------------------------------------
# 10

def _cli_bytes(capsys, argv):
    assert main(argv) == 0
    return capsys.readouterr().out


def _naturality_failures(p):
    bad = []
    for variant, values in (("family_Y1", {"xt": 1, "w": 2, "j": 1}), ("family_Y2", {"xt": 1, "w": 2, "j": 1}),
                            ("family_B", {"m": 2, "w": 1}), ("family_Bprime", {"m": 2, "bt": 1, "w": 1}),
                            ("family_X", {"m": 1, "w": 1})):
        M = build_sdm(SdmParameters(variant, p, values, level=3))
        R = reduce_T0(M)
        var = M.ring.family
        k = FiniteCoeffAlgebra(M.ring.kE, 0)
        to_k = algebra_hom(R.base.algebra, k, {var: np.zeros(k.dim, dtype=np.int64)})
        for val in (0, p, 2 * p):
            T = CoeffRing(p, M.ring.n, M.ring.eE, M.ring.level)
            S = specialize_coefficients(M, T, {var: T.from_int(val)})
            if not reduce_T0(S).equals(R.base_change(to_k, k)):
                bad.append((variant, val))
    M = build_sdm(SdmParameters("family_X1X2", p, {"w": 1, "j": 1}, level=3))
    R = reduce_T0(M)
    kE = M.ring.kE
    A1 = FiniteCoeffAlgebra(kE, 1, ("X",))
    X = A1.var(0)
    for beta in kE.elements():
        images = {"X1": A1.mul(A1.kE_element(kE.neg(beta)), X), "X2": X}
        if not reduce_T0(M, A1, images).equals(R.base_change(algebra_hom(R.base.algebra, A1, images), A1)):
            bad.append(("family_X1X2", beta))
    return bad


def test_criterion_10_determinism_and_naturality(acceptance, capsys):
    bad = []
    for argv in (["reduce", "--p", "5", "--tau", "super", "--m", "5", "--b", "1", "--w", "2"],
                 ["classify", "--p", "3", "--tau", "super:2", "--sweep"],
                 ["descent", "--p", "3", "--family", "B"]):
        if _cli_bytes(capsys, argv) != _cli_bytes(capsys, argv):
            bad.append(("cli", argv[0]))
    a = json.dumps(reduce_principal(7, PadicInput(HALF, 1), PadicInput(HALF, 3), 3).to_json(), sort_keys=True)
    b = json.dumps(reduce_principal(7, PadicInput(HALF, 1), PadicInput(HALF, 3), 3).to_json(), sort_keys=True)
    if a != b:
        bad.append(("report", "prin_case3"))
    bad += _naturality_failures(3)
    acceptance(10, not bad, f"byte-identical reports and reduction commutes with specialization; issues {bad[:3]}")
