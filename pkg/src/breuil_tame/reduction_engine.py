"""Mod p reductions of the catalogued lattices, the resulting classification,
and the deformation-ring bookkeeping built on top of them.

Every report is computed: the lattice is built, reduced to a Breuil module,
and its rank-one subobjects and quotients are found by morphism searches.
The theorem tables only enter in `symbolic_forms` and `deformation_ring_answer`,
which are lookups, and in the peu ramifie flag, which is attached rather
than computed.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .breuil import (BreuilModule, CharacterDescriptor, find_morphisms, maximal_model, minimal_model,
                     reduce_T0, restrict_descent, scan_rank1)
from .coeff_rings import CoeffRing, FiniteCoeffAlgebra, FiniteField
from .errors import DegenerateCase, InadmissibleParameters, NoRootInE
from .filtered_modules import TameType
from .sdm_lattices import SdmParameters, build_sdm

log = logging.getLogger(__name__)

DEFAULT_LEVEL = 6


def default_level() -> int:
    return int(os.environ.get("BREUIL_PRECISION", DEFAULT_LEVEL))


# ---------------------------------------------------------------------------
# p-adic inputs

@dataclass(frozen=True)
class PadicInput:
    """unit * p^val for val an integer, or unit * pi with pi^2 = -p for val = 1/2.

    unit is an integer prime to p; val = None stands for the element 0.
    """

    val: Fraction | None
    unit: int = 1

    @classmethod
    def parse(cls, text: str) -> "PadicInput":
        """'val=1/2,unit=3', a plain integer, or '0'."""
        text = text.strip()
        if "=" not in text:
            n = int(text)
            return cls.from_int(n)
        parts = dict(item.split("=", 1) for item in text.split(","))
        unknown = set(parts) - {"val", "unit"}
        if unknown:
            raise ValueError(f"unknown keys {sorted(unknown)}")
        return cls(Fraction(parts.get("val", "0")), int(parts.get("unit", "1")))

    @classmethod
    def from_int(cls, n: int, p: int | None = None) -> "PadicInput":
        if n == 0:
            return cls(None, 0)
        if p is None:
            return cls(Fraction(0), n)
        v = 0
        while n % p == 0:
            n //= p
            v += 1
        return cls(Fraction(v), n)

    def normalized(self, p: int) -> "PadicInput":
        if self.val is None:
            return self
        if self.unit % p == 0:
            extra = PadicInput.from_int(self.unit, p)
            return PadicInput(self.val + extra.val, extra.unit)
        return self

    def needs_ramified(self) -> bool:
        return self.val is not None and self.val.denominator != 1

    def check(self, p: int):
        if self.val is not None and self.val.denominator not in (1, 2):
            raise InadmissibleParameters("only valuations in (1/2)Z are supported")
        if self.val is not None and self.unit % p == 0:
            raise InadmissibleParameters("unit part must be prime to p")

    def element(self, ring: CoeffRing):
        if self.val is None:
            return ring.zero()
        u = ring.from_int(self.unit)
        if self.val.denominator == 2:
            if ring.eE != 2:
                raise InadmissibleParameters("half-integral valuation needs a ramified coefficient field")
            k = int(self.val - Fraction(1, 2))
            return u * ring.gen("pi") * ring.from_int(ring.p ** k)
        return u * ring.from_int(ring.p ** int(self.val))

    def residue(self, p: int) -> int:
        """Reduction mod m_E (0 when val > 0)."""
        return self.unit % p if self.val == 0 else 0

    def describe(self) -> str:
        if self.val is None:
            return "0"
        return f"val={self.val},unit={self.unit}"


def _mul_inputs(a: PadicInput, b: PadicInput, p: int) -> PadicInput:
    """Product, using pi^2 = -p."""
    if a.val is None or b.val is None:
        return PadicInput(None, 0)
    sign = -1 if (a.val.denominator == 2 and b.val.denominator == 2) else 1
    return PadicInput(a.val + b.val, sign * a.unit * b.unit)


def _inv_unit(u: int, p: int, digits: int = 30) -> int:
    return pow(u, -1, p ** digits)


def _p_over(a: PadicInput, p: int) -> PadicInput:
    """p / a for 0 <= val(a) <= 1."""
    inv = _inv_unit(a.unit, p)
    if a.val.denominator == 2:
        # p / (u pi) = -pi / u
        return PadicInput(1 - a.val, -inv)
    return PadicInput(1 - a.val, inv)


# ---------------------------------------------------------------------------
# reports

SHAPES = ("triangular_nonsplit", "split", "niveau2_irreducible", "not_trivial_endomorphisms")
PEU_RAMIFIE_NOTE = "peu ramifie (sourced from theorem)"


@dataclass
class ReductionReport:
    input: dict
    shape: str
    sub_character: CharacterDescriptor | None = None
    quotient_character: CharacterDescriptor | None = None
    niveau2_exponents: tuple | None = None
    niveau2_characters: tuple = ()
    extension_nonzero: bool | None = None
    peu_ramifie_flag: str | None = None
    diagnosis: str | None = None
    witnesses: list = field(default_factory=list)
    certified: dict = field(default_factory=dict)
    field_extensions_used: list = field(default_factory=list)

    def characters(self) -> list[CharacterDescriptor]:
        if self.shape == "niveau2_irreducible":
            return list(self.niveau2_characters)
        return [c for c in (self.sub_character, self.quotient_character) if c is not None]

    def result(self) -> dict:
        """Everything except the inputs (used to compare reports across parameter draws)."""
        out = self.to_json()
        out.pop("input")
        return out

    def inertial_shape(self) -> tuple:
        """The restriction to inertia: ('tri', sub, quot) in omega exponents, or ('n2', {k, pk})."""
        p = (self.sub_character or (self.niveau2_characters or [None])[0]).p
        if self.shape == "niveau2_irreducible":
            return ("n2", frozenset(self.niveau2_exponents))
        return ("tri", self.sub_character.exponent % (p - 1), self.quotient_character.exponent % (p - 1))

    def to_json(self) -> dict:
        chars = [dict(c.to_json(), role=role) for role, c in
                 (("sub", self.sub_character), ("quotient", self.quotient_character)) if c is not None]
        chars += [dict(c.to_json(), role="irreducible_constituent") for c in self.niveau2_characters]
        return {
            "input": self.input,
            "shape": self.shape,
            "characters": chars,
            "niveau2_exponents": list(self.niveau2_exponents) if self.niveau2_exponents else None,
            "extension_nonzero": self.extension_nonzero,
            "peu_ramifie_flag": self.peu_ramifie_flag,
            "diagnosis": self.diagnosis,
            "witnesses": self.witnesses,
            "certified": self.certified,
            "field_extensions_used": list(self.field_extensions_used),
        }


def _hom_dim(maps: list) -> int:
    return len(maps)


def analyse(R: BreuilModule, inputs: dict) -> ReductionReport:
    """Decide the shape of T(R) from its rank-one subobjects and quotients."""
    p = R.base.p
    kE = R.base.kE
    subs = scan_rank1(R, "sub")
    certified = {"p_digits": 1, "u_degree": R.base.ep}
    if not subs:
        R2 = restrict_descent(R) if R.base.has_gphi else R
        found = scan_rank1(R2, "quotient")
        chars = sorted({c for c, _, _ in found}, key=lambda c: (c.omega2_exponent, c.unramified))
        exps = tuple(sorted({c.omega2_exponent % (p * p - 1) for c in chars}))
        wit = [{"kind": "no_rank_one_sub", "group": "G_Qp"}]
        wit += [{"kind": "quotient_map_over_Qp2", "character": c.describe(),
                 "hom_dim_Fp": sum(len(m) for cc, _, m in found if cc == c)} for c in chars]
        return ReductionReport(inputs, "niveau2_irreducible", niveau2_exponents=exps,
                               niveau2_characters=tuple(chars), witnesses=wit, certified=certified)
    quots = scan_rank1(R, "quotient")
    sub_chars = []
    for c, _, maps in subs:
        if c not in sub_chars:
            sub_chars.append(c)
    quot_chars = []
    for c, _, maps in quots:
        if c not in quot_chars:
            quot_chars.append(c)
    sub_dims = {c: sum(len(m) for cc, _, m in subs if cc == c) for c in sub_chars}
    wit = [{"kind": "sub_map", "character": c.describe(), "hom_dim_Fp": sub_dims[c]} for c in sub_chars]
    wit += [{"kind": "quotient_map", "character": c.describe(),
             "hom_dim_Fp": sum(len(m) for cc, _, m in quots if cc == c)} for c in quot_chars]
    split = len(sub_chars) >= 2 or any(d >= 2 * kE.n for d in sub_dims.values())
    which = "F1" if R.base.f == 1 else "F2"
    if split:
        sub = sub_chars[0]
        others = [c for c in sub_chars if c != sub]
        quot = others[0] if others else sub
        return ReductionReport(inputs, "split", sub, quot, extension_nonzero=False,
                               diagnosis="split", witnesses=wit, certified=certified)
    sub = sub_chars[0]
    target = maximal_model(sub, kE, which)
    obstruction = find_morphisms(R, target)
    ext_nonzero = not obstruction
    wit.append({"kind": "maps_to_maximal_model_of_sub", "target": target.name,
                "hom_dim_Fp": len(obstruction)})
    quot_only = [c for c in quot_chars if c != sub]
    quot = quot_only[0] if quot_only else sub
    if quot == sub:
        return ReductionReport(inputs, "not_trivial_endomorphisms", sub, quot, extension_nonzero=ext_nonzero,
                               diagnosis="self_extension", witnesses=wit, certified=certified)
    return ReductionReport(inputs, "triangular_nonsplit", sub, quot, extension_nonzero=ext_nonzero,
                           witnesses=wit, certified=certified)


# ---------------------------------------------------------------------------
# principal series

def principal_case(x1: PadicInput, x2: PadicInput) -> int:
    if x1.val is None or x2.val is None or x1.val + x2.val != 1 or min(x1.val, x2.val) < 0:
        raise InadmissibleParameters("need val(x1) + val(x2) = 1 with both valuations in [0, 1]")
    return 1 if x1.val == 0 else 2 if x2.val == 0 else 3


def reduce_principal(p: int, x1: PadicInput, x2: PadicInput, j: int,
                     level: int | None = None) -> ReductionReport:
    """Reduction of the lattice in D_{x1,x2} (type 1 + omega~^j)."""
    x1, x2 = x1.normalized(p), x2.normalized(p)
    x1.check(p)
    x2.check(p)
    case = principal_case(x1, x2)
    level = level or default_level()
    ramified = x1.needs_ramified() or x2.needs_ramified()
    ring = CoeffRing(p, 2 if case == 3 else 1, 2 if ramified else 1, level + 4)
    variant = f"prin_case{case}"
    M = build_sdm(SdmParameters(variant, p, {"ring": ring, "x1": x1.element(ring),
                                             "x2": x2.element(ring), "j": j}, level=level))
    R = reduce_T0(M)
    w = _mul_inputs(x1, x2, p)
    inputs = {"kind": "principal", "p": p, "x1": x1.describe(), "x2": x2.describe(), "j": j,
              "w_residue": w.unit % p, "case": case}
    rep = analyse(R, inputs)
    rep.certified["p_digits"] = level
    if ramified:
        rep.field_extensions_used.append("E ramified quadratic (pi^2 = -p)")
    return rep


# ---------------------------------------------------------------------------
# supercuspidal

def supercuspidal_case(p: int, m: int, b: PadicInput) -> tuple[int, int, int]:
    """(theorem case, i, j) with m = i + (p+1) j and 1 <= i <= p."""
    m %= p * p - 1
    if m % (p + 1) == 0:
        raise InadmissibleParameters("p+1 divides m")
    i = (m - 1) % (p + 1) + 1
    j = ((m - i) // (p + 1)) % (p - 1)
    unit_b = b.val == 0
    if unit_b:
        case = 1 if 1 < i < p else 2 if i == 1 else 3
    else:
        case = 4 if i > 1 else 5
    return case, i, j


def _normalize_super(p: int, m: int, b: PadicInput, w: int) -> tuple[int, PadicInput, int]:
    """D_{m,[1:b]} with val(b) < 0 is D_{pm,[1:-1/(bw)]}."""
    if b.val is not None and b.val < 0:
        if b.val.denominator != 1:
            raise InadmissibleParameters("only integral negative valuations are supported")
        inv = _inv_unit(b.unit * w, p)
        return (p * m) % (p * p - 1), PadicInput(-b.val, -inv), w
    return m, b, w


def _build_super(p: int, m: int, b: PadicInput, w: int, level: int, branch: str | None,
                 extensions: list) -> BreuilModule:
    variant = "super_i1" if supercuspidal_case(p, m, b)[0] == 5 else "super_general"
    last = None
    for eE in (2 if b.needs_ramified() else 1, 2):
        ring = CoeffRing(p, 2, eE, level + 4)
        try:
            M = build_sdm(SdmParameters(variant, p, {"ring": ring, "m": m, "b": b.element(ring), "w": w},
                                        level=level, branch=branch))
        except NoRootInE as exc:
            last = exc
            continue
        if eE == 2 and not b.needs_ramified():
            extensions.append("E ramified quadratic (pi^2 = -p) for a square root of 1 + 4 w b^2")
        return reduce_T0(M)
    raise last


def reduce_supercuspidal(p: int, m: int, b: PadicInput, w: int,
                         level: int | None = None) -> list[ReductionReport]:
    """Reductions of the lattices in D_{m,[1:b]} (one report per lattice)."""
    level = level or default_level()
    if w % p == 0:
        raise InadmissibleParameters("w must be a unit")
    m, b, w = _normalize_super(p, m, b.normalized(p), w)
    b.check(p)
    case, i, j = supercuspidal_case(p, m, b)
    if case in (3, 5):
        one_root = case == 3 and (1 + 4 * b.unit ** 2 * w) % p == 0
        branches = ["+"] if one_root else ["+", "-"]
    else:
        branches = [None]
    reports = []
    for br in branches:
        ext: list = []
        R = _build_super(p, m, b, w, level, br, ext)
        inputs = {"kind": "supercuspidal", "p": p, "m": m, "i": i, "j": j, "b": b.describe(),
                  "w": w % p, "case": case, "branch": br}
        rep = analyse(R, inputs)
        rep.certified["p_digits"] = level
        rep.field_extensions_used.extend(ext)
        if case == 1 and i == 2:
            rep.peu_ramifie_flag = PEU_RAMIFIE_NOTE
        if case == 2 or (case == 3 and one_root):
            # End is bigger than k_E either way; the diagnosis keeps the computed shape
            rep.diagnosis = "split" if rep.shape == "split" else "self_extension"
            rep.shape = "not_trivial_endomorphisms"
        reports.append(rep)
    if len(reports) == 2 and case == 3:
        a, c = reports
        if not (a.sub_character == c.quotient_character and a.quotient_character == c.sub_character):
            raise AssertionError("the two W-branches should have swapped characters")
    return reports


def c_from_case5(rep: ReductionReport) -> int:
    """c with quotient lambda_{c^{-1}}: c^2 should equal w."""
    kE = FiniteField(rep.quotient_character.p, rep.quotient_character.kE_n)
    return kE.inv(rep.quotient_character.unramified)


# ---------------------------------------------------------------------------
# classification

def tri(p: int, a: int, b: int) -> tuple:
    return ("tri", a % (p - 1), b % (p - 1))


def n2(p: int, k: int) -> tuple:
    q = p * p - 1
    return ("n2", frozenset({k % q, (p * k) % q}))


def _braces(a: int, p: int) -> int:
    return a % (p - 1)


def symbolic_forms(tau: TameType) -> list[tuple]:
    """The inertial shapes listed for the type, in the order of the classification."""
    p = tau.p
    if tau.niveau == 1:
        i, j = tau.exponents
        k = 1 + _braces(j - i, p) + (p + 1) * i
        return [tri(p, 1 + i, j), tri(p, 1 + j, i), n2(p, k)]
    m = tau.exponents[0]
    i = (m - 1) % (p + 1) + 1
    j = (m - i) // (p + 1)
    return [tri(p, i + j, 1 + j), tri(p, 1 + j, i + j), n2(p, p + m), n2(p, 1 + m)]


def is_degenerate_form(form: tuple, p: int) -> bool:
    """A 'niveau two' pair that is really two equal niveau-one characters."""
    return form[0] == "n2" and all(k % (p + 1) == 0 for k in form[1])


def _twist(form: tuple, p: int, i: int) -> tuple:
    if form[0] == "tri":
        return tri(p, form[1] + i, form[2] + i)
    return ("n2", frozenset((k + (p + 1) * i) % (p * p - 1) for k in form[1]))


@dataclass
class Classification:
    tau: TameType
    symbolic: list
    swept: list | None = None
    reports: list = field(default_factory=list)

    @property
    def sound(self) -> bool | None:
        if self.swept is None:
            return None
        return all(f in self.symbolic for f in self.swept)

    @property
    def complete(self) -> bool | None:
        if self.swept is None:
            return None
        p = self.tau.p
        return all(f in self.swept for f in self.symbolic if not is_degenerate_form(f, p))

    def to_json(self) -> dict:
        return {"tau": self.tau.describe(), "forms": [describe_form(f) for f in self.symbolic],
                "swept": None if self.swept is None else [describe_form(f) for f in self.swept],
                "sound": self.sound, "complete": self.complete}


def describe_form(form: tuple) -> str:
    if form[0] == "tri":
        return f"[omega^{form[1]}, *; 0, omega^{form[2]}]"
    a, b = sorted(form[1]) if len(form[1]) == 2 else (min(form[1]),) * 2
    return f"omega2^{a} + omega2^{b}"


def _unit_draws(p: int, limit: int | None) -> list[int]:
    units = list(range(1, p))
    return units if limit is None else units[:limit]


def sweep_principal(p: int, j: int, draws: int | None = None, level: int | None = None) -> list[ReductionReport]:
    """Reductions over every regime of D_{x1,x2} for the type 1 + omega~^j."""
    out = []
    for u1 in _unit_draws(p, draws):
        for wv in _unit_draws(p, draws):
            for case in (1, 2):
                x1 = PadicInput(Fraction(0), u1) if case == 1 else PadicInput(Fraction(1), _inv_unit(u1, p) * wv)
                x2 = PadicInput(Fraction(1), _inv_unit(u1, p) * wv) if case == 1 else PadicInput(Fraction(0), u1)
                try:
                    out.append(reduce_principal(p, x1, x2, j, level))
                except DegenerateCase:
                    continue
    out.append(reduce_principal(p, PadicInput(Fraction(1, 2), 1), PadicInput(Fraction(1, 2), p - 1), j, level))
    return out


def sweep_supercuspidal(p: int, m: int, draws: int | None = None, level: int | None = None) -> list[ReductionReport]:
    out = []
    for mm in (m, p * m):
        for wv in _unit_draws(p, draws):
            for bu in _unit_draws(p, draws):
                try:
                    out.extend(reduce_supercuspidal(p, mm, PadicInput(Fraction(0), bu), wv, level))
                except NoRootInE:
                    continue
            out.extend(reduce_supercuspidal(p, mm, PadicInput(Fraction(1), 1), wv, level))
    return out


def classify(tau: TameType, sweep: bool = False, draws: int | None = None,
             level: int | None = None) -> Classification:
    """Possible reductions with trivial endomorphisms for lattices of type tau."""
    p = tau.p
    result = Classification(tau, symbolic_forms(tau))
    if not sweep:
        return result
    shapes = []
    if tau.niveau == 1:
        i, j = tau.exponents
        reports = sweep_principal(p, (j - i) % (p - 1), draws, level)
        for r in reports:
            if r.shape in ("triangular_nonsplit", "niveau2_irreducible"):
                shapes.append(_twist(r.inertial_shape(), p, i))
    else:
        reports = sweep_supercuspidal(p, tau.exponents[0], draws, level)
        for r in reports:
            if r.shape in ("triangular_nonsplit", "niveau2_irreducible"):
                shapes.append(r.inertial_shape())
    swept = []
    for s in shapes:
        if s not in swept:
            swept.append(s)
    result.swept = swept
    result.reports = reports
    return result


# ---------------------------------------------------------------------------
# no descent to a subalgebra

FAMILIES = ("Y1", "Y2", "X1X2", "B", "Bprime", "X")


def default_family_values(family: str, p: int) -> dict:
    if family in ("Y1", "Y2"):
        return {"xt": 1, "w": 2 % p or 1, "j": 1 if p > 3 else 1}
    if family == "X1X2":
        return {"w": 1, "j": 1}
    if family == "B":
        return {"m": 2, "w": 1}
    if family == "Bprime":
        return {"m": 2, "bt": 1, "w": 1}
    return {"m": 1, "w": 1}


@dataclass
class DescentCheck:
    family: str
    p: int
    status: str
    records: list = field(default_factory=list)
    corruption: str | None = None

    def to_json(self) -> dict:
        return {"family": self.family, "p": self.p, "status": self.status,
                "corruption": self.corruption, "records": self.records}


def _drop_nilpotent(M: BreuilModule) -> BreuilModule:
    """The same module with every family-variable term removed."""
    mask = M.base.algebra.nilpotent_mask()

    def cut(v):
        v = v.copy()
        v[..., mask] = 0
        return v

    return replace(M, fil_gens=[cut(h) for h in M.fil_gens], phi1_gens=[cut(x) for x in M.phi1_gens],
                   phi1_ue=[cut(x) for x in M.phi1_ue], name=M.name + "[nilpotents dropped]")


def _special_fibre(Mfam, kE: FiniteField) -> BreuilModule:
    return reduce_T0(Mfam, FiniteCoeffAlgebra(kE, 0), {})


def _sub_characters(R0: BreuilModule) -> tuple[list, bool]:
    """Rank-one subcharacters of the special fibre, restricting to G_Qp2 when there are none."""
    subs = scan_rank1(R0, "sub")
    if subs:
        return sorted({c for c, _, _ in subs}, key=lambda c: (c.exponent, c.unramified)), False
    R2 = restrict_descent(R0)
    subs = scan_rank1(R2, "sub")
    return sorted({c for c, _, _ in subs}, key=lambda c: (c.omega2_exponent, c.unramified)), True


def _minimal_over(chi: CharacterDescriptor, M: BreuilModule, restricted: bool) -> BreuilModule:
    which = "F1" if M.base.f == 1 else ("F2/Qp2" if restricted else "F2")
    return minimal_model(chi, M.base.kE, which, M.base.algebra)


def _lines(kE: FiniteField) -> list[tuple[int, int]]:
    """P^1(k_E) as (a, b) with L = a X1 + b X2."""
    return [(1, b) for b in kE.elements()] + [(0, 1)]


def check_no_subalgebra_descent(family: str, p: int, values: dict | None = None,
                                corruption: str | None = None, level: int = 3) -> DescentCheck:
    """Every map from the minimal model of a subcharacter into the family mod m_R^2 lands in m_R."""
    from .sdm_lattices import build_family
    if family not in FAMILIES:
        raise InadmissibleParameters(f"unknown family {family!r}")
    values = dict(default_family_values(family, p), **(values or {}))
    Mfam = build_family(f"family_{family}", p, values, level + 2)
    kE = Mfam.ring.kE
    R0 = _special_fibre(Mfam, kE)
    chars, restricted = _sub_characters(R0)
    if not chars:
        raise InadmissibleParameters("special fibre has no subcharacter, even over Q_p^2")
    targets = []
    if family == "X1X2":
        A = FiniteCoeffAlgebra(kE, 1, ("X",))
        X = A.var(0)
        for a, b in _lines(kE):
            # R / (a X1 + b X2): one variable survives
            if a:
                images = {"X1": A.mul(A.kE_element(kE.neg(kE.mul(b, kE.inv(a)))), X), "X2": X}
            else:
                images = {"X1": X, "X2": np.zeros(A.dim, dtype=np.int64)}
            targets.append((f"L=({kE.to_str(a)})X1+({kE.to_str(b)})X2", reduce_T0(Mfam, A, images)))
    else:
        targets.append(("R/m^2", reduce_T0(Mfam)))
    records = []
    status = "PASS"
    for label, MX in targets:
        if corruption == "drop_nilpotent":
            MX = _drop_nilpotent(MX)
        elif corruption is not None:
            raise InadmissibleParameters(f"unknown corruption {corruption!r}")
        if restricted:
            MX = restrict_descent(MX)
        for chi in chars:
            source = _minimal_over(chi, MX, restricted)
            maps = find_morphisms(source, MX)
            bad = [m for m in maps if not m.nilpotent_image]
            records.append({"quotient": label, "character": chi.describe(), "hom_dim_Fp": len(maps),
                            "non_nilpotent": len(bad)})
            if bad:
                status = "FAIL"
    return DescentCheck(family, p, status, records, corruption)


# ---------------------------------------------------------------------------
# deformation rings

@dataclass
class DefRingAnswer:
    tau: TameType
    rhobar: str
    ring: str
    mu_gal: int
    family: str | None = None
    surjectivity_check: dict | None = None

    def to_json(self) -> dict:
        return {"tau": self.tau.describe(), "rhobar": self.rhobar, "ring": self.ring,
                "mu_gal": self.mu_gal, "family": self.family,
                "surjectivity_check": self.surjectivity_check}


RING_TEXT = {"zero": "0", "power_series_1var": "O_E[[Y]]", "X1X2_quadric": "O_E[[X1,X2]]/(X1 X2 - p w)"}


def match_form(tau: TameType, form: tuple | None) -> int | None:
    """Index of the form in the classification list, or None."""
    if form is None:
        return None
    forms = symbolic_forms(tau)
    return forms.index(form) if form in forms else None


def deformation_ring_answer(tau: TameType, rhobar_form: tuple | None, run_check: bool = True,
                            check_p: int | None = None) -> DefRingAnswer:
    """Ring and mu_gal for the form of rhobar restricted to inertia (None = anything else)."""
    p = tau.p
    idx = match_form(tau, rhobar_form)
    label = describe_form(rhobar_form) if rhobar_form else "other"
    if idx is None:
        return DefRingAnswer(tau, label, "zero", 0)
    if tau.niveau == 1:
        family = ("Y1", "Y2", "X1X2")[idx]
        ring, mu = ("power_series_1var", 1) if idx < 2 else ("X1X2_quadric", 2)
        values = None
        if family in ("Y1", "Y2"):
            jj = (tau.exponents[1] - tau.exponents[0]) % (p - 1)
            values = {"j": jj}
        else:
            values = {"j": (tau.exponents[1] - tau.exponents[0]) % (p - 1)}
    else:
        m = tau.exponents[0]
        i = (m - 1) % (p + 1) + 1
        ring, mu = "power_series_1var", 1
        if idx < 2:
            family = "X" if i in (1, p) else "Bprime"
            mm = m if (idx == 0) == (i != p) else (p * m) % (p * p - 1)
            values = {"m": mm}
        else:
            family = "B"
            mm = m if idx == 2 else (p * m) % (p * p - 1)
            values = {"m": mm}
            if (mm - 1) % (p + 1) == 0:
                family = "X"
    answer = DefRingAnswer(tau, label, ring, mu, family)
    if run_check:
        try:
            chk = check_no_subalgebra_descent(family, check_p or p, values)
            answer.surjectivity_check = {"status": chk.status, "family": family,
                                         "records": len(chk.records)}
        except (InadmissibleParameters, NoRootInE) as exc:
            answer.surjectivity_check = {"status": "NOT_RUN", "family": family, "reason": str(exc)}
        if answer.surjectivity_check["status"] == "FAIL":
            return DefRingAnswer(tau, label, "zero", 0, family, answer.surjectivity_check)
    return answer


# ---------------------------------------------------------------------------
# modular forms

def modular_form_reduction(p: int, j: int, a_p: PadicInput, chi_N_at_p: int,
                           level: int | None = None) -> ReductionReport:
    """rho_{f,p} mod p for a weight two newform of level Gamma_1(pN), nebentypus chi_p^j chi_N."""
    if not 1 <= j <= p - 2:
        raise InadmissibleParameters("j must lie in [1, p-2]")
    a_p = a_p.normalized(p)
    if a_p.val is None or not 0 <= a_p.val <= 1:
        raise InadmissibleParameters("slope must lie in [0, 1]")
    if chi_N_at_p % p == 0:
        raise InadmissibleParameters("chi_N(p) must be a unit")
    x1 = _p_over(a_p, p)
    x2 = PadicInput(a_p.val, a_p.unit * _inv_unit(chi_N_at_p, p))
    rep = reduce_principal(p, x1, x2, j, level)
    rep.input = {"kind": "modular_form", "p": p, "j": j, "a_p": a_p.describe(),
                 "chi_N_at_p": chi_N_at_p % p, "slope": str(a_p.val),
                 "x1": x1.describe(), "x2": x2.describe()}
    return rep
