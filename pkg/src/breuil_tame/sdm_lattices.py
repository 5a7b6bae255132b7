"""Strongly divisible modules with tame descent data, their builders and verifier.

A module is free on g_1..g_n over S_{F,R}.  It is stored through
  * the explicit Fil^1 generators (Fil^1 M = sum S h_k + Fil^1 S M),
  * the matrix of phi on the basis (column i holds phi(g_i)),
  * diagonal descent: g acts on g_i by zeta^{a_{i,c}} in embedding c, and g_phi
    fixes the basis,
  * optionally the embedding g = e P into S[1/p] (x) D, which is how N is
    obtained: on the e-basis N is zero, so N(g) = g P^{-1} N(P).
"""
from __future__ import annotations

import contextvars
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .coeff_rings import CoeffElement, CoeffRing
from .dp_series import (DescentElement, DPSeries, FieldDatum, descent_act, expand_by_E,
                        monodromy_N, phi, r0_vector, _certified_digits)
from .errors import DegenerateCase, InadmissibleParameters, PrecisionExhausted, UnsupportedMap
from .special_elements import solve_U, solve_V, solve_W, solve_X


# ---------------------------------------------------------------------------
# elements of S[1/p]

class PFrac:
    """s / p^k with s in S; absolute precision is level(s) - k."""

    __slots__ = ("s", "k")

    def __init__(self, s: DPSeries, k: int = 0):
        self.s, self.k = s, k

    def __repr__(self):
        return f"PFrac({self.s!r}, k={self.k})"

    def _lift(self, k: int) -> DPSeries:
        """s * p^(k - self.k); multiplying by p gains a digit of absolute precision."""
        d = k - self.k
        if d == 0:
            return self.s
        s = self.s
        level = s.level + d
        mods = s.field.ring.moduli(level)
        pd = s.field.p ** d
        data = [[None if lst is None else [(v * pd) % mods[i] for v in lst] for i, lst in enumerate(comp)]
                for comp in s.data]
        return DPSeries(s.field, data, level, s.U)

    def __add__(self, other: "PFrac") -> "PFrac":
        k = max(self.k, other.k)
        return PFrac(self._lift(k) + other._lift(k), k).normalized()

    def __neg__(self):
        return PFrac(-self.s, self.k)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, PFrac):
            return PFrac(self.s * other.s, self.k + other.k).normalized()
        return PFrac(self.s * other, self.k).normalized()

    def phi(self):
        return PFrac(phi(self.s), self.k)

    def N(self):
        return PFrac(monodromy_N(self.s), self.k)

    def act(self, g: DescentElement):
        return PFrac(descent_act(g, self.s), self.k)

    def normalized(self) -> "PFrac":
        s, k = self.s, self.k
        while k > 0 and s.level > 1:
            try:
                s = s.divide_p(1)
            except ValueError:
                break
            k -= 1
        return PFrac(s, k)

    def integral(self) -> DPSeries:
        n = self.normalized()
        if n.k:
            raise PrecisionExhausted("element of S[1/p] is not integral at working precision")
        return n.s

    @property
    def digits(self) -> int:
        return self.s.level - self.k

    def is_zero(self) -> bool:
        return self.s.is_zero()


# ---------------------------------------------------------------------------

Vector = list  # list of DPSeries, one per basis vector


@dataclass
class Embedding:
    """g_i = sum_k P[k][i] e_k and the matrix of phi on e (phi(e_i) = sum_k PhiD[k][i] e_k)."""

    P: list                       # P[k][i] PFrac
    phi_D: list                   # phi_D[k][i] PFrac (constants)
    det_scalar_inverse: PFrac     # inverse of the scalar part of det P
    descent_D: list               # exponents on e_i per embedding


@dataclass
class StronglyDivisibleModule:
    variant: str
    field: FieldDatum
    rank: int
    labels: tuple
    fil_gens: list                # list of Vector
    phi_mat: list                 # phi_mat[k][i]: coefficient of g_k in phi(g_i)
    descent: list                 # descent[i][c]
    embedding: Embedding | None = None
    identities: list = dc_field(default_factory=list)   # (name, callable -> (lhs, rhs))
    params: dict = dc_field(default_factory=dict)
    special: dict = dc_field(default_factory=dict)
    phi_shift: int = 0            # phi is phi_mat / p^phi_shift (nonzero only for corrupted modules)

    @property
    def ring(self) -> CoeffRing:
        return self.field.ring

    # -- module arithmetic ------------------------------------------------
    def zero_vector(self) -> Vector:
        return [DPSeries.zero(self.field) for _ in range(self.rank)]

    def basis_vector(self, i: int) -> Vector:
        v = self.zero_vector()
        v[i] = DPSeries.constant(self.field, 1)
        return v

    def phi_vec(self, v: Vector) -> Vector:
        out = self.zero_vector()
        for i, s in enumerate(v):
            if s.is_zero():
                continue
            ps = phi(s)
            for k in range(self.rank):
                out[k] = out[k] + ps * self.phi_mat[k][i]
        return out

    def descent_vec(self, g: DescentElement, v: Vector) -> Vector:
        field = self.field
        g = g.normalized(field)
        out = []
        for i, s in enumerate(v):
            t = descent_act(g, s)
            if g.t:
                zs = [field.ring.element(field.zeta_powers[(g.t * self.descent[i][c]) % field.e])
                      for c in range(field.f)]
                t = t.scale_split(zs)
            out.append(t)
        return out

    def fil_generators_full(self) -> list:
        """Explicit generators together with E g_i."""
        E = DPSeries.E(self.field)
        extra = []
        for i in range(self.rank):
            v = self.zero_vector()
            v[i] = E
            extra.append(v)
        return list(self.fil_gens) + extra

    @property
    def N_matrix(self):
        return derived_N(self)


def vec_sub(a: Vector, b: Vector) -> Vector:
    return [x - y for x, y in zip(a, b)]


def vec_scale(v: Vector, s) -> Vector:
    return [x * s for x in v]


def vec_is_zero(v: Vector) -> bool:
    return all(x.is_zero() for x in v)


def vec_divide_p(v: Vector) -> Vector:
    return [x.divide_p(1) for x in v]


# ---------------------------------------------------------------------------
# builders

@dataclass
class SdmParameters:
    variant: str
    p: int
    values: dict
    level: int = 6
    U: int | None = None
    branch: str | None = None


def _series_ring(field: FieldDatum, x) -> CoeffElement:
    ring = field.ring
    if isinstance(x, CoeffElement):
        if x.ring is ring:
            return x
        if x.ring.family is None and ring.family is not None:
            return ring.from_base(x)
        return x
    return ring.from_int(int(x))


_OVERRIDES: contextvars.ContextVar[dict] = contextvars.ContextVar("special_overrides", default={})


def _special(F, name: str, solver) -> DPSeries:
    """The named special element, unless an override is active (used for tampering)."""
    forced = _OVERRIDES.get().get(name)
    if forced is not None:
        return DPSeries.constant(F, forced) if isinstance(forced, int) else forced
    return solver().series


def _mono(F, j, coeff=1, pden=0):
    return DPSeries.monomial(F, j, coeff, p_denominator=pden)


def _const(F, x):
    return DPSeries.constant(F, x)


def _E(F):
    return DPSeries.E(F)


def _c(F):
    return DPSeries.c_element(F)


def build_character(field: FieldDatum, a, exponents: tuple, variant: str = "char") -> StronglyDivisibleModule:
    """Rank one: phi(e) = a^-1 e, Fil^1 M = Fil^1 S e, descent exponents per embedding."""
    a = _series_ring(field, a)
    if not a.is_unit():
        raise InadmissibleParameters("a must be a unit")
    phi_mat = [[_const(field, a.inverse())]]
    P = [[PFrac(_const(field, 1))]]
    emb = Embedding(P, [[PFrac(_const(field, a.inverse()))]], PFrac(_const(field, 1)), [tuple(exponents)])
    return StronglyDivisibleModule(variant, field, 1, ("e",), [], phi_mat, [tuple(exponents)], emb,
                                   params={"a": a, "exponents": tuple(exponents)})


def build_char_F1(ring: CoeffRing, a, j: int, U=None) -> StronglyDivisibleModule:
    F = FieldDatum("F1", ring, U=U)
    return build_character(F, a, ((j % F.e),), "char_F1")


def build_char_F2(ring: CoeffRing, a, exponent: int, over: str = "Qp", U=None) -> StronglyDivisibleModule:
    """Over Q_p the exponent j is that of omega~^j; over Q_{p^2} it is m of omega~_2^m."""
    F = FieldDatum("F2", ring, base=over, U=U)
    p = ring.p
    m = (p + 1) * exponent if over == "Qp" else exponent
    return build_character(F, a, (m % F.e, m % F.e), "char_F2" if over == "Qp" else "char_F2_Qp2")


def _check_principal(x1, x2, w, j, p):
    if not 1 <= j <= p - 2:
        raise InadmissibleParameters(f"j must lie in [1, p-2], got {j}")
    if not w.is_unit():
        raise InadmissibleParameters("w must be a unit")
    if j == 1 and x1.is_unit() and (x1 * x1 - w).residue() == 0:
        raise DegenerateCase("x1^2 = w mod m_E with j = 1: reduction has nontrivial endomorphisms")
    if j == p - 2 and x2.is_unit() and (x2 * x2 - w).residue() == 0:
        raise DegenerateCase("x2^2 = w mod m_E with j = p-2: reduction has nontrivial endomorphisms")


def build_principal(field: FieldDatum, x1, x2, j: int, variant: str | None = None,
                    allow_degenerate: bool = False) -> StronglyDivisibleModule:
    """The lattices inside D_{x1,x2} (diagonal phi, val(x1 x2) = 1)."""
    p = field.p
    x1, x2 = _series_ring(field, x1), _series_ring(field, x2)
    ring = field.ring
    # w = x1 x2 / p
    w = _w_from(x1, x2)
    if not allow_degenerate:
        _check_principal(x1, x2, w, j, p)
    if variant is None:
        if ring.family is None:
            v1 = x1.valuation()
            variant = "prin_case1" if v1 == 0 else "prin_case2" if v1 == 1 else "prin_case3"
        else:
            raise InadmissibleParameters("family modules need an explicit variant")
    if variant in ("prin_case1", "family_Y1"):
        return _build_case1(field, x1, x2, w, j, variant)
    if variant in ("prin_case2", "family_Y2"):
        return _build_case2(field, x1, x2, w, j, variant)
    if variant in ("prin_case3", "family_X1X2"):
        return _build_case3(field, x1, x2, w, j, variant)
    raise InadmissibleParameters(f"unknown principal variant {variant!r}")


def _w_from(x1: CoeffElement, x2: CoeffElement) -> CoeffElement:
    from .coeff_rings import exact_divide_p
    ring = x1.ring
    if ring.family == "X1X2":
        return ring.element(list(ring.w), x1.level)
    return exact_divide_p(x1 * x2, 1)


def _principal_embedding(F, x1, x2, w, g1_e, g2_e, descent_D):
    P = [[g1_e[0], g2_e[0]], [g1_e[1], g2_e[1]]]
    phi_D = [[PFrac(_const(F, x1)), PFrac(DPSeries.zero(F))],
             [PFrac(DPSeries.zero(F)), PFrac(_const(F, x2))]]
    if x1.is_unit():
        det_inv = PFrac(_const(F, -x1.inverse()))
    else:
        det_inv = PFrac(_const(F, -x2 * w.inverse()), 1)   # (-x1)^-1 = -x2 / (p w)
    return Embedding(P, phi_D, det_inv, descent_D)


def _build_case1(F, x1, x2, w, j, variant):
    p, e = F.p, F.e
    V = _special(F, "V", lambda: solve_V(x1, w, j, F))
    a = x1 * x1 * w.inverse()
    phi_mat = [[_const(F, x1), _mono(F, p * j - e) * (_mono(F, e) + V.times_p())],
               [DPSeries.zero(F), _const(F, x2)]]
    h = [-_mono(F, j), _const(F, x1)]
    descent = [(0,), (j % e,)]
    z = PFrac(DPSeries.zero(F))
    g1_e = [PFrac(_const(F, -x1)), z]
    g2_e = [PFrac((_mono(F, p * j - e) * _E(F) * V).scale(a), 1), PFrac(_const(F, 1))]
    emb = _principal_embedding(F, x1, x2, w, g1_e, g2_e, [(0,), (j % e,)])
    M = StronglyDivisibleModule(variant, F, 2, ("g1", "g2"), [h], phi_mat, descent, emb,
                                params={"x1": x1, "x2": x2, "w": w, "j": j}, special={"V": V})

    def key_identity():
        lhs = M.phi_vec(h)
        rhs = [(_mono(F, p * j - e) * V).scale(x1).times_p(), _const(F, w).times_p()]
        return lhs, rhs

    M.identities.append(("phi(-u^j g1 + x1 g2) = p(w g2 + x1 u^(pj-e) V g1)", key_identity))
    return M


def _build_case2(F, x1, x2, w, j, variant):
    p, e = F.p, F.e
    Uel = _special(F, "U", lambda: solve_U(x2, w, j, F))
    ex = p * (e - j) - e
    phi_mat = [[_const(F, x1), DPSeries.zero(F)],
               [-(_mono(F, ex) * (_mono(F, e) + Uel.times_p())).scale(w), _const(F, x2)]]
    h = [_const(F, x2), _mono(F, e - j, w)]
    descent = [(0,), (j % e,)]
    z = PFrac(DPSeries.zero(F))
    g1_e = [PFrac(_const(F, -x1)), PFrac((_mono(F, ex) * _E(F) * Uel).scale(x2), 1)]
    g2_e = [z, PFrac(_const(F, 1))]
    emb = _principal_embedding(F, x1, x2, w, g1_e, g2_e, [(0,), (j % e,)])
    M = StronglyDivisibleModule(variant, F, 2, ("g1", "g2"), [h], phi_mat, descent, emb,
                                params={"x1": x1, "x2": x2, "w": w, "j": j}, special={"U": Uel})

    def key_identity():
        lhs = M.phi_vec(h)
        rhs = [_const(F, w).times_p(), -(_mono(F, ex) * Uel).scale(w * x2).times_p()]
        return lhs, rhs

    M.identities.append(("phi(x2 g1 + w u^(e-j) g2) = p(w g1 - w x2 u^(p(e-j)-e) U g2)", key_identity))
    return M


def _build_case3(F, x1, x2, w, j, variant):
    p, e = F.p, F.e
    k = (p + 1) * j
    Vp = _special(F, "Vprime", lambda: solve_V(x1, w, j, F))
    Up = _special(F, "Uprime", lambda: solve_U(x2, w, j, F))
    one = _const(F, 1)
    t = _mono(F, e * p, pden=1) + _mono(F, (p - 1) * e)           # u^{ep}/p + u^{(p-1)e}
    D = one + Up * Vp * (_mono(F, e * p, pden=1) + _mono(F, (p - 1) * e).scale(2)
                         + _mono(F, (p - 2) * e).times_p())
    Dinv = D.inverse()
    exA = p * (e - k) - e
    exB = p * k - e
    phi_mat = [[(Dinv * (one + t * Vp * (Up - 1))).scale(x1), Dinv * _mono(F, exB) * (_mono(F, e) + Vp.times_p())],
               [-(Dinv * _mono(F, exA) * (_mono(F, e) + Up.times_p())).scale(w),
                (Dinv * (one + t * Up * (Vp - 1))).scale(x2)]]
    h1 = [-_mono(F, k), _const(F, x1)]
    h2 = [_const(F, x2), _mono(F, e - k, w)]
    kk = k % e
    descent = [(0, 0), (kk, kk)]
    a = x1 * x1 * w.inverse()
    g1_e = [PFrac(_const(F, -x1)), PFrac((_mono(F, exA) * _E(F) * Up).scale(x2), 1)]
    g2_e = [PFrac((_mono(F, exB) * _E(F) * Vp).scale(a), 1), PFrac(one)]
    emb = _principal_embedding(F, x1, x2, w, g1_e, g2_e, [(0, 0), (kk, kk)])
    M = StronglyDivisibleModule(variant, F, 2, ("g1", "g2"), [h1, h2], phi_mat, descent, emb,
                                params={"x1": x1, "x2": x2, "w": w, "j": j},
                                special={"Vprime": Vp, "Uprime": Up, "D": D})
    c1 = _mono(F, e * p, pden=1) + one

    def id1():
        lhs = M.phi_vec(h1)
        tail = (_E(F) * c1 * _mono(F, p * e * (p - 1 - j), pden=1) * phi(Up)).scale(x2)
        r1 = Dinv * _mono(F, exB) * Vp * (_const(F, x1) - tail)
        r2 = (Dinv * (one + t * Up * Vp + _mono(F, e * p, pden=1) * (one - Up))).scale(w)
        return lhs, [r1.times_p(), r2.times_p()]

    def id2():
        lhs = M.phi_vec(h2)
        tail = (_E(F) * c1 * _mono(F, p * e * j, pden=1) * phi(Vp)).scale(x1)
        r1 = Dinv * (one + t * Up * Vp + _mono(F, e * p, pden=1) * (one - Vp))
        r2 = Dinv * _mono(F, exA) * Up * (_const(F, -x2) + tail)
        return lhs, [r1.scale(w).times_p(), r2.scale(w).times_p()]

    M.identities.append(("phi(-u^k g1 + x1 g2) = p D^-1 (...)", id1))
    M.identities.append(("phi(x2 g1 + w u^(e-k) g2) = p w D^-1 (...)", id2))
    return M


def build_supercuspidal(field: FieldDatum, m: int, b, w, variant: str | None = None,
                        branch: str | None = None) -> StronglyDivisibleModule:
    """Lattices in D_{m,[1:b]} with x = p w."""
    p, e = field.p, field.e
    if field.which != "F2":
        raise InadmissibleParameters("supercuspidal modules live over F2")
    m = m % e
    if m % (p + 1) == 0:
        raise InadmissibleParameters("p+1 divides m")
    i = (m - 1) % (p + 1) + 1
    b, w = _series_ring(field, b), _series_ring(field, w)
    if not w.is_unit():
        raise InadmissibleParameters("w must be a unit")
    if variant is None:
        variant = "super_i1" if (i == 1 and b.residue() == 0 and not b.is_zero()) or \
            (i == 1 and b.is_zero()) else "super_general"
        if i == 1 and b.residue() == 0:
            variant = "super_i1"
    if variant in ("super_i1", "family_X"):
        if i != 1:
            raise InadmissibleParameters("the X-shaped lattice needs i = 1")
        return _build_super_X(field, m, b, w, variant, branch)
    if variant in ("super_general", "family_B", "family_Bprime"):
        if i == 1 and variant != "super_general":
            raise InadmissibleParameters("the W-shaped family needs i > 1")
        return _build_super_W(field, m, i, b, w, variant, branch)
    raise InadmissibleParameters(f"unknown supercuspidal variant {variant!r}")


def _super_embedding(F, g1_e, g2_e, w, m, det_inv):
    p, e = F.p, F.e
    P = [[g1_e[0], g2_e[0]], [g1_e[1], g2_e[1]]]
    zero = PFrac(DPSeries.zero(F))
    phi_D = [[zero, PFrac(_const(F, w).times_p())], [PFrac(_const(F, 1)), zero]]
    desc = [tuple((m * p ** c) % e for c in range(F.f)), tuple((m * p ** (c + 1)) % e for c in range(F.f))]
    return Embedding(P, phi_D, det_inv, desc)


def _build_super_W(F, m, i, b, w, variant, branch):
    p, e = F.p, F.e
    k = (p - 1) * i
    W = _special(F, "W", lambda: solve_W(b, w, i, F, branch))
    phiW = phi(W)
    b2 = b * b
    phi_mat = [[-(W * _mono(F, p * (e - k))).scale(b),
                _const(F, w) - (W * phiW * _mono(F, p * e * (p + 1 - i), pden=1)).scale(b2)],
               [_const(F, p), (phiW * _mono(F, p * p * (e - k))).scale(b)]]
    h = [(_mono(F, e * (p - i)) * W).scale(b2) - 1, _mono(F, e - k, b)]
    desc = [tuple((m * p ** c) % e for c in range(F.f)), tuple((m * p ** (c + 1)) % e for c in range(F.f))]
    one = _const(F, 1)
    g1_e = [PFrac(one), PFrac(DPSeries.zero(F))]
    g2_e = [PFrac((W * _mono(F, p * (e - k))).scale(b), 1), PFrac(one, 1)]
    emb = _super_embedding(F, g1_e, g2_e, w, m, PFrac(_const(F, p)))
    M = StronglyDivisibleModule(variant, F, 2, ("g1", "g2"), [h], phi_mat, desc, emb,
                                params={"m": m, "i": i, "b": b, "w": w, "branch": branch},
                                special={"W": W})

    def key_identity():
        lhs = M.phi_vec(h)
        rhs = [DPSeries.zero(F), W.inverse().scale(w).times_p()]
        return lhs, rhs

    M.identities.append(("phi(b u^(e-k) g2 + (u^(e(p-i)) b^2 W - 1) g1) = p w W^-1 g2", key_identity))
    return M


def _build_super_X(F, m, b, w, variant, branch):
    p, e = F.p, F.e
    X = _special(F, "X", lambda: solve_X(b, w, F, branch))
    phiX = phi(X)
    winv = w.inverse()
    phi_mat = [[phiX * _mono(F, p * p * (p - 1)), _const(F, w).times_p()],
               [_const(F, 1) - (X * phiX * _mono(F, p * e, pden=1)).scale(winv), -(X * _mono(F, p * (p - 1)))]]
    h = [_mono(F, p - 1), X.scale(winv) + _const(F, b)]
    desc = [tuple((m * p ** c) % e for c in range(F.f)), tuple((m * p ** (c + 1)) % e for c in range(F.f))]
    one = _const(F, 1)
    g1_e = [PFrac(one), PFrac((X * _mono(F, p * (p - 1))).scale(winv), 1)]
    g2_e = [PFrac(DPSeries.zero(F)), PFrac(one)]
    emb = _super_embedding(F, g1_e, g2_e, w, m, PFrac(one))
    M = StronglyDivisibleModule(variant, F, 2, ("g1", "g2"), [h], phi_mat, desc, emb,
                                params={"m": m, "i": 1, "b": b, "w": w, "branch": branch},
                                special={"X": X})

    def key_identity():
        lhs = vec_divide_p(M.phi_vec(h))
        rhs = [X.inverse().scale(w), DPSeries.zero(F)]
        return lhs, rhs

    M.identities.append(("phi_1(h) = w X^-1 g1", key_identity))
    return M


# ---------------------------------------------------------------------------
# families

def family_ring(p: int, kind: str, level: int = 3, n: int = 1, eE: int = 1, w=None) -> CoeffRing:
    if kind in ("Y", "B"):
        return CoeffRing(p, n, eE, level, kind)
    if kind == "X1X2":
        return CoeffRing(p, n, eE, level, "X1X2", w=w if w is not None else (1,))
    raise UnsupportedMap(f"unknown family {kind!r}")


def build_family(variant: str, p: int, values: dict, level: int = 3, U: int | None = None,
                 branch: str | None = None) -> StronglyDivisibleModule:
    """Coefficient families over truncated power series rings.

    family_Y1/Y2: x = x~ (1 + Y) over F1;  family_X1X2: x1 = X1, x2 = X2 over F2;
    family_B: b = B;  family_Bprime: b = b~ (1 + B);  family_X: b = B with i = 1.
    """
    if variant in ("family_Y1", "family_Y2"):
        R = family_ring(p, "Y", level, values.get("n", 1))
        F = FieldDatum("F1", R, U=U)
        w = R.from_int(values["w"])
        Y = R.gen("Y")
        xt = R.from_int(values["xt"])
        x = xt * (1 + Y)
        other = (w * p) * x.inverse()
        x1, x2 = (x, other) if variant == "family_Y1" else (other, x)
        j = values["j"]
        return build_principal(F, x1, x2, j, variant)
    if variant == "family_X1X2":
        w = values["w"]
        R = family_ring(p, "X1X2", level, 2, 1, w=(w,))
        F = FieldDatum("F2", R, U=U)
        return build_principal(F, R.gen("X1"), R.gen("X2"), values["j"], variant)
    if variant in ("family_B", "family_Bprime", "family_X"):
        R = family_ring(p, "B", level, 2, values.get("eE", 1))
        F = FieldDatum("F2", R, U=U)
        B = R.gen("B")
        w = R.from_int(values["w"])
        if variant == "family_Bprime":
            b = R.from_int(values["bt"]) * (1 + B)
        else:
            b = B
        return build_supercuspidal(F, values["m"], b, w, variant, branch)
    raise UnsupportedMap(f"unknown family variant {variant!r}")


GUARD_DIGITS = 4
FAMILY_GUARD_DIGITS = 2


def working_level(params: SdmParameters) -> int:
    """Ring level used to build: the requested digits plus a guard for the 1/p in the embedding."""
    guard = FAMILY_GUARD_DIGITS if params.variant.startswith("family_") else GUARD_DIGITS
    return params.level + guard


def build_sdm(params: SdmParameters) -> StronglyDivisibleModule:
    v, p, vals = params.variant, params.p, params.values
    if v.startswith("family_"):
        return build_family(v, p, vals, working_level(params), params.U, params.branch)
    ring = vals.get("ring")
    if ring is None:
        ring = CoeffRing(p, vals.get("n", 1 if v in ("char_F1", "prin_case1", "prin_case2") else 2),
                         vals.get("eE", 2 if v == "prin_case3" else 1), working_level(params))
    if v == "char_F1":
        return build_char_F1(ring, vals["a"], vals["j"], params.U)
    if v == "char_F2":
        return build_char_F2(ring, vals["a"], vals["j"], "Qp", params.U)
    if v == "char_F2_Qp2":
        return build_char_F2(ring, vals["a"], vals["m"], "Qp2", params.U)
    if v in ("prin_case1", "prin_case2", "prin_case3"):
        F = FieldDatum("F1" if v != "prin_case3" else "F2", ring, U=params.U)
        return build_principal(F, vals["x1"], vals["x2"], vals["j"], v)
    if v in ("super_general", "super_i1"):
        F = FieldDatum("F2", ring, U=params.U)
        return build_supercuspidal(F, vals["m"], vals["b"], vals["w"], v, params.branch)
    raise InadmissibleParameters(f"unknown variant {v!r}")


# ---------------------------------------------------------------------------
# Fil^1 modulo Fil^1 S: the R-span of the r_0 images

class FilQuotient:
    """Image of Fil^1 M in M / Fil^1 S M = (R[u]/E)^n, one block per embedding.

    The R-span of u^a r_0(h_k) is reduced by unit-pivot elimination.  It is a
    free direct summand exactly when the elimination leaves no remainder.
    """

    def __init__(self, M: StronglyDivisibleModule, gens: list | None = None):
        self.M = M
        F = M.field
        self.ring = F.ring
        self.e = F.e
        gens = M.fil_gens if gens is None else gens
        self.digits = min(min(g.level for v in gens for g in v) if gens else F.level,
                          _certified_digits(F.level, F.U // F.e, F.p))
        self.blocks = []
        self.summand = True
        for c in range(F.f):
            vecs = []
            for h in gens:
                base = self._r0_block(h, c)
                for a in range(self.e):
                    vecs.append(self._shift_u(base, a))
            elim = (_IntElimination if self.ring.family is None else _RingElimination)(
                self.ring, self.digits)
            ok = elim.absorb(vecs)
            self.summand = self.summand and ok
            self.blocks.append(elim)

    def _r0_block(self, v: Vector, c: int) -> list:
        """r_0 coordinates of a module vector in embedding c: list over (i, r) of raw tuples."""
        out = []
        for s in v:
            r0 = r0_vector(s.at(self.digits))[c]
            out.extend(r0)
        return out

    def _shift_u(self, vec: list, a: int) -> list:
        """Multiply an element of (R[u]/E)^n by u^a, using u^e = -p."""
        if a == 0:
            return vec
        e, ring, p = self.e, self.ring, self.ring.p
        n = len(vec) // e
        out = []
        mods = ring.moduli(self.digits)
        for i in range(n):
            block = vec[i * e:(i + 1) * e]
            new = [None] * e
            for r, coords in enumerate(block):
                t = r + a
                factor = 1
                while t >= e:
                    t -= e
                    factor *= -p
                new[t] = tuple((factor * x) % m for x, m in zip(coords, mods))
            out.extend(new)
        return out

    def contains(self, v: Vector) -> bool:
        for c, elim in enumerate(self.blocks):
            if not elim.reduces_to_zero(self._r0_block(v, c)):
                return False
        return True


class _IntElimination:
    """Unit-pivot elimination over Z/p^N after flattening a scalar O_E to Z_p-coordinates."""

    def __init__(self, ring: CoeffRing, digits: int):
        self.ring, self.p = ring, ring.p
        self.mod = ring.p ** digits
        self.pivots: list[tuple[int, np.ndarray]] = []

    def _flatten(self, vec) -> np.ndarray:
        dtype = np.int64 if self.mod < 2 ** 31 else object
        return np.array([x % self.mod for coords in vec for x in coords], dtype=dtype)

    def _multiples(self, vec) -> list[np.ndarray]:
        """Z_p-spanning set of the R-line through vec."""
        ring = self.ring
        out = []
        for b in range(ring.dO):
            basis = [0] * ring.dim
            basis[b] = 1
            out.append(self._flatten([ring.raw_mul(basis, coords, 64) for coords in vec]))
        return out

    def _reduce(self, v: np.ndarray) -> np.ndarray:
        for col, piv in self.pivots:
            c = v[col]
            if c:
                v = (v - c * piv) % self.mod
        return v

    def _add_pivot(self, v: np.ndarray) -> bool:
        units = np.nonzero(v % self.p)[0]
        if len(units) == 0:
            return False
        col = int(units[0])
        inv = pow(int(v[col]), -1, self.mod)
        v = (v * inv) % self.mod
        self.pivots.append((col, v))
        return True

    def absorb(self, vecs) -> bool:
        pending = []
        for vec in vecs:
            for v in self._multiples(vec):
                pending.append(v)
        changed = True
        while changed:
            changed = False
            rest = []
            for v in pending:
                v = self._reduce(v)
                if not v.any():
                    continue
                if self._add_pivot(v):
                    changed = True
                else:
                    rest.append(v)
            pending = rest
        self.leftover = pending
        return not pending

    def reduces_to_zero(self, vec) -> bool:
        return all(not self._reduce(v).any() for v in self._multiples(vec))


class _RingElimination:
    """Unit-pivot elimination directly over a (family) coefficient ring."""

    def __init__(self, ring: CoeffRing, digits: int):
        self.ring, self.level = ring, digits
        self.pivots: list[tuple[int, list]] = []

    def _reduce(self, v):
        ring, lv = self.ring, self.level
        for col, piv in self.pivots:
            c = v[col]
            if any(c):
                v = [ring.reduce([a - b for a, b in zip(x, ring.raw_mul(c, y, lv))], lv)
                     for x, y in zip(v, piv)]
        return v

    def _is_zero(self, v) -> bool:
        return not any(any(x) for x in v)

    def _add_pivot(self, v) -> bool:
        ring = self.ring
        for col, x in enumerate(v):
            el = ring.element(x, self.level)
            if el.residue() != 0:
                inv = el.inverse().coords
                v = [ring.raw_mul(inv, y, self.level) for y in v]
                self.pivots.append((col, v))
                return True
        return False

    def absorb(self, vecs) -> bool:
        ring = self.ring
        pending = []
        # R-multiples by the k_E basis are needed when k_E is not F_p
        for vec in vecs:
            vec = [ring.reduce(x, self.level) for x in vec]
            pending.append(vec)
            if ring.n == 2:
                t = ring.gen("t", self.level).coords
                pending.append([ring.raw_mul(t, x, self.level) for x in vec])
        changed = True
        while changed:
            changed = False
            rest = []
            for v in pending:
                v = self._reduce(v)
                if self._is_zero(v):
                    continue
                if self._add_pivot(v):
                    changed = True
                else:
                    rest.append(v)
            pending = rest
        self.leftover = pending
        return not pending

    def reduces_to_zero(self, vec) -> bool:
        vec = [self.ring.reduce(x, self.level) for x in vec]
        return self._is_zero(self._reduce(vec))


# ---------------------------------------------------------------------------
# the monodromy operator, derived from the embedding

def _mat_mul(A, B):
    n, m, q = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(q):
            acc = None
            for k in range(m):
                t = A[i][k] * B[k][j]
                acc = t if acc is None else acc + t
            row.append(acc)
        out.append(row)
    return out


def embedding_inverse(M: StronglyDivisibleModule):
    """P^{-1} as a matrix of PFrac, using det P = scalar * unit series."""
    emb = M.embedding
    P = emb.P
    if M.rank == 1:
        d = P[0][0]
        unit = (d * emb.det_scalar_inverse).integral()
        return [[PFrac(unit.inverse()) * emb.det_scalar_inverse]]
    det = P[0][0] * P[1][1] - P[0][1] * P[1][0]
    unit = (det * emb.det_scalar_inverse).integral()
    inv = PFrac(unit.inverse()) * emb.det_scalar_inverse
    return [[P[1][1] * inv, -P[0][1] * inv], [-P[1][0] * inv, P[0][0] * inv]]


def derived_N(M: StronglyDivisibleModule):
    """Matrix of N on the g-basis: N(g_i) = sum_k Nmat[k][i] g_k, with N(e) = 0."""
    if M.embedding is None:
        return None
    Pinv = embedding_inverse(M)
    NP = [[x.N() for x in row] for row in M.embedding.P]
    prod = _mat_mul(Pinv, NP)
    return [[x.integral() for x in row] for row in prod]


# ---------------------------------------------------------------------------
# verification

@dataclass
class AxiomResult:
    status: str
    detail: str = ""
    u_degree: int = 0
    p_digits: int = 0

    def as_dict(self):
        return {"status": self.status, "detail": self.detail,
                "u_degree": self.u_degree, "p_digits": self.p_digits}


def rank_mod_p(A: np.ndarray, p: int) -> int:
    A = np.array(A, dtype=np.int64) % p
    if A.size == 0:
        return 0
    rank, rows, cols = 0, A.shape[0], A.shape[1]
    for col in range(cols):
        piv = next((r for r in range(rank, rows) if A[r, col]), None)
        if piv is None:
            continue
        A[[rank, piv]] = A[[piv, rank]]
        A[rank] = (A[rank] * pow(int(A[rank, col]), -1, p)) % p
        for r in range(rows):
            if r != rank and A[r, col]:
                A[r] = (A[r] - A[r, col] * A[rank]) % p
        rank += 1
    return rank


def _residue_matrix_rank(cols: list, field: FieldDatum, c: int) -> int:
    """Rank over F_p of the matrix whose columns are module vectors reduced mod (p, u, m_R)."""
    ring = field.ring
    rows = []
    for v in cols:
        col = []
        for s in v:
            r = s.coefficient(0, c)
            res = r.residue()
            col.extend(ring.kE.parts(res)[: ring.n])
        rows.append(col)
        if ring.n == 2:
            # k_E-multiples: t times the column
            tcol = []
            for s in v:
                res = ring.kE.mul(s.coefficient(0, c).residue(), ring.kE.make(0, 1))
                tcol.extend(ring.kE.parts(res)[:2])
            rows.append(tcol)
    return rank_mod_p(np.array(rows, dtype=np.int64), ring.p) // ring.n


def verify_sdm(M: StronglyDivisibleModule, check_identities: bool = True) -> dict:
    F = M.field
    U = F.U
    lv = F.level
    rep: dict[str, AxiomResult] = {}
    fq = FilQuotient(M)
    digits = fq.digits

    rep["1"] = AxiomResult("PASS", "Fil^1 S M is part of the stored generating set", U, lv)
    rep["2"] = AxiomResult("PASS" if fq.summand else "FAIL",
                           "image of Fil^1 M in M/Fil^1 S M is a free R-direct summand"
                           if fq.summand else "image of Fil^1 M is not a direct summand", U, digits)
    if M.phi_shift:
        rep["3"] = AxiomResult("FAIL", "phi does not preserve M: basis images have p in the denominator", U, lv)
    else:
        rep["3"] = AxiomResult("PASS", "phi is the semilinear extension of the basis images", U, lv)

    # (4): divisibility and generation
    images, ok4, detail4 = [], True, ""
    for h in M.fil_gens:
        ph = M.phi_vec(h)
        try:
            images.append([x.divide_p(M.phi_shift + 1) for x in ph])
        except ValueError:
            ok4, detail4 = False, "phi of a Fil^1 generator is not divisible by p"
            break
    if ok4 and M.phi_shift:
        ok4, detail4 = False, "phi_1 of the Fil^1 generators is defined but phi(M) is not in M"
    if ok4:
        c = DPSeries.c_element(F)
        cols = images + [[c * M.phi_mat[k][i] for k in range(M.rank)] for i in range(M.rank)]
        for comp in range(F.f):
            if _residue_matrix_rank(cols, F, comp) < M.rank:
                ok4, detail4 = False, f"phi_1(Fil^1 M) does not generate M (embedding {comp})"
                break
        else:
            detail4 = "phi(Fil^1) in pM and phi_1 images generate mod (p, u, m_R)"
    rep["4"] = AxiomResult("PASS" if ok4 else "FAIL", detail4, U, lv - 1)

    # (5)-(8), (12 for N): through the derived N
    Nmat = None
    try:
        Nmat = derived_N(M)
        if Nmat is None:
            raise PrecisionExhausted("no embedding into S[1/p] (x) D is attached")
    except PrecisionExhausted as exc:
        for ax in ("5", "6", "7", "8"):
            rep[ax] = AxiomResult("UNKNOWN", f"N not computable: {exc}", U, 0)
    if Nmat is not None:
        nlv = min(x.level for row in Nmat for x in row)
        rep["5"] = AxiomResult("PASS", "N is the derivation extending -u d/du", U, nlv)
        ok6 = True
        for i in range(M.rank):
            for k in range(M.rank):
                # N(phi(g_i)) = p phi(N(g_i)) in coordinates
                lhs = monodromy_N(M.phi_mat[k][i])
                for l in range(M.rank):
                    lhs = lhs + M.phi_mat[l][i] * Nmat[k][l]
                rhs = None
                for l in range(M.rank):
                    t = phi(Nmat[l][i]) * M.phi_mat[k][l]
                    rhs = t if rhs is None else rhs + t
                if not (lhs - rhs.times_p()).is_zero():
                    ok6 = False
        rep["6"] = AxiomResult("PASS" if ok6 else "FAIL", "N phi = p phi N on the basis", U, nlv)
        E = DPSeries.E(F)
        ok7 = True
        for h in M.fil_gens:
            Nh = _apply_N(M, Nmat, h)
            if not fq.contains([E * x for x in Nh]):
                ok7 = False
        rep["7"] = AxiomResult("PASS" if ok7 else "FAIL", "E N(Fil^1 M) in Fil^1 M", U, min(nlv, digits))
        ok8 = all(x.coefficient(0, c).is_zero() for row in Nmat for x in row for c in range(F.f))
        rep["8"] = AxiomResult("PASS" if ok8 else "FAIL", "N(M) in J M: constant terms of N vanish", U, nlv)

    # descent
    gens = F.descent_generators
    rep["9"] = AxiomResult("PASS", "descent is the semilinear extension of diagonal characters", U, lv)
    ok10, det10 = _check_group_law(M)
    rep["10"] = AxiomResult("PASS" if ok10 else "FAIL", det10, U, lv)
    ok11 = True
    for g in gens:
        for h in M.fil_gens:
            if not fq.contains(M.descent_vec(g, h)):
                ok11 = False
    rep["11"] = AxiomResult("PASS" if ok11 else "FAIL", "descent preserves Fil^1 M", U, digits)
    ok12, det12 = True, "descent commutes with phi and N"
    for g in gens:
        for i in range(M.rank):
            lhs = M.descent_vec(g, M.phi_vec(M.basis_vector(i)))
            rhs = M.phi_vec(M.descent_vec(g, M.basis_vector(i)))
            if not vec_is_zero(vec_sub(lhs, rhs)):
                ok12, det12 = False, f"descent does not commute with phi on g{i + 1}"
            if Nmat is not None:
                nb = _apply_N(M, Nmat, M.basis_vector(i))
                lhs = M.descent_vec(g, nb)
                rhs = _apply_N(M, Nmat, M.descent_vec(g, M.basis_vector(i)))
                if not vec_is_zero(vec_sub(lhs, rhs)):
                    ok12, det12 = False, f"descent does not commute with N on g{i + 1}"
    rep["12"] = AxiomResult("PASS" if ok12 else "FAIL", det12, U, lv)

    out = {"variant": M.variant, "axioms": {k: v.as_dict() for k, v in rep.items()}}
    if M.embedding is not None:
        out["embedding_consistent"] = check_embedding(M)
    if check_identities:
        ids = {}
        for name, fn in M.identities:
            lhs, rhs = fn()
            ids[name] = vec_is_zero(vec_sub(lhs, rhs))
        out["identities"] = ids
    out["all_pass"] = all(v.status == "PASS" for v in rep.values()) and \
        all(out.get("identities", {}).values()) and out.get("embedding_consistent", True)
    return out


def _apply_N(M, Nmat, v: Vector) -> Vector:
    out = [monodromy_N(s) for s in v]
    for i, s in enumerate(v):
        if s.is_zero():
            continue
        for k in range(M.rank):
            out[k] = out[k] + s * Nmat[k][i]
    return out


def _check_group_law(M: StronglyDivisibleModule) -> tuple[bool, str]:
    """Exponent bookkeeping of the diagonal descent: g^e = 1 and g_phi g g_phi = g^p."""
    F = M.field
    e, p, f = F.e, F.p, F.f
    for i, exps in enumerate(M.descent):
        if len(exps) != f:
            return False, f"descent data on g{i + 1} has the wrong number of embeddings"
        if F.has_gphi:
            for c in range(f):
                if exps[(c + 1) % f] % e != (p * exps[c]) % e:
                    return False, f"g_phi g g_phi != g^p on g{i + 1}"
    # cross-check on a sample vector: g_phi g g_phi acts like g^p
    if F.has_gphi:
        v = [DPSeries.monomial(F, 1) + DPSeries.monomial(F, 2) for _ in range(M.rank)]
        gp, g = DescentElement(0, 1), DescentElement(1, 0)
        lhs = M.descent_vec(gp, M.descent_vec(g, M.descent_vec(gp, v)))
        rhs = M.descent_vec(DescentElement(p, 0), v)
        if not vec_is_zero(vec_sub(lhs, rhs)):
            return False, "g_phi g g_phi != g^p on a sample vector"
    return True, "group law holds on exponents and on a sample vector"


def check_embedding(M: StronglyDivisibleModule) -> bool:
    """P phi(g-basis) = Phi_D phi(P): phi computed on both bases agrees."""
    emb = M.embedding
    n = M.rank
    phiP = [[x.phi() for x in row] for row in emb.P]
    lhs = _mat_mul(emb.P, [[PFrac(x) for x in row] for row in M.phi_mat])
    rhs = _mat_mul(emb.phi_D, phiP)
    for i in range(n):
        for k in range(n):
            if not (lhs[k][i] - rhs[k][i]).normalized().is_zero():
                return False
    return True


def phi_from_embedding(M: StronglyDivisibleModule) -> list:
    """phi on the g-basis read off from D: P^{-1} Phi_D phi(P), as PFrac entries."""
    emb = M.embedding
    phiP = [[x.phi() for x in row] for row in emb.P]
    return _mat_mul(embedding_inverse(M), _mat_mul(emb.phi_D, phiP))


def _with_phi_from_embedding(M: StronglyDivisibleModule) -> StronglyDivisibleModule:
    mat = [[x.normalized() for x in row] for row in phi_from_embedding(M)]
    shift = max(x.k for row in mat for x in row)
    M.phi_mat = [[x._lift(shift) for x in row] for row in mat]
    M.phi_shift = shift
    return M


TAMPER_KINDS = ("special_to_one", "fil_times_p", "descent_shift", "phi_times_p")


def tampered_sdm(params: SdmParameters, kind: str) -> StronglyDivisibleModule:
    """A deliberately corrupted module, each kind aimed at one axiom.

    special_to_one: the special elements become 1 in the embedding and phi is
        read off from D again (axiom 4 when the constant term moves, and the
        named identity in every case; the identities are kept for this kind);
    fil_times_p: the first Fil^1 generator is multiplied by p (axiom 2);
    descent_shift: the descent character on the last basis vector is moved (axiom 12);
    phi_times_p: phi(g_1) is multiplied by p (axiom 4, generation).
    """
    if kind == "special_to_one":
        names = ("V", "U", "Vprime", "Uprime", "W", "X")
        token = _OVERRIDES.set({n: 1 for n in names})
        try:
            M = build_sdm(params)
        finally:
            _OVERRIDES.reset(token)
        return _with_phi_from_embedding(M)
    M = build_sdm(params)
    M.identities = []
    if kind == "fil_times_p":
        if not M.fil_gens:
            raise InadmissibleParameters("module has no explicit Fil^1 generator to corrupt")
        M.fil_gens = [[x.times_p() for x in M.fil_gens[0]]] + M.fil_gens[1:]
    elif kind == "descent_shift":
        if M.rank < 2:
            raise InadmissibleParameters("descent corruption needs rank two")
        M.descent = list(M.descent[:-1]) + [tuple((a + 1) % M.field.e for a in M.descent[-1])]
    elif kind == "phi_times_p":
        for k in range(M.rank):
            M.phi_mat[k][0] = M.phi_mat[k][0].times_p()
    else:
        raise ValueError(f"unknown corruption {kind!r}")
    if kind == "phi_times_p":
        M.embedding = None
    return M


# ---------------------------------------------------------------------------
# coefficient change

def specialize_coefficients(M: StronglyDivisibleModule, target: CoeffRing, images: dict) -> StronglyDivisibleModule:
    """Evaluate family variables at scalar points of O_E (given as elements of target)."""
    R = M.ring
    if R.family is None:
        if target.same_as(R) and not images:
            return M
        raise UnsupportedMap("scalar modules can only be specialized by the identity")
    hom = ring_hom_matrix(R, target, images)
    F2 = M.field.with_ring(target)

    def sp(s: DPSeries) -> DPSeries:
        return specialize_series(s, F2, hom)

    def spv(v):
        return [sp(x) for x in v]

    out = StronglyDivisibleModule(M.variant + "@specialized", F2, M.rank, M.labels,
                                  [spv(h) for h in M.fil_gens],
                                  [[sp(x) for x in row] for row in M.phi_mat], M.descent,
                                  params=dict(M.params), special={k: sp(v) for k, v in M.special.items()})
    if M.embedding is not None:
        emb = M.embedding

        def spf(x: PFrac) -> PFrac:
            return PFrac(sp(x.s), x.k)

        out.embedding = Embedding([[spf(x) for x in row] for row in emb.P],
                                  [[spf(x) for x in row] for row in emb.phi_D],
                                  spf(emb.det_scalar_inverse), emb.descent_D)
    return out


def ring_hom_matrix(R: CoeffRing, target: CoeffRing, images: dict):
    """Images in target of every basis coordinate of R, as raw tuples."""
    if target.family is not None or target.dO != R.dO or target.p != R.p:
        raise UnsupportedMap("specialization must land in a scalar ring of the same shape")
    base_basis = []
    for b in range(R.dO):
        coords = [0] * target.dim
        coords[b] = 1
        base_basis.append(target.element(coords))
    names = {"Y": ("Y",), "B": ("B",), "X1X2": ("X1", "X2")}[R.family]
    vals = [images[nm] for nm in names]
    out = []
    for mono in R.monos:
        val = target.one()
        for v, ex in zip(vals, mono):
            val = val * (v ** ex)
        for b in range(R.dO):
            out.append((base_basis[b] * val).coords)
    return out


def specialize_series(s: DPSeries, F2: FieldDatum, hom) -> DPSeries:
    target = F2.ring
    level = min(s.level, target.level)
    mods = target.moduli(level)
    out = DPSeries.zero(F2, level, s.U)
    for c, comp in enumerate(s.data):
        rows = [None] * target.dim
        for k, lst in enumerate(comp):
            if lst is None:
                continue
            img = hom[k]
            for t, coef in enumerate(img):
                if not coef:
                    continue
                if rows[t] is None:
                    rows[t] = [0] * s.U
                row = rows[t]
                for n, v in enumerate(lst):
                    if v:
                        row[n] += coef * v
        out.data[c] = [None if r is None else [v % mods[t] for v in r] for t, r in enumerate(rows)]
    return out
