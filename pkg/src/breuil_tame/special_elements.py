"""Solvers for the Frobenius fixed-point equations defining V, U, V', U', W and X.

All work happens in divided-power coordinates, so no rational arithmetic is
needed.  The equations are

    V = 1 + a u^A c phi(V)                  a = x^2/w, c = 1 + u^{ep}/p
    W = -w + c b^2 u^A W phi(W)
    X wb = w - c X phi(X)

where A depends on the kind and on j (or i).  Solutions are unique, so each
solver simply iterates until the truncated series stops changing and then
checks the residual.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .coeff_rings import CoeffElement, CoeffRing, sqrt as ring_sqrt
from .dp_series import DPSeries, FieldDatum, phi
from .errors import InadmissibleParameters, NoRootInE, PrecisionExhausted

KINDS = ("V", "U", "Vprime", "Uprime", "W", "X")


@dataclass(frozen=True)
class SpecialElementSpec:
    kind: str
    params: dict
    field: FieldDatum = dc_field(compare=False)
    branch: str | None = None


@dataclass
class SpecialElement:
    spec: SpecialElementSpec
    series: DPSeries
    certified_truncation: int
    certified_precision: int

    @property
    def kind(self):
        return self.spec.kind

    def residual(self) -> DPSeries:
        return residual(self.spec, self.series)


def _exponent(kind: str, field: FieldDatum, j: int) -> int:
    p, e = field.p, field.e
    if kind in ("V", "Vprime"):
        return p * e * (j - 1)
    if kind in ("U", "Uprime"):
        return p * e * (p - 2 - j)
    raise ValueError(kind)


def _as_element(ring: CoeffRing, x) -> CoeffElement:
    if isinstance(x, CoeffElement):
        return x if x.ring is ring else ring.from_base(x) if x.ring.family is None else x
    return ring.from_int(int(x))


def residual(spec: SpecialElementSpec, s: DPSeries) -> DPSeries:
    """Left side minus right side of the defining equation."""
    F = spec.field
    c = DPSeries.c_element(F, s.U)
    P = spec.params
    if spec.kind in ("V", "U", "Vprime", "Uprime"):
        a = P["x"] * P["x"] * P["w"].inverse()
        A = _exponent(spec.kind, F, P["j"])
        return s - (DPSeries.constant(F, 1, s.U) + (c * phi(s)).mul_u(A).scale(a))
    if spec.kind == "W":
        A = F.p * F.e * (F.p - P["i"])
        b2 = P["b"] * P["b"]
        return s - (DPSeries.constant(F, -P["w"], s.U) + (c * s * phi(s)).mul_u(A).scale(b2))
    if spec.kind == "X":
        return s.scale(P["w"] * P["b"]) - DPSeries.constant(F, P["w"], s.U) + c * s * phi(s)
    raise ValueError(f"unknown kind {spec.kind!r}")


def _iterate(step, start: DPSeries, limit: int) -> DPSeries:
    cur = start
    for _ in range(limit):
        nxt = step(cur)
        if nxt.equals(cur):
            return nxt
        cur = nxt
    raise PrecisionExhausted("fixed-point iteration did not stabilise")


def _finish(spec: SpecialElementSpec, s: DPSeries) -> SpecialElement:
    res = residual(spec, s)
    if not res.is_zero():
        raise PrecisionExhausted(f"{spec.kind}: residual does not vanish at level {s.level}")
    return SpecialElement(spec, s, s.U, s.level)


# ---------------------------------------------------------------------------
# V, U and their primed versions

def _solve_vu(kind: str, x, w, j: int, field: FieldDatum) -> SpecialElement:
    p = field.p
    # the equation for V makes sense for every j >= 1, the one for U for j <= p-2
    if j < 1 or (kind in ("U", "Uprime") and j > p - 2):
        raise InadmissibleParameters(f"j = {j} is out of range for {kind}")
    ring = field.ring
    x, w = _as_element(ring, x), _as_element(ring, w)
    if not w.is_unit():
        raise InadmissibleParameters("w must be a unit")
    a = x * x * w.inverse()
    A = _exponent(kind, field, j)
    if A == 0:
        if (1 - a).residue() == 0:
            raise InadmissibleParameters("x^2 = w mod m_E in the boundary case")
        v0 = (1 - a).inverse()
    else:
        v0 = ring.one()
    spec = SpecialElementSpec(kind, {"x": x, "w": w, "j": j}, field)
    c = DPSeries.c_element(field)
    one = DPSeries.constant(field, 1)

    def step(s):
        return one + (c * phi(s)).mul_u(A).scale(a)

    start = DPSeries.constant(field, v0)
    s = _iterate(step, start, field.U.bit_length() + field.U // max(A, 1) + 4)
    return _finish(spec, s)


def solve_V(x, w, j: int, field: FieldDatum) -> SpecialElement:
    kind = "V" if field.which == "F1" else "Vprime"
    return _solve_vu(kind, x, w, j, field)


def solve_U(x, w, j: int, field: FieldDatum) -> SpecialElement:
    kind = "U" if field.which == "F1" else "Uprime"
    return _solve_vu(kind, x, w, j, field)


def solve_V_U_prime(x, w, j: int, field: FieldDatum, which: str = "V") -> SpecialElement:
    if field.which != "F2":
        raise InadmissibleParameters("primed elements live over F2")
    return _solve_vu("Vprime" if which == "V" else "Uprime", x, w, j, field)


# ---------------------------------------------------------------------------
# roots of the constant-term quadratics

def _newton_root(coeffs, z0: CoeffElement) -> CoeffElement:
    """Refine a root of c2 z^2 + c1 z + c0 with unit derivative."""
    c2, c1, c0 = coeffs
    z = z0
    for _ in range(2 * z0.level.bit_length() + z0.level + 4):
        f = c2 * z * z + c1 * z + c0
        if f.is_zero():
            return z
        z = z - f * (2 * c2 * z + c1).inverse()
    return z


def _residue_roots(kE, c2: int, c1: int, c0: int) -> list[int]:
    return [z for z in kE.elements()
            if kE.add(kE.add(kE.mul(c2, kE.mul(z, z)), kE.mul(c1, z)), c0) == 0]


def w_constant_term(b: CoeffElement, w: CoeffElement, branch: str | None = None) -> CoeffElement:
    """Root z of b^2 z^2 - z - w = 0 in O_E (or a family ring).

    With b in the maximal ideal the only integral root is the one with
    z = -w mod m.  Otherwise branch "+" or "-" picks z = (1 +- s)/(2 b^2) for
    the square root s of 1 + 4 w b^2 of smallest residue code.
    """
    ring = b.ring
    kE = ring.kE
    b2 = b * b
    if b.residue() == 0:
        if branch not in (None, "-"):
            raise NoRootInE("only one integral root when b is not a unit")
        return _newton_root((b2, ring.one() * -1, -w), -w)
    disc = 1 + 4 * w * b2
    if disc.residue() == 0:
        if ring.family is not None:
            raise InadmissibleParameters("double root mod m_E is not supported over a family ring")
        s = ring_sqrt(disc)
        sign = 1 if branch in (None, "+") else -1
        return ((1 + sign * s) * (2 * b2).inverse()).at_level(s.level)
    r = kE.sqrt(disc.residue())
    if r is None:
        raise NoRootInE("1 + 4wb^2 is not a square in E")
    sign = 1 if branch in (None, "+") else -1
    half_inv = kE.inv(kE.mul(2, b2.residue()))
    z0 = kE.mul(kE.add(1, r if sign == 1 else kE.neg(r)), half_inv)
    return _newton_root((b2, ring.one() * -1, -w), ring.lift(z0))


def x_constant_term(b: CoeffElement, w: CoeffElement, branch: str | None = None) -> CoeffElement:
    """Root x0 of x^2 + wb x - w = 0 with x0 = +-sqrt(w) mod m_E."""
    ring = b.ring
    kE = ring.kE
    r = kE.sqrt(w.residue())
    if r is None:
        raise NoRootInE("w is not a square in E")
    if branch == "-":
        r = kE.neg(r)
    return _newton_root((ring.one(), w * b, -w), ring.lift(r))


# ---------------------------------------------------------------------------
# W and X

def solve_W(b, w, i: int, field: FieldDatum, branch: str | None = None) -> SpecialElement:
    p = field.p
    if field.which != "F2":
        raise InadmissibleParameters("W lives over F2")
    if not 1 <= i <= p:
        raise InadmissibleParameters(f"i must lie in [1, p], got {i}")
    ring = field.ring
    b, w = _as_element(ring, b), _as_element(ring, w)
    if not w.is_unit():
        raise InadmissibleParameters("w must be a unit")
    A = p * field.e * (p - i)
    b2 = b * b
    c = DPSeries.c_element(field)
    spec = SpecialElementSpec("W", {"b": b, "w": w, "i": i}, field, branch if i == p else None)
    if i < p:
        minus_w = DPSeries.constant(field, -w)

        def step(s):
            return minus_w + (c * s * phi(s)).mul_u(A).scale(b2)

        s = _iterate(step, minus_w, field.U // A + field.U.bit_length() + 4)
        return _finish(spec, s)
    z = w_constant_term(b, w, branch)
    s = DPSeries.constant(field, z)
    cb2 = c.scale(b2)
    for _ in range(field.U.bit_length() + 4):
        F = s + DPSeries.constant(field, w) - cb2 * s * phi(s)
        if F.is_zero():
            break
        deriv = DPSeries.constant(field, 1) - cb2 * phi(s)
        s = s - F * deriv.inverse()
    return _finish(spec, s)


def solve_X(b, w, field: FieldDatum, branch: str | None = None) -> SpecialElement:
    if field.which != "F2":
        raise InadmissibleParameters("X lives over F2")
    ring = field.ring
    b, w = _as_element(ring, b), _as_element(ring, w)
    if not w.is_unit():
        raise InadmissibleParameters("w must be a unit")
    if b.residue() != 0:
        raise InadmissibleParameters("X needs b in the maximal ideal")
    x0 = x_constant_term(b, w, branch)
    c = DPSeries.c_element(field)
    spec = SpecialElementSpec("X", {"b": b, "w": w}, field, branch)
    s = DPSeries.constant(field, x0)
    wb = w * b
    for _ in range(field.U.bit_length() + 4):
        F = s.scale(wb) - DPSeries.constant(field, w) + c * s * phi(s)
        if F.is_zero():
            break
        deriv = DPSeries.constant(field, wb) + c * phi(s)
        s = s - F * deriv.inverse()
    return _finish(spec, s)


def solve_family(kind: str, field: FieldDatum, params: dict, branch: str | None = None) -> SpecialElement:
    """Solve over a family coefficient ring; params are elements of field.ring."""
    if field.ring.family is None:
        raise InadmissibleParameters("solve_family needs a family coefficient ring")
    if kind in ("V", "Vprime"):
        return _solve_vu(kind, params["x"], params["w"], params["j"], field)
    if kind in ("U", "Uprime"):
        return _solve_vu(kind, params["x"], params["w"], params["j"], field)
    if kind == "W":
        return solve_W(params["b"], params["w"], params["i"], field, branch)
    if kind == "X":
        return solve_X(params["b"], params["w"], field, branch)
    raise ValueError(f"unknown kind {kind!r}")


def solve(kind: str, field: FieldDatum, params: dict, branch: str | None = None) -> SpecialElement:
    """Dispatch by kind name for scalar or family rings."""
    if kind in ("V", "Vprime"):
        return _solve_vu(kind, params["x"], params["w"], params["j"], field)
    if kind in ("U", "Uprime"):
        return _solve_vu(kind, params["x"], params["w"], params["j"], field)
    if kind == "W":
        return solve_W(params["b"], params["w"], params["i"], field, branch)
    if kind == "X":
        return solve_X(params["b"], params["w"], field, branch)
    raise ValueError(f"unknown kind {kind!r}")


def denominator_bound_holds(elem: SpecialElement) -> bool:
    """Large denominators only occur in high degree: p^N | den(v_n) forces n >= e p (p^N - 1)/(p - 1)."""
    s = elem.series
    F = s.field
    p, e = F.p, F.e
    for c in range(F.f):
        for n in range(s.U):
            N = s.denominator_exponent(n, c)
            if N and n < e * p * (p ** N - 1) // (p - 1):
                return False
    return True
