"""Truncated divided-power series rings S_{F,R} with Frobenius, monodromy and descent.

An element is stored in split form: W(k_F) (x) R is identified with R^f through
the f embeddings, so a series is f independent components.  Each component is
kept in the divided-power basis u^j / floor(j/e)!, with one integer list per
basis coordinate of R.  Coordinates are reduced according to the precision
level of the series, using the offsets of the coefficient ring.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import factorial

from .coeff_rings import CoeffElement, CoeffRing, teichmuller_lift, vp
from .errors import NotInFil1, PrecisionExhausted, UnsupportedMap


@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    return factorial(n)


@lru_cache(maxsize=None)
def _dp_scale(U: int, e: int) -> tuple[int, tuple[int, ...]]:
    """K! and the multipliers K!/floor(j/e)! for j < U."""
    K = (U - 1) // e
    kf = _fact(K)
    return kf, tuple(kf // _fact(j // e) for j in range(U))


def p_power_over_factorial(k: int, p: int, modulus: int, sign: int = 1) -> int:
    """(sign * p)^k / k! reduced mod modulus; always integral."""
    v = vp(_fact(k), p) if k else 0
    unit = _fact(k) // p ** v
    val = pow(p, k - v, modulus) * pow(unit, -1, modulus) if modulus > 1 else 0
    return (val * (sign ** k)) % modulus


# ---------------------------------------------------------------------------

class FieldDatum:
    """The tamely ramified field F (F1 = Q_p(pi), F2 = Q_{p^2}(varpi)) over F'.

    base "Qp" means F' = Q_p; for F2 this adds the Frobenius element g_phi to
    the descent group.  base "Qp2" restricts descent to the inertia part.
    """

    def __init__(self, which: str, ring: CoeffRing, base: str = "Qp", U: int | None = None):
        if which not in ("F1", "F2"):
            raise UnsupportedMap(f"unknown field {which!r}")
        p = ring.p
        self.which, self.ring, self.p = which, ring, p
        self.e = p - 1 if which == "F1" else p * p - 1
        self.f = 1 if which == "F1" else 2
        if self.f > ring.n:
            raise UnsupportedMap("F2 needs coefficients containing W(F_{p^2})")
        if base not in ("Qp", "Qp2") or (which == "F1" and base != "Qp"):
            raise UnsupportedMap(f"unsupported base field {base!r}")
        self.base = base
        self.has_gphi = which == "F2" and base == "Qp"
        self.U = U if U is not None else 3 * self.e * p
        self.level = ring.level

    def __repr__(self):
        return f"FieldDatum({self.which}/{self.base}, p={self.p}, U={self.U}, {self.ring!r})"

    def with_ring(self, ring: CoeffRing) -> "FieldDatum":
        return FieldDatum(self.which, ring, self.base, self.U)

    def with_base(self, base: str) -> "FieldDatum":
        return FieldDatum(self.which, self.ring, base, self.U)

    def same_as(self, other) -> bool:
        return (self.which, self.base, self.U) == (other.which, other.base, other.U) \
            and self.ring.same_as(other.ring)

    @cached_property
    def residue_generator(self) -> int:
        """Generator of k_F^x inside k_E, the reduction of h_g for the chosen g."""
        kE = self.ring.kE
        if self.f == 1:
            g = 1
            for x in range(1, self.p):
                if kE.order(x) == self.p - 1:
                    g = x
                    break
            return g
        return kE.generator

    @cached_property
    def zeta(self) -> CoeffElement:
        return teichmuller_lift(self.residue_generator, self.ring)

    @cached_property
    def zeta_powers(self) -> list[tuple]:
        """Raw coordinates of zeta^k for k < e at the ring level."""
        one = self.ring.one()
        out, z = [], one
        for _ in range(self.e):
            out.append(z.coords)
            z = z * self.zeta
        return out

    @cached_property
    def descent_generators(self) -> list["DescentElement"]:
        gens = [DescentElement(1, 0)]
        if self.has_gphi:
            gens.append(DescentElement(0, 1))
        return gens


@dataclass(frozen=True)
class DescentElement:
    """g^t g_phi^s with g_phi g g_phi = g^p (s is only nonzero for F2/Q_p)."""

    t: int
    s: int = 0

    def normalized(self, field: FieldDatum) -> "DescentElement":
        return DescentElement(self.t % field.e, self.s % field.f)

    def compose(self, other: "DescentElement", field: FieldDatum) -> "DescentElement":
        p = field.p
        return DescentElement((self.t + p ** self.s * other.t) % field.e,
                              (self.s + other.s) % field.f)

    def inverse(self, field: FieldDatum) -> "DescentElement":
        s = (-self.s) % field.f
        return DescentElement((-(field.p ** s) * self.t) % field.e, s)


# ---------------------------------------------------------------------------

class DPSeries:
    """Element of S_{F,R} truncated below u-degree U at a precision level."""

    __slots__ = ("field", "level", "U", "data")

    def __init__(self, field: FieldDatum, data, level: int | None = None, U: int | None = None):
        self.field = field
        self.level = field.level if level is None else level
        self.U = field.U if U is None else U
        self.data = data  # data[c][k] is a list of U ints or None

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, field, level=None, U=None):
        return cls(field, [[None] * field.ring.dim for _ in range(field.f)], level, U)

    @classmethod
    def constant(cls, field, x: CoeffElement | int, U=None):
        """1 (x) x: the same scalar in every component."""
        if isinstance(x, int):
            x = field.ring.from_int(x)
        return cls.split_constant(field, [x] * field.f, U)

    @classmethod
    def split_constant(cls, field, comps: list[CoeffElement], U=None):
        level = min(x.level for x in comps)
        U = field.U if U is None else U
        out = cls.zero(field, level, U)
        for c, x in enumerate(comps):
            for k, v in enumerate(field.ring.reduce(x.coords, level)):
                if v:
                    lst = [0] * U
                    lst[0] = v
                    out.data[c][k] = lst
        return out

    @classmethod
    def kF_constant(cls, field, a: CoeffElement, U=None):
        """a (x) 1 for a in W(k_F): component c holds sigma^c(a)."""
        comps, x = [], a
        for _ in range(field.f):
            comps.append(x)
            x = x.frobenius()
        return cls.split_constant(field, comps, U)

    @classmethod
    def monomial(cls, field, j: int, coeff: CoeffElement | int = 1, p_denominator: int = 0,
                 divided: bool = False, level=None, U=None):
        """coeff * u^j / p^p_denominator, or coeff * u^j/floor(j/e)! when divided."""
        ring = field.ring
        if isinstance(coeff, int):
            coeff = ring.from_int(coeff, field.level if level is None else level)
        level = coeff.level if level is None else min(level, coeff.level)
        U = field.U if U is None else U
        out = cls.zero(field, level, U)
        if j >= U:
            return out
        mult = 1 if divided else _fact(j // field.e)
        pd = field.p ** p_denominator
        if mult % pd:
            raise ValueError(f"u^{j}/p^{p_denominator} is not integral in S")
        mult //= pd
        mods = ring.moduli(level)
        for c in range(field.f):
            for k, v in enumerate(coeff.coords):
                if v:
                    lst = [0] * U
                    lst[j] = (v * mult) % mods[k]
                    out.data[c][k] = lst
        return out

    @classmethod
    def E(cls, field, U=None):
        """The Eisenstein polynomial u^e + p."""
        return cls.monomial(field, field.e, U=U) + cls.constant(field, field.p, U=U)

    @classmethod
    def c_element(cls, field, U=None):
        """phi_1(E(u)) = 1 + u^{ep}/p."""
        return cls.constant(field, 1, U=U) + cls.monomial(field, field.e * field.p, p_denominator=1, U=U)

    # -- helpers ------------------------------------------------------------
    def _new(self, data, level=None, U=None):
        return DPSeries(self.field, data, self.level if level is None else level,
                        self.U if U is None else U)

    def _mods(self, level=None):
        return self.field.ring.moduli(self.level if level is None else level)

    def _align(self, other: "DPSeries"):
        if other.field is not self.field and not other.field.same_as(self.field):
            raise UnsupportedMap("series over different field data")
        return min(self.level, other.level), min(self.U, other.U)

    def at(self, level=None, U=None) -> "DPSeries":
        """Drop precision and/or truncate."""
        level = self.level if level is None else min(level, self.level)
        U = self.U if U is None else min(U, self.U)
        mods = self._mods(level)
        data = []
        for comp in self.data:
            row = []
            for k, lst in enumerate(comp):
                if lst is None or mods[k] == 1:
                    row.append(None)
                    continue
                m = mods[k]
                new = [v % m for v in lst[:U]]
                row.append(new if any(new) else None)
            data.append(row)
        return self._new(data, level, U)

    def __repr__(self):
        return f"DPSeries(level={self.level}, U={self.U}, nonzero={self.support_size()})"

    def support_size(self) -> int:
        return sum(1 for comp in self.data for lst in comp if lst is not None and any(lst))

    def coefficient(self, j: int, c: int = 0) -> CoeffElement:
        """Divided-power coordinate r_j of component c as a ring element."""
        ring = self.field.ring
        coords = [lst[j] if lst is not None else 0 for lst in self.data[c]]
        return ring.element(coords, self.level)

    def denominator_exponent(self, j: int, c: int = 0) -> int:
        """Exponent of p in the denominator of the plain coefficient of u^j."""
        r = self.coefficient(j, c)
        if r.is_zero():
            return 0
        v = min(vp(x, self.field.p) for x in r.coords if x)
        k = j // self.field.e
        return max(0, (vp(_fact(k), self.field.p) if k > 1 else 0) - v)

    # -- ring operations ----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, CoeffElement)):
            other = DPSeries.constant(self.field, other, self.U)
        level, U = self._align(other)
        mods = self._mods(level)
        data = []
        for ca, cb in zip(self.data, other.data):
            row = []
            for k, (a, b) in enumerate(zip(ca, cb)):
                if a is None and b is None:
                    row.append(None)
                elif a is None:
                    row.append([v % mods[k] for v in b[:U]])
                elif b is None:
                    row.append([v % mods[k] for v in a[:U]])
                else:
                    row.append([(x + y) % mods[k] for x, y in zip(a[:U], b[:U])])
            data.append(row)
        return self._new(data, level, U)

    __radd__ = __add__

    def __neg__(self):
        mods = self._mods()
        return self._new([[None if lst is None else [(-v) % mods[k] for v in lst]
                           for k, lst in enumerate(comp)] for comp in self.data])

    def __sub__(self, other):
        if isinstance(other, (int, CoeffElement)):
            other = DPSeries.constant(self.field, other, self.U)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, x: CoeffElement | int) -> "DPSeries":
        """Multiply by the scalar 1 (x) x."""
        ring = self.field.ring
        if isinstance(x, int):
            x = ring.from_int(x, self.level)
        level = min(self.level, x.level)
        mods = ring.moduli(level)
        xs = ring.reduce(x.coords, level)
        data = []
        for comp in self.data:
            acc: dict[int, list[int]] = {}
            for i, xi in enumerate(xs):
                if not xi:
                    continue
                for j, lst in enumerate(comp):
                    if lst is None:
                        continue
                    for k, s in ring.table[i][j]:
                        f = xi * s
                        cur = acc.get(k)
                        if cur is None:
                            acc[k] = [f * v for v in lst]
                        else:
                            for n, v in enumerate(lst):
                                cur[n] += f * v
            row = [None] * ring.dim
            for k, lst in acc.items():
                if mods[k] > 1:
                    row[k] = [v % mods[k] for v in lst]
            data.append(row)
        return self._new(data, level)

    def scale_split(self, comps: list[CoeffElement]) -> "DPSeries":
        return self * DPSeries.split_constant(self.field, comps, self.U)

    def __mul__(self, other):
        if isinstance(other, (int, CoeffElement)):
            return self.scale(other)
        return mul(self, other)

    __rmul__ = __mul__

    def mul_u(self, a: int) -> "DPSeries":
        """Multiply by u^a."""
        e = self.field.e
        U = self.U
        data = []
        mods = self._mods()
        for comp in self.data:
            row = []
            for k, lst in enumerate(comp):
                if lst is None:
                    row.append(None)
                    continue
                new = [0] * U
                for j in range(max(0, U - a)):
                    v = lst[j]
                    if v:
                        new[j + a] = (v * (_fact((j + a) // e) // _fact(j // e))) % mods[k]
                row.append(new)
            data.append(row)
        return self._new(data)

    def is_zero(self) -> bool:
        return all(lst is None or not any(lst) for comp in self.data for lst in comp)

    def equals(self, other: "DPSeries") -> bool:
        return (self - other).is_zero()

    def __eq__(self, other):
        if isinstance(other, (int, CoeffElement)):
            other = DPSeries.constant(self.field, other, self.U)
        if not isinstance(other, DPSeries):
            return NotImplemented
        return self.equals(other)

    __hash__ = None

    def is_unit(self) -> bool:
        return all(self.coefficient(0, c).is_unit() for c in range(self.field.f))

    def inverse(self) -> "DPSeries":
        """Inverse of a unit by Newton iteration."""
        comps = [self.coefficient(0, c) for c in range(self.field.f)]
        if not all(x.is_unit() for x in comps):
            raise ZeroDivisionError("series is not a unit")
        y = DPSeries.split_constant(self.field, [x.inverse() for x in comps], self.U).at(self.level)
        two = DPSeries.constant(self.field, 2, self.U)
        for _ in range(self.U.bit_length() + self.level.bit_length() + 4):
            y_next = y * (two - self * y)
            if y_next.equals(y):
                return y_next
            y = y_next
        return y

    def phi(self) -> "DPSeries":
        return phi(self)

    def phi1(self) -> "DPSeries":
        return phi1(self)

    def N(self) -> "DPSeries":
        return monodromy_N(self)

    def divide_p(self, k: int = 1) -> "DPSeries":
        """Exact division by p^k, losing k digits."""
        new_level = self.level - k
        if new_level <= 0:
            raise PrecisionExhausted("dividing by p leaves no digits")
        mods = self._mods()
        new_mods = self._mods(new_level)
        pk = self.field.p ** k
        data = []
        for comp in self.data:
            row = []
            for idx, lst in enumerate(comp):
                if lst is None:
                    row.append(None)
                    continue
                m = min(pk, mods[idx])
                if m > 1 and any(v % m for v in lst):
                    raise ValueError("series not divisible by p")
                row.append([(v // pk) % new_mods[idx] for v in lst] if new_mods[idx] > 1 else None)
            data.append(row)
        return self._new(data, new_level)

    def times_p(self, k: int = 1) -> "DPSeries":
        return self.scale(self.field.p ** k)


# ---------------------------------------------------------------------------
# multiplication by Kronecker substitution

def mul(a: DPSeries, b: DPSeries) -> DPSeries:
    """Product in the divided-power basis, exact up to the common truncation."""
    level, U = a._align(b)
    field = a.field
    ring = field.ring
    e = field.e
    kf, scale = _dp_scale(U, e)
    kf2 = kf * kf
    mods = ring.moduli(level)
    top = ring.p ** level
    tmax = top * kf
    nterms = ring.dim * ring.dim
    bits = 2 * tmax.bit_length() + top.bit_length() + U.bit_length() + nterms.bit_length() + 2
    nbytes = (bits + 7) // 8
    shift = 8 * nbytes
    data = []
    for ca, cb in zip(a.data, b.data):
        pa = [_pack(lst, U, scale, shift, mods[k]) for k, lst in enumerate(ca)]
        pb = [_pack(lst, U, scale, shift, mods[k]) for k, lst in enumerate(cb)]
        acc: dict[int, int] = {}
        for i, x in enumerate(pa):
            if not x:
                continue
            row = ring.table[i]
            for j, y in enumerate(pb):
                if not y or not row[j]:
                    continue
                prod = x * y
                for k, s in row[j]:
                    if mods[k] == 1:
                        continue
                    acc[k] = acc.get(k, 0) + (s % top) * prod
        out = [None] * ring.dim
        for k, total in acc.items():
            raw = total.to_bytes(nbytes * (2 * U), "little")
            m = mods[k]
            lst = [0] * U
            for n in range(U):
                chunk = int.from_bytes(raw[n * nbytes:(n + 1) * nbytes], "little")
                if chunk:
                    lst[n] = (chunk * _fact(n // e) // kf2) % m
            out[k] = lst if any(lst) else None
        data.append(out)
    return DPSeries(field, data, level, U)


def _pack(lst, U, scale, shift, modulus) -> int:
    if lst is None or modulus == 1:
        return 0
    total = 0
    for n in range(U - 1, -1, -1):
        total = (total << shift) + (lst[n] % modulus) * scale[n]
    return total


# ---------------------------------------------------------------------------
# Frobenius, monodromy, descent

def phi(s: DPSeries) -> DPSeries:
    """u -> u^p, coefficients fixed; component c of the result is component c+1."""
    field = s.field
    p, e, U = field.p, field.e, s.U
    mods = s._mods()
    f = field.f
    data = []
    for c in range(f):
        src = s.data[(c + 1) % f]
        row = []
        for k, lst in enumerate(src):
            if lst is None:
                row.append(None)
                continue
            new = [0] * U
            for j in range((U + p - 1) // p):
                v = lst[j]
                if v:
                    new[p * j] = (v * (_fact(p * j // e) // _fact(j // e))) % mods[k]
            row.append(new)
        data.append(row)
    return s._new(data)


def phi1(s: DPSeries) -> DPSeries:
    """phi(s)/p; raises NotInFil1 when phi(s) is not divisible by p."""
    try:
        return phi(s).divide_p(1)
    except ValueError as exc:
        raise NotInFil1(str(exc)) from None


def monodromy_N(s: DPSeries) -> DPSeries:
    """The derivation -u d/du."""
    mods = s._mods()
    return s._new([[None if lst is None else [(-j * v) % mods[k] for j, v in enumerate(lst)]
                    for k, lst in enumerate(comp)] for comp in s.data])


def descent_act(g: DescentElement, s: DPSeries) -> DPSeries:
    field = s.field
    g = g.normalized(field)
    f, e, p = field.f, field.e, field.p
    ring = field.ring
    mods = s._mods()
    # g_phi^s first: component c takes component c+s
    comps = [s.data[(c + g.s) % f] for c in range(f)]
    if g.t == 0:
        return s._new([list(comp) for comp in comps])
    zp = field.zeta_powers
    data = []
    for c in range(f):
        tc = g.t * p ** c
        comp = comps[c]
        acc = [None] * ring.dim
        for i, lst in enumerate(comp):
            if lst is None:
                continue
            for n, v in enumerate(lst):
                if not v:
                    continue
                z = zp[(tc * n) % e]
                for jdx, zj in enumerate(z):
                    if not zj:
                        continue
                    for k, sc in ring.table[i][jdx]:
                        if acc[k] is None:
                            acc[k] = [0] * s.U
                        acc[k][n] += v * zj * sc
        data.append([None if lst is None else [v % mods[k] for v in lst] for k, lst in enumerate(acc)])
    return s._new(data)


# ---------------------------------------------------------------------------
# E-adic expansion and the filtration

@dataclass
class EExpansion:
    """s = sum_q r_q(u) E(u)^q / q!, with deg r_q < e.

    coeffs[c][q][r] is the raw coordinate tuple of the u^r coefficient of r_q
    in component c; digits[q] is the number of certified p-adic digits.
    """

    field: FieldDatum
    coeffs: list
    digits: list[int]
    level: int

    def r(self, q: int, c: int = 0) -> list[CoeffElement]:
        ring = self.field.ring
        lv = min(self.level, self.digits[q])
        return [ring.element(v, lv) for v in self.coeffs[c][q]]


def _certified_digits(level: int, missing_from: int, p: int) -> int:
    best = level
    k = max(missing_from, 0)
    while k - k // (p - 1) <= level + 1:
        v = k - (vp(_fact(k), p) if k > 1 else 0)
        best = min(best, v)
        k += 1
    return max(best, 0)


def expand_by_E(s: DPSeries) -> EExpansion:
    field = s.field
    ring = field.ring
    p, e, U = field.p, field.e, s.U
    Q = (U + e - 1) // e
    M = U // e
    top = p ** s.level
    weights = [p_power_over_factorial(k, p, top, -1) for k in range(Q + 1)]
    mods = s._mods()
    coeffs = []
    for comp in s.data:
        per_q = []
        for q in range(Q):
            poly = []
            for r in range(e):
                coords = []
                for k, lst in enumerate(comp):
                    if lst is None:
                        coords.append(0)
                        continue
                    total = 0
                    for m in range(q, Q):
                        j = m * e + r
                        if j < U and lst[j]:
                            total += lst[j] * weights[m - q]
                    coords.append(total % mods[k])
                poly.append(tuple(coords))
            per_q.append(poly)
        coeffs.append(per_q)
    digits = [_certified_digits(s.level, M - q, p) for q in range(Q)]
    return EExpansion(field, coeffs, digits, s.level)


def reassemble(exp: EExpansion, U: int | None = None) -> DPSeries:
    field = exp.field
    ring = field.ring
    p, e = field.p, field.e
    U = field.U if U is None else U
    level = exp.level
    top = p ** level
    mods = ring.moduli(level)
    out = DPSeries.zero(field, level, U)
    weights = [p_power_over_factorial(k, p, top, 1) for k in range(len(exp.coeffs[0]) + 1)]
    for c, per_q in enumerate(exp.coeffs):
        rows = [[0] * U for _ in range(ring.dim)]
        for q, poly in enumerate(per_q):
            for r, coords in enumerate(poly):
                for k, v in enumerate(coords):
                    if not v:
                        continue
                    for m in range(q + 1):
                        j = m * e + r
                        if j < U:
                            rows[k][j] += v * weights[q - m]
        out.data[c] = [[v % mods[k] for v in row] if any(row) else None for k, row in enumerate(rows)]
    return out


def fil1_residual(s: DPSeries) -> tuple[list[list[CoeffElement]], int]:
    """The r_0 polynomial of every component and its certified digits."""
    exp = expand_by_E(s)
    return [exp.r(0, c) for c in range(s.field.f)], min(exp.digits[0], s.level)


def fil1_membership(s: DPSeries) -> bool:
    r0, _ = fil1_residual(s)
    return all(x.is_zero() for comp in r0 for x in comp)


def r0_vector(s: DPSeries) -> list[list[tuple]]:
    """Raw r_0 coordinates (per component, per u^r with r < e), without certification."""
    field = s.field
    p, e, U = field.p, field.e, s.U
    top = p ** s.level
    mods = s._mods()
    Q = (U + e - 1) // e
    weights = [p_power_over_factorial(k, p, top, -1) for k in range(Q + 1)]
    out = []
    for comp in s.data:
        poly = []
        for r in range(e):
            coords = []
            for k, lst in enumerate(comp):
                total = 0
                if lst is not None:
                    for m in range(Q):
                        j = m * e + r
                        if j < U and lst[j]:
                            total += lst[j] * weights[m]
                coords.append(total % mods[k])
            poly.append(tuple(coords))
        out.append(poly)
    return out
