"""Coefficient rings with explicit p-adic precision.

Every ring here is a free Z/p^L-module on a finite monomial basis. Basis
element k carries an offset o_k and its coordinate is stored modulo
p^(L - o_k), so an element "at level L" is known modulo the ideal generated by
p^L and by the monomials of offset at least L.  Scalar rings (W(F_q) and its
ramified quadratic extensions) have all offsets zero, so the level is just the
number of p-adic digits.  Family rings add power-series variables whose
k-th power has offset k; this is the (p, Y)-adic truncation.

The same machinery backs the finite residue algebras used for Breuil modules.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import NotDivisible, NoRootInE, PrecisionExhausted, UnsupportedMap


def vp(n: int, p: int) -> int:
    """p-adic valuation of a nonzero integer."""
    if n == 0:
        raise ValueError("valuation of zero")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def smallest_nonresidue(p: int) -> int:
    for d in range(2, p):
        if pow(d, (p - 1) // 2, p) == p - 1:
            return d
    raise ValueError(f"no quadratic nonresidue mod {p}")


@dataclass(frozen=True)
class PadicConfig:
    p: int
    precision_digits: int = 6

    def __post_init__(self):
        if self.p < 3 or any(self.p % q == 0 for q in range(2, int(self.p ** 0.5) + 1)):
            raise ValueError(f"p must be an odd prime, got {self.p}")
        if self.precision_digits < 1:
            raise ValueError("precision must be positive")


# ---------------------------------------------------------------------------
# finite fields F_p and F_{p^2}

class FiniteField:
    """F_p or F_{p^2} = F_p[t]/(t^2 - d); elements are ints a0 + p*a1."""

    def __init__(self, p: int, n: int = 1):
        if n not in (1, 2):
            raise UnsupportedMap(f"residue degree {n} is not supported")
        self.p, self.n, self.q = p, n, p ** n
        self.d = smallest_nonresidue(p) if n == 2 else 0

    def __repr__(self):
        return f"FiniteField({self.p}, {self.n})"

    def __eq__(self, other):
        return isinstance(other, FiniteField) and (self.p, self.n) == (other.p, other.n)

    def __hash__(self):
        return hash((self.p, self.n))

    def make(self, a0: int, a1: int = 0) -> int:
        p = self.p
        if self.n == 1 and a1 % p:
            raise ValueError("F_p has no t-component")
        return a0 % p + p * (a1 % p)

    def parts(self, x: int) -> tuple[int, int]:
        return x % self.p, x // self.p

    def add(self, x, y):
        a0, a1 = self.parts(x)
        b0, b1 = self.parts(y)
        return self.make(a0 + b0, a1 + b1)

    def neg(self, x):
        a0, a1 = self.parts(x)
        return self.make(-a0, -a1)

    def sub(self, x, y):
        return self.add(x, self.neg(y))

    def mul(self, x, y):
        a0, a1 = self.parts(x)
        b0, b1 = self.parts(y)
        return self.make(a0 * b0 + self.d * a1 * b1, a0 * b1 + a1 * b0)

    def pow(self, x, k):
        result, base = 1, x
        if k < 0:
            base, k = self.inv(x), -k
        while k:
            if k & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            k >>= 1
        return result

    def inv(self, x):
        a0, a1 = self.parts(x)
        norm = (a0 * a0 - self.d * a1 * a1) % self.p
        if norm == 0:
            raise ZeroDivisionError("inverse of zero in finite field")
        ni = pow(norm, -1, self.p)
        return self.make(a0 * ni, -a1 * ni)

    def frobenius(self, x):
        a0, a1 = self.parts(x)
        return self.make(a0, -a1)

    def elements(self):
        return range(self.q)

    def units(self):
        return range(1, self.q)

    def is_square(self, x) -> bool:
        return x == 0 or self.pow(x, (self.q - 1) // 2) == 1

    def sqrt(self, x):
        """Some square root of x, or None when x is not a square."""
        for y in self.elements():
            if self.mul(y, y) == x:
                return y
        return None

    def order(self, x) -> int:
        k, y = 1, x
        while y != 1:
            y = self.mul(y, x)
            k += 1
        return k

    @cached_property
    def generator(self) -> int:
        for x in self.units():
            if self.order(x) == self.q - 1:
                return x
        raise AssertionError("cyclic group without generator")

    def log(self, x) -> int:
        """Discrete log of a unit with respect to the chosen generator."""
        g, y = self.generator, 1
        for k in range(self.q - 1):
            if y == x:
                return k
            y = self.mul(y, g)
        raise ZeroDivisionError("log of zero")

    def to_str(self, x) -> str:
        a0, a1 = self.parts(x)
        if self.n == 1 or a1 == 0:
            return str(a0)
        return f"{a0}+{a1}t" if a0 else f"{a1}t"


# ---------------------------------------------------------------------------
# coefficient rings

FAMILY_KINDS = (None, "Y", "B", "X1X2")


class CoeffRing:
    """O_E = W(F_{p^n})[pi]/(pi^eE + p), optionally with a family variable.

    family None:   the scalar ring O_E
    family "Y"/"B": O_E[[V]] truncated (p, V)-adically
    family "X1X2": O_E[[X1, X2]]/(X1*X2 - w*p) truncated the same way
    """

    def __init__(self, p: int, n: int = 1, eE: int = 1, level: int = 6,
                 family: str | None = None, w: tuple | None = None):
        if family not in FAMILY_KINDS:
            raise UnsupportedMap(f"unknown family kind {family!r}")
        if eE not in (1, 2):
            raise UnsupportedMap("only e_E in {1, 2} is supported")
        PadicConfig(p, level)
        self.p, self.n, self.eE, self.level, self.family = p, n, eE, level, family
        self.kE = FiniteField(p, n)
        self.d = self.kE.d
        self.dO = n * eE
        self.monos: list[tuple] = [()]
        self.mono_offset: list[int] = [0]
        if family in ("Y", "B"):
            for k in range(1, level):
                self.monos.append((k,))
                self.mono_offset.append(k)
        elif family == "X1X2":
            if w is None:
                raise ValueError("the X1X2 family needs the unit w")
            for a in range(1, level):
                self.monos.append((a, 0))
                self.mono_offset.append(a)
            for b in range(1, level):
                self.monos.append((0, b))
                self.mono_offset.append(b)
        self.w = tuple(w) if w is not None else None
        self.mono_index = {m: i for i, m in enumerate(self.monos)}
        self.dim = self.dO * len(self.monos)
        self.offsets = [self.mono_offset[k // self.dO] for k in range(self.dim)]
        self._moduli: dict[int, list[int]] = {}
        self._build_table()

    def __repr__(self):
        fam = f", family={self.family}" if self.family else ""
        return f"CoeffRing(p={self.p}, n={self.n}, eE={self.eE}, level={self.level}{fam})"

    def same_as(self, other) -> bool:
        return (isinstance(other, CoeffRing)
                and (self.p, self.n, self.eE, self.level, self.family, self.w)
                == (other.p, other.n, other.eE, other.level, other.family, other.w))

    # -- structure constants ------------------------------------------------
    def _base_mul(self, x, y):
        """Multiply two O_E coordinate vectors exactly (no reduction)."""
        n, eE, d, p = self.n, self.eE, self.d, self.p
        out = [0] * self.dO
        for i, xi in enumerate(x):
            if not xi:
                continue
            a1, b1 = i % n, i // n
            for j, yj in enumerate(y):
                if not yj:
                    continue
                a2, b2 = j % n, j // n
                c = xi * yj
                a, b = a1 + a2, b1 + b2
                if a >= n:
                    a -= n
                    c *= d if n == 2 else 1
                if b >= eE:
                    b -= eE
                    c *= -p
                out[b * n + a] += c
        return out

    def _mono_mul(self, m1, m2):
        """Return (O_E scalar, monomial) or None when the product is truncated."""
        one = [1] + [0] * (self.dO - 1)
        if not m1:
            return one, m2
        if not m2:
            return one, m1
        if self.family in ("Y", "B"):
            k = m1[0] + m2[0]
            return (one, (k,)) if k < self.level else None
        a, b = m1[0] + m2[0], m1[1] + m2[1]
        m = min(a, b)
        a, b = a - m, b - m
        if max(a, b) >= self.level or m >= self.level:
            return None
        scal = one
        wp = [c * self.p for c in self.w]
        for _ in range(m):
            scal = self._base_mul(scal, wp)
        return scal, ((a, b) if (a or b) else ())

    def _build_table(self):
        dO = self.dO
        basis = [[1 if i == j else 0 for i in range(dO)] for j in range(dO)]
        self.table: list[list[list[tuple[int, int]]]] = []
        for i in range(self.dim):
            row = []
            mi, bi = divmod(i, dO)
            for j in range(self.dim):
                mj, bj = divmod(j, dO)
                res = self._mono_mul(self.monos[mi], self.monos[mj])
                entry = []
                if res is not None:
                    scal, mono = res
                    mk = self.mono_index[mono]
                    coords = self._base_mul(self._base_mul(basis[bi], basis[bj]), scal)
                    entry = [(mk * dO + b, c) for b, c in enumerate(coords) if c]
                row.append(entry)
            self.table.append(row)

    # -- raw coordinate tuples ---------------------------------------------
    def moduli(self, level: int) -> list[int]:
        mods = self._moduli.get(level)
        if mods is None:
            mods = [self.p ** max(0, level - o) for o in self.offsets]
            self._moduli[level] = mods
        return mods

    def reduce(self, coords, level: int) -> tuple:
        return tuple(c % m for c, m in zip(coords, self.moduli(level)))

    def raw_mul(self, x, y, level: int) -> tuple:
        acc = [0] * self.dim
        table = self.table
        for i, xi in enumerate(x):
            if not xi:
                continue
            row = table[i]
            for j, yj in enumerate(y):
                if not yj:
                    continue
                c = xi * yj
                for k, s in row[j]:
                    acc[k] += s * c
        return self.reduce(acc, level)

    # -- element constructors ------------------------------------------------
    def element(self, coords, level: int | None = None) -> "CoeffElement":
        level = self.level if level is None else level
        coords = list(coords) + [0] * (self.dim - len(coords))
        return CoeffElement(self, self.reduce(coords, level), level)

    def from_int(self, n: int, level: int | None = None) -> "CoeffElement":
        return self.element([n], level)

    def zero(self, level=None):
        return self.from_int(0, level)

    def one(self, level=None):
        return self.from_int(1, level)

    def gen(self, name: str, level=None) -> "CoeffElement":
        """One of the named generators t, pi, Y, B, X1, X2."""
        coords = [0] * self.dim
        if name == "t" and self.n == 2:
            coords[1] = 1
        elif name == "pi":
            if self.eE == 1:
                coords[0] = -self.p
            else:
                coords[self.n] = 1
        elif name in ("Y", "B") and self.family == name and self.level > 1:
            coords[self.mono_index[(1,)] * self.dO] = 1
        elif name == "X1" and self.family == "X1X2":
            coords[self.mono_index[(1, 0)] * self.dO] = 1
        elif name == "X2" and self.family == "X1X2":
            coords[self.mono_index[(0, 1)] * self.dO] = 1
        else:
            raise UnsupportedMap(f"generator {name!r} not available in {self!r}")
        return self.element(coords, level)

    def from_base(self, x: "CoeffElement") -> "CoeffElement":
        """Include a scalar O_E element into this (family) ring."""
        if x.ring.dO != self.dO or x.ring.p != self.p:
            raise UnsupportedMap("incompatible scalar ring")
        return self.element(list(x.coords[: self.dO]), min(x.level, self.level))

    def lift(self, x: int, level=None) -> "CoeffElement":
        """Naive lift of a residue field element."""
        a0, a1 = self.kE.parts(x)
        return self.element([a0, a1] if self.n == 2 else [a0], level)

    @cached_property
    def base_ring(self) -> "CoeffRing":
        if self.family is None:
            return self
        return CoeffRing(self.p, self.n, self.eE, self.level)

    def with_level(self, level: int) -> "CoeffRing":
        if level == self.level:
            return self
        return CoeffRing(self.p, self.n, self.eE, level, self.family, self.w)


class CoeffElement:
    """Immutable element of a CoeffRing known at a given precision level."""

    __slots__ = ("ring", "coords", "level")

    def __init__(self, ring: CoeffRing, coords: tuple, level: int):
        self.ring, self.coords, self.level = ring, coords, level

    def __repr__(self):
        return f"CoeffElement({self.coords}, level={self.level})"

    def _coerce(self, other) -> "CoeffElement":
        if isinstance(other, CoeffElement):
            return other
        if isinstance(other, int):
            return self.ring.from_int(other, self.level)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        lv = min(self.level, other.level)
        return CoeffElement(self.ring, self.ring.reduce(
            [a + b for a, b in zip(self.coords, other.coords)], lv), lv)

    __radd__ = __add__

    def __neg__(self):
        return CoeffElement(self.ring, self.ring.reduce([-a for a in self.coords], self.level), self.level)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        lv = min(self.level, other.level)
        return CoeffElement(self.ring, self.ring.raw_mul(self.coords, other.coords, lv), lv)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        result, base = self.ring.one(self.level), self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return False
        return (self - other).is_zero()

    def __hash__(self):
        return hash((self.coords, self.level))

    def at_level(self, level: int) -> "CoeffElement":
        level = min(level, self.level)
        return CoeffElement(self.ring, self.ring.reduce(self.coords, level), level)

    def is_zero(self) -> bool:
        return not any(self.coords)

    def residue(self) -> int:
        """Image in the residue field k_E."""
        ring = self.ring
        if self.level < 1:
            raise PrecisionExhausted("no digits left to read the residue")
        if ring.n == 2:
            return ring.kE.make(self.coords[0], self.coords[1])
        return ring.kE.make(self.coords[0])

    def is_unit(self) -> bool:
        return self.residue() != 0

    def valuation(self) -> Fraction | None:
        """p-adic valuation for scalar rings, None when zero to precision."""
        ring = self.ring
        if ring.family is not None:
            raise UnsupportedMap("valuation is only defined on scalar rings")
        best = None
        for k, c in enumerate(self.coords):
            if c == 0:
                continue
            v = Fraction(vp(c, ring.p)) + Fraction(k // ring.n, ring.eE)
            best = v if best is None else min(best, v)
        return best

    def inverse(self) -> "CoeffElement":
        """Inverse of a unit by Newton iteration from the residue inverse."""
        r = self.residue()
        if r == 0:
            raise ZeroDivisionError("element is not a unit")
        ring = self.ring
        y = ring.lift(ring.kE.inv(r), self.level)
        two = ring.from_int(2, self.level)
        for _ in range(self.level.bit_length() + 2):
            y_next = y * (two - self * y)
            if y_next.coords == y.coords:
                break
            y = y_next
        return y

    def __truediv__(self, other):
        other = self._coerce(other)
        return self * other.inverse()

    def frobenius(self) -> "CoeffElement":
        """Frobenius on the W(k_E) part: t -> -t, other generators fixed."""
        ring = self.ring
        if ring.n == 1:
            return self
        coords = list(self.coords)
        for k in range(1, ring.dim, 2):
            coords[k] = -coords[k]
        return CoeffElement(ring, ring.reduce(coords, self.level), self.level)

    def to_str(self) -> str:
        """Readable form such as 3+2*t+pi*X1; coordinates are symmetric residues."""
        ring = self.ring
        mods = ring.moduli(self.level)
        terms = []
        for k, (c, m) in enumerate(zip(self.coords, mods)):
            if not c:
                continue
            if c > m // 2:
                c -= m
            mono, b = divmod(k, ring.dO)
            a, pe = b % ring.n, b // ring.n
            factors = []
            if a:
                factors.append("t")
            if pe:
                factors.append("pi")
            for name, ex in zip(_mono_names(ring), ring.monos[mono]):
                if ex:
                    factors.append(name if ex == 1 else f"{name}^{ex}")
            if not factors:
                terms.append(str(c))
            else:
                head = "" if c == 1 else "-" if c == -1 else f"{c}*"
                terms.append(head + "*".join(factors))
        if not terms:
            return "0"
        return "+".join(terms).replace("+-", "-")

    def sqrt(self) -> "CoeffElement":
        """A square root in the scalar ring, chosen with the smallest residue code."""
        return sqrt(self)


def _mono_names(ring: CoeffRing) -> tuple[str, ...]:
    if ring.family in ("Y", "B"):
        return (ring.family,)
    if ring.family == "X1X2":
        return ("X1", "X2")
    return ()


def exact_divide_p(x: CoeffElement, k: int = 1) -> CoeffElement:
    """x / p^k, losing k digits of precision."""
    ring, p = x.ring, x.ring.p
    new_level = x.level - k
    if new_level <= 0:
        raise PrecisionExhausted(f"dividing by p^{k} leaves no digits (level {x.level})")
    mods = ring.moduli(x.level)
    pk = p ** k
    out = []
    for c, m in zip(x.coords, mods):
        if m > 1 and c % min(pk, m):
            raise NotDivisible(f"coordinate {c} is not divisible by p^{k}")
        out.append(c // pk)
    return CoeffElement(ring, ring.reduce(out, new_level), new_level)


def frobenius(x):
    """Frobenius on W(F_q) coefficients or on split tensor elements."""
    if isinstance(x, TensorFieldElement):
        return x.frobenius()
    return x.frobenius()


def teichmuller_lift(x: int, ring: CoeffRing, level: int | None = None) -> CoeffElement:
    """The root of unity in W(k_E) reducing to x."""
    level = ring.level if level is None else level
    y = ring.lift(x, level)
    if x == 0:
        return y
    q = ring.kE.q
    for _ in range(level + 1):
        y_next = y ** q
        if y_next.coords == y.coords:
            return y
        y = y_next
    return y


def sqrt(x: CoeffElement) -> CoeffElement:
    """Square root in a scalar O_E; raises NoRootInE when there is none."""
    ring = x.ring
    if ring.family is not None:
        raise UnsupportedMap("square roots are only taken in scalar rings")
    v = x.valuation()
    if v is None:
        return x
    m = int(v * ring.eE)
    if m % 2:
        raise NoRootInE("odd valuation")
    k = m // 2
    if ring.eE == 1:
        unit = exact_divide_p(x, m)
        root_of_power = ring.from_int(ring.p ** k, x.level)
    else:
        # pi^2 = -p, so x = (-p)^k * unit and sqrt = pi^k * sqrt(unit)
        unit = exact_divide_p(x, k) * ((-1) ** k)
        root_of_power = ring.gen("pi", x.level) ** k
    r0 = ring.kE.sqrt(unit.residue())
    if r0 is None:
        raise NoRootInE("residue is not a square")
    y = ring.lift(r0, unit.level)
    half = ring.from_int(2, unit.level).inverse()
    for _ in range(unit.level.bit_length() + 2):
        y_next = (y + unit * y.inverse()) * half
        if y_next.coords == y.coords:
            break
        y = y_next
    return (root_of_power * y).at_level(x.level - k)


def witt_ring(p: int, f: int, precision: int = 6) -> CoeffRing:
    return CoeffRing(p, f, 1, precision)


WittElement = CoeffElement
OEElement = CoeffElement


# ---------------------------------------------------------------------------
# split tensor elements

@dataclass(frozen=True)
class TensorFieldElement:
    """Element of k_F (x) A stored by embedding: components[c] is the c-th image."""

    components: tuple

    def __mul__(self, other):
        return TensorFieldElement(tuple(a * b for a, b in zip(self.components, other.components)))

    def __add__(self, other):
        return TensorFieldElement(tuple(a + b for a, b in zip(self.components, other.components)))

    def frobenius(self):
        c = self.components
        return TensorFieldElement(c[1:] + c[:1])

    @classmethod
    def from_kF(cls, a, f: int, conj):
        """a (x) 1 in split form; conj is the Frobenius on scalars."""
        comps, x = [], a
        for _ in range(f):
            comps.append(x)
            x = conj(x)
        return cls(tuple(comps))


# ---------------------------------------------------------------------------
# finite local k_E-algebras with square-zero maximal ideal

class FiniteCoeffAlgebra:
    """k_E[X_1..X_m]/(X_i X_j) for m in {0, 1, 2}, as an F_p-vector space.

    Basis index is mono * n + a where mono 0 is 1, mono i is X_i and a indexes
    the F_p-basis 1, t of k_E.
    """

    def __init__(self, kE: FiniteField, nvars: int = 0, names: tuple[str, ...] | None = None):
        if nvars not in (0, 1, 2):
            raise UnsupportedMap("only square-zero algebras in at most two variables")
        self.kE, self.nvars = kE, nvars
        self.names = names or tuple(f"X{i + 1}" for i in range(nvars))
        self.p, self.n = kE.p, kE.n
        self.dim = self.n * (1 + nvars)
        self._build()

    def __repr__(self):
        return f"FiniteCoeffAlgebra({self.kE}, vars={self.names})"

    def _build(self):
        n, p, D = self.n, self.p, self.dim
        T = np.zeros((D, D, D), dtype=np.int64)
        for i in range(D):
            mi, ai = divmod(i, n)
            for j in range(D):
                mj, aj = divmod(j, n)
                if mi and mj:
                    continue
                m = mi or mj
                prod = self.kE.mul(self.kE.make(*([1, 0] if ai == 0 else [0, 1])),
                                   self.kE.make(*([1, 0] if aj == 0 else [0, 1])))
                c0, c1 = self.kE.parts(prod)
                T[i, j, m * n] = c0
                if n == 2:
                    T[i, j, m * n + 1] = c1
        self.tensor = T % p

    def kE_element(self, x: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=np.int64)
        c0, c1 = self.kE.parts(x)
        v[0] = c0
        if self.n == 2:
            v[1] = c1
        return v

    def var(self, i: int, coeff: int = 1) -> np.ndarray:
        v = np.zeros(self.dim, dtype=np.int64)
        c0, c1 = self.kE.parts(coeff)
        v[(i + 1) * self.n] = c0
        if self.n == 2:
            v[(i + 1) * self.n + 1] = c1
        return v

    def mul(self, a, b) -> np.ndarray:
        return np.einsum("i,j,ijk->k", a, b, self.tensor) % self.p

    def mult_matrix(self, a) -> np.ndarray:
        """Matrix of left multiplication by a (columns = images of basis)."""
        return np.einsum("i,ijk->kj", a, self.tensor) % self.p

    def nilpotent_mask(self) -> np.ndarray:
        """Boolean mask of basis coordinates lying in the maximal ideal."""
        return np.arange(self.dim) >= self.n


class AlgebraMap:
    """Reduction R -> A for a coefficient ring R and a finite algebra A.

    The residue field part goes through k_E; each family variable is sent to
    a prescribed element of the maximal ideal of A; higher monomials and the
    uniformiser of O_E go to zero.
    """

    def __init__(self, ring: CoeffRing, algebra: FiniteCoeffAlgebra, var_images: dict | None = None):
        if ring.p != algebra.p or ring.n != algebra.n:
            raise UnsupportedMap("residue fields do not match")
        var_images = var_images or {}
        self.ring, self.algebra = ring, algebra
        D, n = algebra.dim, ring.n
        M = np.zeros((D, ring.dim), dtype=np.int64)
        names = {(): None}
        if ring.family in ("Y", "B"):
            names[(1,)] = ring.family
        elif ring.family == "X1X2":
            names[(1, 0)] = "X1"
            names[(0, 1)] = "X2"
        for mi, mono in enumerate(ring.monos):
            if mono not in names:
                continue
            name = names[mono]
            if name is None:
                img = algebra.kE_element(1)
            else:
                img = var_images.get(name)
                if img is None:
                    continue
                img = np.asarray(img, dtype=np.int64) % algebra.p
                if np.any(img[: algebra.n]):
                    raise UnsupportedMap("family variables must map into the maximal ideal")
            for a in range(n):
                k = mi * ring.dO + a  # pi-free coordinates only
                basis = algebra.kE_element(algebra.kE.make(*([1, 0] if a == 0 else [0, 1])))
                M[:, k] = algebra.mul(basis, img)
        self.matrix = M % algebra.p
        self.needs_level = 2 if any(np.any(v) for v in var_images.values()) else 1

    def __call__(self, x: CoeffElement) -> np.ndarray:
        if x.level < self.needs_level:
            raise PrecisionExhausted("no digits to reduce")
        coords = np.array([c % self.ring.p for c in x.coords], dtype=np.int64)
        return (self.matrix @ coords) % self.algebra.p
