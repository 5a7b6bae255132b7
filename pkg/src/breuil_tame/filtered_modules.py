"""Rank-two filtered (phi, N)-modules with tame descent data.

Three shapes are built here: the diagonal module with phi = diag(x1, x2) over
F1 (or its base change to F2), and the anti-diagonal module
phi(e1) = e2, phi(e2) = x e1 over F2.  The Hodge filtration is a single
(F (x) E)-line and N is always zero.  Descent is diagonal on e1, e2 and is
recorded as one exponent of the Teichmueller character per basis vector and
per embedding of k_F.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

from .coeff_rings import CoeffElement
from .errors import BadValuation, ScalarType


@dataclass(frozen=True)
class TameType:
    niveau: int
    exponents: tuple[int, ...]
    p: int

    def __post_init__(self):
        p = self.p
        if self.niveau == 1:
            if len(self.exponents) == 2 and (self.exponents[0] - self.exponents[1]) % (p - 1) == 0:
                raise ScalarType("principal series type must be nonscalar")
        elif self.niveau == 2:
            if self.exponents[0] % (p + 1) == 0:
                raise ScalarType("supercuspidal exponent must not be divisible by p+1")
        else:
            raise ValueError("niveau must be 1 or 2")

    @classmethod
    def principal(cls, i: int, j: int, p: int) -> "TameType":
        return cls(1, (i % (p - 1), j % (p - 1)), p)

    @classmethod
    def supercuspidal(cls, m: int, p: int) -> "TameType":
        return cls(2, (m % (p * p - 1),), p)

    def key(self):
        """Canonical form: unordered pair, or the orbit {m, pm}."""
        p = self.p
        if self.niveau == 1:
            return (1, tuple(sorted(self.exponents)))
        m = self.exponents[0]
        return (2, tuple(sorted((m, (p * m) % (p * p - 1)))))

    def __eq__(self, other):
        return isinstance(other, TameType) and self.p == other.p and self.key() == other.key()

    def __hash__(self):
        return hash((self.p, self.key()))

    def describe(self) -> str:
        if self.niveau == 1:
            i, j = self.exponents
            return f"omega^{i} + omega^{j}"
        m = self.exponents[0]
        return f"omega2^{m} + omega2^{(self.p * m) % (self.p ** 2 - 1)}"


@dataclass(frozen=True)
class FilLine:
    """Fil^1 = <(varpi^k1 (x) a) e1 + (varpi^k2 (x) b) e2>; a or b may be zero."""

    k1: int
    a: object
    k2: int
    b: object

    def coordinate_nonzero(self) -> tuple[bool, bool]:
        return (_nonzero(self.a), _nonzero(self.b))


def _nonzero(x) -> bool:
    if isinstance(x, CoeffElement):
        return not x.is_zero()
    return x != 0


@dataclass(frozen=True)
class FilteredModule:
    shape: str                      # "diagonal", "antidiagonal" or "character"
    field: str                      # "F1" or "F2"
    p: int
    phi_entries: tuple              # (x1, x2) or (x,) as ring elements
    phi_valuations: tuple           # valuations of the entries above
    fil1: FilLine | None
    descent: tuple                  # descent[i][c]: exponent on basis vector i in embedding c
    gphi_trivial: bool = True
    N: int = 0
    labels: tuple = ("e1", "e2")
    params: dict = field(default_factory=dict, compare=False)

    @property
    def rank(self) -> int:
        return len(self.labels)

    def with_valuations(self, vals) -> "FilteredModule":
        """Copy with overridden phi valuations (used to build mutants)."""
        return replace(self, phi_valuations=tuple(Fraction(v) for v in vals))


def _val(x) -> Fraction:
    if isinstance(x, CoeffElement):
        v = x.valuation()
        if v is None:
            raise BadValuation("parameter is zero to working precision")
        return v
    if x == 0:
        raise BadValuation("parameter is zero")
    raise BadValuation("parameters must be ring elements with a declared valuation")


def build_D_principal(x1: CoeffElement, x2: CoeffElement, i: int, j: int, over: str = "F1") -> FilteredModule:
    p = x1.ring.p
    if (i - j) % (p - 1) == 0:
        raise ScalarType("i = j mod p-1 gives a scalar type")
    v1, v2 = _val(x1), _val(x2)
    if v1 < 0 or v2 < 0 or v1 + v2 != 1:
        raise BadValuation(f"need val(x1 x2) = 1 with integral x1, x2; got {v1}, {v2}")
    if over == "F1":
        fil = FilLine((j - i) % (p - 1), 1, 0, 1)
        descent = ((i % (p - 1),), (j % (p - 1),))
    elif over == "F2":
        fil = FilLine(((j - i) % (p - 1)) * (p + 1), 1, 0, 1)
        e2 = p * p - 1
        descent = tuple(tuple((k * (p + 1) * p ** c) % e2 for c in range(2)) for k in (i, j))
    else:
        raise ValueError(f"unknown field {over!r}")
    return FilteredModule("diagonal", over, p, (x1, x2), (v1, v2), fil, descent,
                          params={"i": i, "j": j})


def build_D_supercuspidal(m: int, a, b, x: CoeffElement) -> FilteredModule:
    p = x.ring.p
    if m % (p + 1) == 0:
        raise ScalarType("p+1 divides m")
    if not (_nonzero(a) or _nonzero(b)):
        raise ValueError("(a, b) must be nonzero")
    v = _val(x)
    if v != 1:
        raise BadValuation(f"need val(x) = 1, got {v}")
    e2 = p * p - 1
    mm = m % e2
    i = (mm - 1) % (p + 1) + 1
    fil = FilLine((p - 1) * i, a, 0, b)
    descent = (tuple((mm * p ** c) % e2 for c in range(2)),
               tuple((mm * p ** (c + 1)) % e2 for c in range(2)))
    return FilteredModule("antidiagonal", "F2", p, (x,), (v,), fil, descent,
                          params={"m": mm, "a": a, "b": b})


def build_D_character(i: int, j: int, a: CoeffElement, p: int) -> FilteredModule:
    """The rank-one module of eps^i omega~^j lambda_a: phi(e) = p^(1-i) a^-1 e."""
    return FilteredModule("character", "F1", p, (a,), (Fraction(1 - i),), None,
                          ((j % (p - 1),),), labels=("e",), params={"i": i, "j": j})


def relabel_supercuspidal(D: FilteredModule, w: CoeffElement) -> FilteredModule:
    """The isomorphic module D_{pm,[bw:-a]} (with x = p w)."""
    m, a, b = D.params["m"], D.params["a"], D.params["b"]
    p = D.p
    return build_D_supercuspidal((p * m) % (p * p - 1), b * w, -a, D.phi_entries[0])


@dataclass
class SubmoduleWitness:
    name: str
    t_H: Fraction
    t_N: Fraction

    @property
    def ok(self) -> bool:
        return self.t_H <= self.t_N


def check_weak_admissibility(D: FilteredModule) -> dict:
    """Compare t_H and t_N on the phi-stable submodules and on D itself.

    t_N is val_p(det phi^f) / f on one embedding-component, t_H is the rank of
    the intersection with the Hodge line.
    """
    witnesses: list[SubmoduleWitness] = []
    if D.shape == "diagonal":
        v1, v2 = D.phi_valuations
        nz1, nz2 = D.fil1.coordinate_nonzero()
        # the Hodge line lies in F e_i exactly when the other coordinate vanishes
        witnesses.append(SubmoduleWitness("E.e1", Fraction(int(not nz2)), Fraction(v1)))
        witnesses.append(SubmoduleWitness("E.e2", Fraction(int(not nz1)), Fraction(v2)))
        if D.phi_entries[0] is not None and _same_entry(*D.phi_entries):
            # every line is phi-stable; the Hodge line is not defined over F_0
            witnesses.append(SubmoduleWitness("generic line", Fraction(0), Fraction(v1)))
        full = SubmoduleWitness("D", Fraction(1), Fraction(v1 + v2))
    elif D.shape == "antidiagonal":
        (v,) = D.phi_valuations
        # phi^2 = x on each embedding component, so a rank-one stable piece has t_N = val(x)/2
        witnesses.append(SubmoduleWitness("u(a e1 + b e2) + v(bx e1 + a e2)", Fraction(0), Fraction(v, 2)))
        full = SubmoduleWitness("D", Fraction(1), Fraction(v))
    else:
        # contravariant normalization: the Hodge jump of eps^i sits at 1 - i
        (v,) = D.phi_valuations
        full = SubmoduleWitness("D", Fraction(1 - D.params.get("i", 0)), Fraction(v))
    ok = all(wt.ok for wt in witnesses) and full.t_H == full.t_N
    return {
        "admissible": ok,
        "witnesses": [{"submodule": wt.name, "t_H": str(wt.t_H), "t_N": str(wt.t_N), "ok": wt.ok}
                      for wt in witnesses + [full]],
    }


def _same_entry(x1, x2) -> bool:
    try:
        return (x1 - x2).is_zero()
    except (AttributeError, TypeError):
        return x1 == x2


def galois_type(D: FilteredModule) -> TameType:
    p = D.p
    if D.shape == "antidiagonal":
        return TameType.supercuspidal(D.descent[0][0], p)
    if D.shape == "character":
        return TameType(1, (D.descent[0][0],), p)
    if D.field == "F1":
        return TameType.principal(D.descent[0][0], D.descent[1][0], p)
    return TameType.principal(D.descent[0][0] // (p + 1), D.descent[1][0] // (p + 1), p)


def is_reducible_degenerate(x1: CoeffElement, x2: CoeffElement, w: CoeffElement, j: int) -> bool:
    """The two boundary configurations where the reduction has extra endomorphisms."""
    p = x1.ring.p
    if j == 1 and x1.is_unit() and (x1 * x1 - w).residue() == 0:
        return True
    if j == p - 2 and x2.is_unit() and (x2 * x2 - w).residue() == 0:
        return True
    return False
