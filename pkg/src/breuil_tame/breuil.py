"""Breuil modules with tame descent data over (k_F (x) A)[u]/u^{ep}.

An element of B = (k_F (x) A)[u]/u^{ep} is an integer array of shape
(f, ep, dim A): one block per embedding of k_F into k_E (k_E is assumed to
contain k_F), coefficients of u^0..u^{ep-1}, and F_p-coordinates in A.  A
module vector stacks rank such arrays.

phi on B is the Frobenius of k_F (a cyclic shift of the blocks: block c of
phi(x) comes from block c+1) and u -> u^p; it is the identity on A.  Since
u^{ep} = 0, phi(x) only depends on x modulo u^e, and so does phi_1 on the
generators of Fil^1.  All linear algebra below therefore happens in
M/u^e M, which keeps the systems small.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field, replace
from functools import cached_property
from math import factorial

import numpy as np

from . import linalg
from .coeff_rings import AlgebraMap, FiniteCoeffAlgebra, FiniteField
from .dp_series import DPSeries, FieldDatum
from .errors import InadmissibleParameters, NotRecognized, PrecisionExhausted, UnsupportedMap


# ---------------------------------------------------------------------------
# the base ring

@dataclass(frozen=True)
class BreuilBase:
    p: int
    e: int
    f: int
    has_gphi: bool
    algebra: FiniteCoeffAlgebra
    zeta: int                     # image of h_g in k_E

    @classmethod
    def from_field(cls, field: FieldDatum, algebra: FiniteCoeffAlgebra) -> "BreuilBase":
        return cls(field.p, field.e, field.f, field.has_gphi, algebra, field.residue_generator)

    @classmethod
    def standard(cls, which: str, kE: FiniteField, algebra: FiniteCoeffAlgebra | None = None,
                 base: str = "Qp") -> "BreuilBase":
        from .coeff_rings import CoeffRing
        ring = CoeffRing(kE.p, kE.n, 1, 2)
        field = FieldDatum(which, ring, base=base)
        return cls.from_field(field, algebra or FiniteCoeffAlgebra(kE, 0))

    @property
    def ep(self) -> int:
        return self.e * self.p

    @property
    def dA(self) -> int:
        return self.algebra.dim

    @property
    def kE(self) -> FiniteField:
        return self.algebra.kE

    def restricted(self) -> "BreuilBase":
        return replace(self, has_gphi=False)

    def with_algebra(self, algebra: FiniteCoeffAlgebra) -> "BreuilBase":
        return replace(self, algebra=algebra)

    def same_as(self, other: "BreuilBase") -> bool:
        return (self.p, self.e, self.f, self.has_gphi, self.dA, self.zeta) == \
            (other.p, other.e, other.f, other.has_gphi, other.dA, other.zeta)

    # -- ring elements ----------------------------------------------------
    def zero(self) -> np.ndarray:
        return np.zeros((self.f, self.ep, self.dA), dtype=np.int64)

    def const(self, alpha, comps=None) -> np.ndarray:
        x = self.zero()
        alpha = np.asarray(alpha, dtype=np.int64) % self.p
        for c in range(self.f) if comps is None else comps:
            x[c, 0] = alpha
        return x

    def kE_const(self, a: int, comps=None) -> np.ndarray:
        return self.const(self.algebra.kE_element(a), comps)

    def one(self) -> np.ndarray:
        return self.kE_const(1)

    def u_power(self, n: int, alpha=None) -> np.ndarray:
        x = self.zero()
        if n < self.ep:
            x[:, n] = self.algebra.kE_element(1) if alpha is None else alpha
        return x

    @cached_property
    def _terms(self) -> list[tuple[int, int, np.ndarray]]:
        T = self.algebra.tensor
        out = []
        for i in range(self.dA):
            for j in range(self.dA):
                if T[i, j].any():
                    out.append((i, j, T[i, j]))
        return out

    def mul(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        ep, p = self.ep, self.p
        out = self.zero()
        for c in range(self.f):
            xc, yc = x[c], y[c]
            xs = [i for i in range(self.dA) if xc[:, i].any()]
            ys = {j for j in range(self.dA) if yc[:, j].any()}
            if not xs or not ys:
                continue
            for i, j, tk in self._terms:
                if i in xs and j in ys:
                    conv = np.convolve(xc[:, i], yc[:, j])[:ep]
                    out[c] += np.outer(conv, tk)
        return out % p

    def scalar_mul(self, alpha, x: np.ndarray, comps=None) -> np.ndarray:
        """Multiply by a constant of A (in the given blocks only)."""
        M = self.algebra.mult_matrix(np.asarray(alpha) % self.p)
        out = x.copy()
        for c in range(self.f) if comps is None else comps:
            out[c] = (x[c] @ M.T) % self.p
        return out

    def phi(self, x: np.ndarray) -> np.ndarray:
        out = self.zero()
        e, p, f = self.e, self.p, self.f
        for c in range(f):
            out[c, 0:e * p:p] = x[(c + 1) % f, :e]
        return out

    def shift(self, x: np.ndarray, a: int) -> np.ndarray:
        """Multiply by u^a (a may be negative: divide, dropping low terms)."""
        out = self.zero()
        if a >= 0:
            if a < self.ep:
                out[:, a:] = x[:, :self.ep - a]
        else:
            out[:, :self.ep + a] = x[:, -a:]
        return out

    def descent_factor(self, t: int, exponent: int) -> int:
        return self.kE.pow(self.zeta, (t * exponent) % self.e) if exponent % self.e else 1

    def act(self, t: int, s: int, x: np.ndarray, basis_exponents=None) -> np.ndarray:
        """g^t g_phi^s on an element of B (times zeta^{t a_c} if basis exponents are given)."""
        f, e, p = self.f, self.e, self.p
        out = self.zero()
        for c in range(f):
            src = x[(c + s) % f]
            for n in np.nonzero(src.any(axis=1))[0]:
                ex = t * (p ** c * int(n) + (basis_exponents[c] if basis_exponents else 0))
                z = self.kE.pow(self.zeta, ex % e)
                out[c, n] = self.algebra.mul(self.algebra.kE_element(z), src[n])
        return out


# ---------------------------------------------------------------------------
# modules

def vzero(base: BreuilBase, rank: int) -> np.ndarray:
    return np.zeros((rank, base.f, base.ep, base.dA), dtype=np.int64)


@dataclass
class BreuilModule:
    base: BreuilBase
    rank: int
    fil_gens: list                 # module vectors; u^e M is always part of Fil^1
    phi1_gens: list                # phi_1 of each entry of fil_gens
    phi1_ue: list                  # phi_1(u^e g_i)
    descent: list                  # descent[i][c]
    labels: tuple = ()
    name: str = ""

    def __post_init__(self):
        if not self.labels:
            self.labels = tuple(f"g{i + 1}" for i in range(self.rank))
        self.descent = [tuple(int(a) % self.base.e for a in d) for d in self.descent]

    # -- basic operations ---------------------------------------------------
    def zero(self) -> np.ndarray:
        return vzero(self.base, self.rank)

    def basis(self, i: int) -> np.ndarray:
        v = self.zero()
        v[i] = self.base.one()
        return v

    def scale(self, b: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.stack([self.base.mul(b, v[i]) for i in range(self.rank)])

    def phi_semilinear(self, b: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.scale(self.base.phi(b), v)

    def mod_ue(self, v: np.ndarray) -> np.ndarray:
        return v[:, :, :self.base.e, :].reshape(-1)

    @property
    def _pres_shape(self):
        return (len(self.fil_gens), self.base.f, self.base.e, self.base.dA)

    @cached_property
    def fil_solver(self) -> linalg.ImageSolver:
        """Image of the explicit generators in M/u^e M."""
        base = self.base
        cols = []
        for h in self.fil_gens:
            for c in range(base.f):
                for n in range(base.e):
                    for a in range(base.dA):
                        b = base.zero()
                        b[c, n, a] = 1
                        cols.append(self.mod_ue(self.scale(b, h)))
        dim = self.rank * base.f * base.e * base.dA
        A = np.array(cols, dtype=np.int64).T if cols else np.zeros((dim, 0), dtype=np.int64)
        return linalg.ImageSolver(A, base.p)

    def fil_contains(self, v: np.ndarray) -> bool:
        return self.fil_solver.contains(self.mod_ue(v))

    def fil_defect(self, v: np.ndarray) -> np.ndarray:
        return self.fil_solver.defect(self.mod_ue(v))

    def fil_defects(self, V: np.ndarray) -> np.ndarray:
        """fil_defect for a stack of vectors, one row each."""
        low = V[..., :self.base.e, :].reshape(V.shape[0], -1)
        obs = self.fil_solver.obstruction
        return np.rint(low.astype(np.float64) @ obs.T.astype(np.float64)).astype(np.int64) % self.base.p

    def _split(self, v: np.ndarray):
        """Write v = sum b_k h_k + u^e sum c_i g_i with deg b_k, deg c_i < e."""
        base = self.base
        e = base.e
        K = len(self.fil_gens)
        bs = []
        r = v.copy()
        if K:
            sol = self.fil_solver.solve(self.mod_ue(v)).reshape(self._pres_shape)
            for k in range(K):
                b = base.zero()
                b[:, :e] = sol[k]
                bs.append(b)
                r = (r - self.scale(b, self.fil_gens[k])) % base.p
        cs = []
        for i in range(self.rank):
            c = base.zero()
            c[:, :e] = r[i, :, e:2 * e]
            cs.append(c)
        return bs, cs

    def phi1(self, v: np.ndarray) -> np.ndarray:
        """phi_1 on Fil^1 (linear in v; meaningless when v is not in Fil^1).

        Only v mod u^{2e} matters, since phi_1(u^{2e} x) = u^{ep} phi_1(u^e x) = 0.
        """
        low = v[..., :2 * self.base.e, :].reshape(v.shape[:-4] + (-1,))
        # float matmul is exact here (entries < p, short sums) and much faster
        out = np.rint(low.astype(np.float64) @ self._phi1_matrix_f).astype(np.int64) % self.base.p
        return out.reshape(v.shape)

    @cached_property
    def _phi1_matrix_f(self) -> np.ndarray:
        return self.phi1_matrix.T.astype(np.float64)

    @cached_property
    def phi1_matrix(self) -> np.ndarray:
        """phi1_direct on the coordinates of v mod u^{2e}, assembled from linear pieces."""
        base = self.base
        e, p, rank, f, dA = base.e, base.p, self.rank, base.f, base.dA
        betas = []
        for idx in np.ndindex(f, e, dA):
            b = base.zero()
            b[idx] = 1
            betas.append(b)
        nb = len(betas)

        def columns(fn):
            return np.array([fn(b).reshape(-1) for b in betas], dtype=np.float64).T

        def mm(A, B):
            return np.rint(A @ B) % p

        # input coordinates: (i, c, n < 2e, a); the u^e-part c_i reads degrees e..2e-1
        low_shape = (rank, f, 2 * e, dA)
        nlow = int(np.prod(low_shape))
        cols = np.arange(nlow).reshape(low_shape)
        under_e = cols[:, :, :e].reshape(-1)
        above_e = cols[:, :, e:].reshape(rank, -1)
        full_index = np.arange(rank * f * base.ep * dA).reshape(rank, f, base.ep, dA)
        rows_c = full_index[:, :, e:2 * e].reshape(rank, -1)
        C = np.zeros((rank, nb, nlow))
        for i in range(rank):
            C[i, np.arange(nb), above_e[i]] = 1
        out = np.zeros((full_index.size, nlow))
        if self.fil_gens:
            sol = np.zeros((len(self.fil_gens) * nb, nlow))
            sol[:, under_e] = self.fil_solver.right_inverse
            for k, (h, img) in enumerate(zip(self.fil_gens, self.phi1_gens)):
                sk = sol[k * nb:(k + 1) * nb]
                S = columns(lambda b: self.scale(b, h))
                for i in range(rank):
                    C[i] = (C[i] - mm(S[rows_c[i]], sk)) % p
                out += mm(columns(lambda b: self.phi_semilinear(b, img)), sk)
        for i, img in enumerate(self.phi1_ue):
            out += mm(columns(lambda b: self.phi_semilinear(b, img)), C[i])
        return (out % p).astype(np.int64)

    def phi1_direct(self, v: np.ndarray) -> np.ndarray:
        base = self.base
        bs, cs = self._split(v)
        out = self.zero()
        for b, img in zip(bs, self.phi1_gens):
            out = out + self.phi_semilinear(b, img)
        for c, img in zip(cs, self.phi1_ue):
            out = out + self.phi_semilinear(c, img)
        return out % base.p

    def act(self, t: int, s: int, v: np.ndarray) -> np.ndarray:
        return np.stack([self.base.act(t, s, v[i], self.descent[i]) for i in range(self.rank)])

    # -- structural checks --------------------------------------------------
    def phi1_well_defined(self) -> bool:
        """phi_1 vanishes on every relation among the generators of Fil^1."""
        base = self.base
        e = base.e
        K = len(self.fil_gens)
        solver = self.fil_solver
        relations = []
        if K:
            # relations sum b_k h_k = 0 mod u^e
            A_cols = solver.shape[1]
            null = linalg.nullspace(_image_matrix(self), base.p) if A_cols else np.zeros((0, 0))
            for z in null:
                z = z.reshape(self._pres_shape)
                bs = []
                r = self.zero()
                for k in range(K):
                    b = base.zero()
                    b[:, :e] = z[k]
                    bs.append(b)
                    r = r + self.scale(b, self.fil_gens[k])
                r %= base.p
                val = self.zero()
                for b, img in zip(bs, self.phi1_gens):
                    val = val + self.phi_semilinear(b, img)
                for i in range(self.rank):
                    c = base.zero()
                    c[:, :e] = r[i, :, e:2 * e]
                    val = val - self.phi_semilinear(c, self.phi1_ue[i])
                relations.append(val % base.p)
        for h in self.fil_gens:
            val = self.zero()
            for i in range(self.rank):
                c = base.zero()
                c[:, :e] = h[i, :, :e]
                val = val + self.phi_semilinear(c, self.phi1_ue[i])
            relations.append(val % base.p)
        return all(not r.any() for r in relations)

    def phi1_generates(self) -> bool:
        """phi_1(Fil^1) spans M modulo (u, m_A), block by block."""
        base = self.base
        n = base.kE.n
        images = list(self.phi1_gens) + list(self.phi1_ue)
        for c in range(base.f):
            rows = []
            for v in images:
                row = v[:, c, 0, :n].reshape(-1)
                rows.append(row)
                if n == 2:
                    t = base.algebra.kE_element(base.kE.make(0, 1))
                    rows.append(np.array([base.algebra.mul(t, v[i, c, 0])[:n] for i in range(self.rank)]).reshape(-1))
            if linalg.rank(np.array(rows), base.p) < self.rank * n:
                return False
        return True

    def descent_compatible(self) -> bool:
        """Descent preserves Fil^1 and commutes with phi_1 on the generators."""
        base = self.base
        gens = [(1, 0)] + ([(0, 1)] if base.has_gphi else [])
        ue = [self.scale(base.u_power(base.e), self.basis(i)) for i in range(self.rank)]
        for t, s in gens:
            for h, img in zip(list(self.fil_gens) + ue, list(self.phi1_gens) + list(self.phi1_ue)):
                gh = self.act(t, s, h)
                if not self.fil_contains(gh):
                    return False
                if ((self.phi1(gh) - self.act(t, s, img)) % base.p).any():
                    return False
        return True

    def verify(self) -> dict:
        return {"phi1_well_defined": self.phi1_well_defined(),
                "phi1_generates": self.phi1_generates(),
                "descent_compatible": self.descent_compatible()}

    def is_maximal(self) -> bool:
        return len(self.fil_solver.pivots) == 0

    def is_minimal(self) -> bool:
        return len(self.fil_solver.pivots) == self.rank * self.base.f * self.base.e * self.base.dA

    # -- coefficient change -------------------------------------------------
    def base_change(self, hom: np.ndarray, algebra: FiniteCoeffAlgebra) -> "BreuilModule":
        """Push coefficients along an algebra map A -> A' given by its F_p matrix."""
        p = self.base.p
        hom = np.asarray(hom, dtype=np.int64)

        def mp(v):
            return (v @ hom.T) % p

        return BreuilModule(self.base.with_algebra(algebra), self.rank,
                            [mp(h) for h in self.fil_gens], [mp(x) for x in self.phi1_gens],
                            [mp(x) for x in self.phi1_ue], list(self.descent), self.labels, self.name)

    def equals(self, other: "BreuilModule") -> bool:
        if not self.base.same_as(other.base) or self.rank != other.rank:
            return False
        if self.descent != other.descent:
            return False
        pairs = list(zip(self.fil_gens, other.fil_gens)) + list(zip(self.phi1_gens, other.phi1_gens)) \
            + list(zip(self.phi1_ue, other.phi1_ue))
        return len(self.fil_gens) == len(other.fil_gens) and all(np.array_equal(a, b) for a, b in pairs)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "rank": self.rank,
            "field": {"p": self.base.p, "e": self.base.e, "f": self.base.f,
                      "descent_group": "Gal(F/Qp)" if self.base.has_gphi or self.base.f == 1 else "Gal(F/Qp2)"},
            "algebra": repr(self.base.algebra),
            "descent": [list(d) for d in self.descent],
            "fil1_generators": [vector_json(self, h) for h in self.fil_gens],
            "phi1_generators": [vector_json(self, h) for h in self.phi1_gens],
            "phi1_ue": [vector_json(self, h) for h in self.phi1_ue],
            "maximal": self.is_maximal(),
            "minimal": self.is_minimal(),
        }


def _image_matrix(M: BreuilModule) -> np.ndarray:
    base = M.base
    cols = []
    for h in M.fil_gens:
        for c in range(base.f):
            for n in range(base.e):
                for a in range(base.dA):
                    b = base.zero()
                    b[c, n, a] = 1
                    cols.append(M.mod_ue(M.scale(b, h)))
    return np.array(cols, dtype=np.int64).T


def element_json(base: BreuilBase, x: np.ndarray) -> list:
    """Nonzero terms as [block, u-degree, A-coordinates]."""
    out = []
    for c in range(base.f):
        for n in np.nonzero(x[c].any(axis=1))[0]:
            out.append([c, int(n), [int(v) for v in x[c, n]]])
    return out


def vector_json(M: BreuilModule, v: np.ndarray) -> list:
    return [element_json(M.base, v[i]) for i in range(M.rank)]


# ---------------------------------------------------------------------------
# reduction of strongly divisible modules

def default_algebra(ring) -> tuple[FiniteCoeffAlgebra, dict]:
    """R / (m_E, m_R^2) with the family variables as the nilpotent generators."""
    if ring.family is None:
        return FiniteCoeffAlgebra(ring.kE, 0), {}
    if ring.family in ("Y", "B"):
        A = FiniteCoeffAlgebra(ring.kE, 1, (ring.family,))
        return A, {ring.family: A.var(0)}
    A = FiniteCoeffAlgebra(ring.kE, 2, ("X1", "X2"))
    return A, {"X1": A.var(0), "X2": A.var(1)}


def reduce_series(s: DPSeries, base: BreuilBase, amap: AlgebraMap) -> np.ndarray:
    """Image of s in (k_F (x) A)[u]/u^{ep}: u^j/floor(j/e)! becomes (floor(j/e)!)^{-1} u^j."""
    p, e, ep = base.p, base.e, base.ep
    if s.level < amap.needs_level:
        raise PrecisionExhausted("coordinate has no certified digit left to reduce")
    inv_fact = np.array([pow(factorial(j // e), -1, p) for j in range(ep)], dtype=np.int64)
    out = base.zero()
    for c, comp in enumerate(s.data):
        for k, lst in enumerate(comp):
            if lst is None:
                continue
            col = amap.matrix[:, k]
            if not col.any():
                continue
            top = min(ep, len(lst))
            vals = np.zeros(ep, dtype=np.int64)
            vals[:top] = [v % p for v in lst[:top]]
            vals = (vals * inv_fact) % p
            out[c] += np.outer(vals, col)
    return out % p


def reduce_T0(M, algebra: FiniteCoeffAlgebra | None = None, var_images: dict | None = None,
              name: str | None = None) -> BreuilModule:
    """M / (m_E, Fil^p S) M as a Breuil module over the chosen quotient A of R."""
    from .sdm_lattices import vec_divide_p
    ring = M.ring
    if algebra is None:
        algebra, default_images = default_algebra(ring)
        var_images = default_images if var_images is None else var_images
    amap = AlgebraMap(ring, algebra, var_images or {})
    base = BreuilBase.from_field(M.field, algebra)

    def red(v):
        return np.stack([reduce_series(s, base, amap) for s in v])

    fil = [red(h) for h in M.fil_gens]
    try:
        phi1 = [red([x.divide_p(M.phi_shift + 1) for x in M.phi_vec(h)]) for h in M.fil_gens]
    except ValueError as exc:
        raise InadmissibleParameters(f"phi(Fil^1) is not in pM: {exc}") from exc
    ue = [red([M.phi_mat[k][i] for k in range(M.rank)]) for i in range(M.rank)]
    return BreuilModule(base, M.rank, fil, phi1, ue, list(M.descent), tuple(M.labels),
                        name or f"T0({M.variant})")


def restrict_descent(M: BreuilModule) -> BreuilModule:
    if M.base.f != 2 or not M.base.has_gphi:
        raise UnsupportedMap("restriction to G_{Q_p^2} needs F2 with the full descent group")
    return replace(M, base=M.base.restricted(), name=M.name + "|Qp2")


# ---------------------------------------------------------------------------
# rank one

def rank1_module(base: BreuilBase, r: int, gamma, descent: tuple, name: str = "") -> BreuilModule:
    """Fil^1 = u^r M, phi_1(u^r e) = gamma e (gamma a unit of k_F (x) A, given per block or constant)."""
    e = base.e
    if not 0 <= r <= e:
        raise InadmissibleParameters("Fil^1 exponent must lie in [0, e]")
    if isinstance(gamma, (list, tuple)) and len(gamma) == base.f and not np.isscalar(gamma[0]):
        g = base.zero()
        for c, a in enumerate(gamma):
            g[c, 0] = np.asarray(a) % base.p
    else:
        g = base.const(gamma)
    ge = g[None]
    if r == e:
        return BreuilModule(base, 1, [], [], [ge], [descent], ("e",), name)
    h = base.u_power(r)[None]
    ue = base.mul(base.phi(base.u_power(e - r)), g)[None]
    return BreuilModule(base, 1, [h], [ge], [ue], [descent], ("e",), name)


@dataclass(frozen=True)
class CharacterDescriptor:
    """lambda_a * omega^k over G_Qp, or lambda * omega_2^k over G_{Q_p^2}.

    Over Q_p^2 the unramified parameter is the value on Frobenius of Q_p^2;
    characters with (p+1) | k are recorded with niveau 1 and exponent k/(p+1).
    """

    p: int
    base: str
    niveau: int
    exponent: int
    unramified: int
    kE_n: int = 1

    @classmethod
    def make(cls, p: int, base: str, exponent: int, unramified: int, kE_n: int = 1) -> "CharacterDescriptor":
        if base == "Qp":
            return cls(p, "Qp", 1, exponent % (p - 1), unramified, kE_n)
        if base != "Qp2":
            raise ValueError(f"unknown base {base!r}")
        k = exponent % (p * p - 1)
        if k % (p + 1) == 0:
            return cls(p, "Qp2", 1, (k // (p + 1)) % (p - 1), unramified, kE_n)
        return cls(p, "Qp2", 2, k, unramified, kE_n)

    @property
    def omega2_exponent(self) -> int:
        return self.exponent * (self.p + 1) if self.niveau == 1 else self.exponent

    def times(self, other: "CharacterDescriptor") -> "CharacterDescriptor":
        if self.base != other.base:
            raise ValueError("characters of different groups")
        kE = FiniteField(self.p, max(self.kE_n, other.kE_n))
        u = kE.mul(self.unramified, other.unramified)
        if self.base == "Qp":
            return CharacterDescriptor.make(self.p, "Qp", self.exponent + other.exponent, u, kE.n)
        return CharacterDescriptor.make(self.p, "Qp2", self.omega2_exponent + other.omega2_exponent, u, kE.n)

    def restrict(self) -> "CharacterDescriptor":
        """Restriction to G_{Q_p^2}."""
        if self.base == "Qp2":
            return self
        kE = FiniteField(self.p, self.kE_n)
        return CharacterDescriptor.make(self.p, "Qp2", self.exponent * (self.p + 1),
                                        kE.mul(self.unramified, self.unramified), self.kE_n)

    def describe(self) -> str:
        kE = FiniteField(self.p, self.kE_n)
        lam = f"lambda_{kE.to_str(self.unramified)}"
        w = "omega" if self.niveau == 1 else "omega2"
        tail = "" if self.base == "Qp" else "|G_Qp2"
        return f"{lam}{tail} * {w}^{self.exponent}"

    def to_json(self) -> dict:
        kE = FiniteField(self.p, self.kE_n)
        return {"group": "G_Qp" if self.base == "Qp" else "G_Qp2", "niveau": self.niveau,
                "exponent": self.exponent, "unramified": kE.to_str(self.unramified)}


def standard_rank1(which: str, a: int, exponent: int, kE: FiniteField,
                   algebra: FiniteCoeffAlgebra | None = None) -> BreuilModule:
    """M_E(F/K, e, a^{-1}, exponent) for which in {'F1', 'F2', 'F2/Qp2'}."""
    if a % kE.q == 0 if kE.n == 1 else a == 0:
        raise InadmissibleParameters("a must be nonzero")
    p = kE.p
    if which == "F1":
        base = BreuilBase.standard("F1", kE, algebra)
        desc = (exponent % (p - 1),)
    elif which == "F2":
        base = BreuilBase.standard("F2", kE, algebra)
        k = ((p + 1) * exponent) % (p * p - 1)
        desc = (k, k)
    elif which == "F2/Qp2":
        base = BreuilBase.standard("F2", kE, algebra, base="Qp2")
        k = exponent % (p * p - 1)
        desc = (k, k)
    else:
        raise ValueError(f"unknown standard module {which!r}")
    return rank1_module(base, base.e, base.algebra.kE_element(kE.inv(a)), desc,
                        f"M_E({which}, a^-1={kE.to_str(kE.inv(a))}, {exponent})")


def standard_character(which: str, a: int, exponent: int, kE: FiniteField) -> CharacterDescriptor:
    p = kE.p
    if which in ("F1", "F2"):
        return CharacterDescriptor.make(p, "Qp", exponent + 1, a, kE.n)
    return CharacterDescriptor.make(p, "Qp2", exponent + p + 1, kE.mul(a, a), kE.n)


def minimal_model(chi: CharacterDescriptor, kE: FiniteField, which: str,
                  algebra: FiniteCoeffAlgebra | None = None) -> BreuilModule:
    """Fil^1 = M: phi_1(e) = gamma e with the descent exponent equal to the character's."""
    p = kE.p
    base_name = "Qp2" if which == "F2/Qp2" else "Qp"
    base = BreuilBase.standard("F1" if which == "F1" else "F2", kE, algebra, base=base_name)
    if which == "F1":
        desc = (chi.exponent % (p - 1),)
        gamma = base.algebra.kE_element(kE.inv(chi.unramified))
    elif which == "F2":
        k = ((p + 1) * chi.exponent) % (p * p - 1)
        desc = (k, k)
        gamma = base.algebra.kE_element(kE.inv(chi.unramified))
    else:
        k = chi.omega2_exponent % (p * p - 1)
        desc = (k, k)
        gamma = [base.algebra.kE_element(kE.inv(chi.unramified)), base.algebra.kE_element(1)]
    return rank1_module(base, 0, gamma, desc, f"minimal({chi.describe()})")


def maximal_model(chi: CharacterDescriptor, kE: FiniteField, which: str,
                  algebra: FiniteCoeffAlgebra | None = None) -> BreuilModule:
    p = kE.p
    if which == "F1":
        return standard_rank1("F1", chi.unramified, chi.exponent - 1, kE, algebra)
    if which == "F2":
        return standard_rank1("F2", chi.unramified, chi.exponent - 1, kE, algebra)
    base = BreuilBase.standard("F2", kE, algebra, base="Qp2")
    k = (chi.omega2_exponent - p - 1) % (p * p - 1)
    gamma = [base.algebra.kE_element(kE.inv(chi.unramified)), base.algebra.kE_element(1)]
    return rank1_module(base, base.e, gamma, (k, k), f"maximal({chi.describe()})")


# ---------------------------------------------------------------------------
# morphisms

@dataclass
class BreuilMorphism:
    source: BreuilModule
    target: BreuilModule
    matrix: np.ndarray             # shape (rank_target, rank_source, f, ep, dA)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return apply_matrix(self.target.base, self.matrix, v)

    @property
    def injective(self) -> bool:
        """No u-torsion in the image of the generators: a unit entry in every block."""
        base = self.source.base
        n = base.kE.n
        cols = []
        for c in range(base.f):
            block = self.matrix[:, :, c, 0, :n]
            rows = block.reshape(self.matrix.shape[0], -1)
            if linalg.rank(rows.T.reshape(self.matrix.shape[1], -1), base.p) < self.source.rank:
                return False
            cols.append(block)
        return True

    @property
    def nilpotent_image(self) -> bool:
        """Image lies in m_A times the target."""
        mask = self.source.base.algebra.nilpotent_mask()
        return not self.matrix[..., ~mask].any()

    def to_json(self) -> dict:
        base = self.target.base
        return {"entries": [[element_json(base, self.matrix[k, i]) for i in range(self.matrix.shape[1])]
                            for k in range(self.matrix.shape[0])],
                "injective": self.injective, "nilpotent_image": self.nilpotent_image}


def apply_matrix(base: BreuilBase, F: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.zeros((F.shape[0],) + v.shape[1:], dtype=np.int64)
    for k in range(F.shape[0]):
        for i in range(F.shape[1]):
            if F[k, i].any() and v[i].any():
                out[k] = out[k] + base.mul(F[k, i], v[i])
    return out % base.p


def _check_compatible(M: BreuilModule, N: BreuilModule):
    a, b = M.base, N.base
    if (a.p, a.e, a.f, a.has_gphi, a.dA) != (b.p, b.e, b.f, b.has_gphi, b.dA):
        raise UnsupportedMap("modules live over different bases")


@dataclass(frozen=True)
class _Entry:
    """The map sending g_i to u^n alpha_a g_k (in the listed blocks) and the other g's to 0."""
    k: int
    i: int
    comps: tuple
    n: int
    a: int


def _unknown_entries(M: BreuilModule, N: BreuilModule) -> list[_Entry]:
    base = M.base
    p, e, f = base.p, base.e, base.f
    blocks = [tuple(range(f))] if base.has_gphi else [(c,) for c in range(f)]
    out = []
    for k in range(N.rank):
        for i in range(M.rank):
            for comps in blocks:
                for n in range(base.ep):
                    if any((p ** c * n + N.descent[k][c] - M.descent[i][c]) % e for c in comps):
                        continue
                    out.extend(_Entry(k, i, comps, n, a) for a in range(base.dA))
    return out


def _entry_matrix(base: BreuilBase, entry: _Entry, rank_out: int, rank_in: int) -> np.ndarray:
    F = np.zeros((rank_out, rank_in, base.f, base.ep, base.dA), dtype=np.int64)
    for c in entry.comps:
        F[entry.k, entry.i, c, entry.n, entry.a] = 1
    return F


def _apply(base: BreuilBase, F, v: np.ndarray, rank_out: int) -> np.ndarray:
    if not isinstance(F, _Entry):
        return apply_matrix(base, F, v)
    out = np.zeros((rank_out,) + v.shape[1:], dtype=np.int64)
    x = base.shift(v[F.i], F.n)
    Ma = base.algebra.mult_matrix(np.eye(base.dA, dtype=np.int64)[F.a])
    for c in F.comps:
        out[F.k, c] = (x[c] @ Ma.T) % base.p
    return out


def unknown_basis(M: BreuilModule, N: BreuilModule) -> list[np.ndarray]:
    """F_p-basis of the B-linear maps M -> N commuting with descent (entry-wise diagonal)."""
    return [_entry_matrix(M.base, en, N.rank, M.rank) for en in _unknown_entries(M, N)]


def morphism_constraints(M: BreuilModule, N: BreuilModule, F) -> np.ndarray:
    """All defects of F: Fil^1 membership of F(h) and F(phi_1 t) - phi_1(F t)."""
    base = M.base
    parts = []
    for h in M.fil_gens:
        parts.append(N.fil_defect(_apply(base, F, h, N.rank)))
    ue = [M.scale(base.u_power(base.e), M.basis(i)) for i in range(M.rank)]
    for t, img in zip(list(M.fil_gens) + ue, list(M.phi1_gens) + list(M.phi1_ue)):
        lhs = _apply(base, F, img, N.rank)
        rhs = N.phi1(_apply(base, F, t, N.rank))
        parts.append(((lhs - rhs) % base.p).reshape(-1))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def _batched_constraints(M: BreuilModule, N: BreuilModule, entries: list) -> np.ndarray:
    """morphism_constraints for every entry at once, one column per entry."""
    base = M.base
    p = base.p
    parts = []
    for h in M.fil_gens:
        parts.append(N.fil_defects(np.stack([_apply(base, en, h, N.rank) for en in entries])))
    ue = [M.scale(base.u_power(base.e), M.basis(i)) for i in range(M.rank)]
    for t, img in zip(list(M.fil_gens) + ue, list(M.phi1_gens) + list(M.phi1_ue)):
        lhs = np.stack([_apply(base, en, img, N.rank) for en in entries])
        rhs = N.phi1(np.stack([_apply(base, en, t, N.rank) for en in entries]))
        parts.append(((lhs - rhs) % p).reshape(len(entries), -1))
    return np.concatenate(parts, axis=1).T


def find_morphisms(M: BreuilModule, N: BreuilModule) -> list[BreuilMorphism]:
    """Basis (over F_p) of Hom(M, N) in the category of Breuil modules with descent."""
    _check_compatible(M, N)
    entries = _unknown_entries(M, N)
    if not entries:
        return []
    p = M.base.p
    C = _batched_constraints(M, N, entries)
    null = linalg.nullspace(C, p)
    stack = np.stack([_entry_matrix(M.base, en, N.rank, M.rank) for en in entries])
    return [BreuilMorphism(M, N, np.tensordot(z, stack, axes=1) % p) for z in null]


def is_morphism(M: BreuilModule, N: BreuilModule, F: np.ndarray) -> bool:
    """Direct evaluation of every morphism condition, descent included."""
    base = M.base
    p = base.p
    for h in M.fil_gens:
        if not N.fil_contains(apply_matrix(base, F, h)):
            return False
    ue = [M.scale(base.u_power(base.e), M.basis(i)) for i in range(M.rank)]
    for t, img in zip(list(M.fil_gens) + ue, list(M.phi1_gens) + list(M.phi1_ue)):
        if ((apply_matrix(base, F, img) - N.phi1_direct(apply_matrix(base, F, t))) % p).any():
            return False
    gens = [(1, 0)] + ([(0, 1)] if base.has_gphi else [])
    for t, s in gens:
        for i in range(M.rank):
            g = M.basis(i)
            if ((apply_matrix(base, F, M.act(t, s, g)) - N.act(t, s, apply_matrix(base, F, g))) % p).any():
                return False
    return True


def brute_force_morphisms(M: BreuilModule, N: BreuilModule, limit: int = 3 ** 12) -> np.ndarray:
    """Every solution in the coordinates of unknown_basis, by exhaustion.

    The defect of each coordinate map is computed by direct evaluation
    (full matrix products, phi_1 through the generator decomposition), and
    every combination is tested.
    """
    basis = unknown_basis(M, N)
    p = M.base.p
    d = len(basis)
    if p ** d > limit:
        raise ValueError(f"search space p^{d} exceeds the brute-force limit")
    if not d:
        return np.zeros((1, 0), dtype=np.int64)
    base = M.base
    ue = [M.scale(base.u_power(base.e), M.basis(i)) for i in range(M.rank)]
    rows = []
    for F in basis:
        parts = [N.fil_defect(apply_matrix(base, F, h)) for h in M.fil_gens]
        for t, img in zip(list(M.fil_gens) + ue, list(M.phi1_gens) + list(M.phi1_ue)):
            diff = apply_matrix(base, F, img) - N.phi1_direct(apply_matrix(base, F, t))
            parts.append((diff % p).reshape(-1))
        rows.append(np.concatenate(parts))
    defects = np.stack(rows)
    combos = np.array(list(itertools.product(range(p), repeat=d)), dtype=np.int64)
    vals = (combos @ defects) % p
    return combos[~vals.any(axis=1)]


def brute_force_all_maps(M: BreuilModule, N: BreuilModule, limit: int = 3 ** 8) -> int:
    """Number of morphisms among all B-matrices, descent not presupposed (tiny cases only)."""
    base = M.base
    p = base.p
    d = N.rank * M.rank * base.f * base.ep * base.dA
    if p ** d > limit:
        raise ValueError(f"search space p^{d} exceeds the brute-force limit")
    shape = (N.rank, M.rank, base.f, base.ep, base.dA)
    count = 0
    for combo in itertools.product(range(p), repeat=d):
        if is_morphism(M, N, np.array(combo, dtype=np.int64).reshape(shape)):
            count += 1
    return count


def span_set(vectors: np.ndarray, p: int, d: int) -> set:
    vectors = np.asarray(vectors, dtype=np.int64).reshape(-1, d)
    k = len(vectors)
    if k == 0:
        return {tuple([0] * d)}
    combos = np.array(list(itertools.product(range(p), repeat=k)), dtype=np.int64).reshape(-1, k)
    return {tuple(row) for row in (combos @ vectors) % p} if k else {tuple([0] * d)}


def morphism_coordinates(M: BreuilModule, N: BreuilModule, morphisms: list[BreuilMorphism]) -> np.ndarray:
    basis = unknown_basis(M, N)
    stack = np.stack(basis).reshape(len(basis), -1)
    idx = [int(np.nonzero(row)[0][0]) for row in stack]
    return np.array([[m.matrix.reshape(-1)[j] for j in idx] for m in morphisms], dtype=np.int64).reshape(-1, len(basis))


# ---------------------------------------------------------------------------
# characters of rank-one objects and character scans

def _which(base: BreuilBase) -> str:
    if base.f == 1:
        return "F1"
    return "F2" if base.has_gphi else "F2/Qp2"


def _candidate_exponents(base: BreuilBase) -> list[int]:
    p, e = base.p, base.e
    if base.f == 2 and base.has_gphi:
        return [(p + 1) * j for j in range(p - 1)]
    return list(range(e))


def _beta_blocks(base: BreuilBase):
    return None if (base.f == 1 or base.has_gphi) else [0]


def _nonzero_rows(A: np.ndarray, p: int) -> np.ndarray:
    R, piv, _ = linalg.rref(A[A.any(axis=1)], p, track=False)
    return R[:len(piv)]


def scan_rank1(M: BreuilModule, mode: str) -> list[tuple[CharacterDescriptor, BreuilModule, list]]:
    """Characters chi with a nonzero map M -> maximal(chi) ('quotient') or minimal(chi) -> M ('sub').

    For a fixed descent exponent the conditions read X1 z = beta X2 z with
    the Fil^1 condition on the side.  beta = b0 + b1 t enters linearly, so
    the rows are compressed once per exponent and the parameter scan runs
    on a matrix of size at most 3 * (number of unknowns).
    """
    base = M.base
    if base.algebra.nvars:
        raise UnsupportedMap("character scans need a field of coefficients")
    kE = base.kE
    p = base.p
    blocks = _beta_blocks(base)
    unit = base.algebra.kE_element(1)
    tmat = base.algebra.mult_matrix(base.algebra.kE_element(kE.make(0, 1) if kE.n == 2 else 0))
    found = []
    gam = unit if blocks is None else [unit, unit]
    # phi_1 and Fil^1 of the rank-one model do not depend on the descent exponent
    N0 = rank1_module(base, base.e if mode == "quotient" else 0, gam, (0,) * base.f)
    ue = [M.scale(base.u_power(base.e), M.basis(i)) for i in range(M.rank)]
    pairs = list(zip(list(M.fil_gens) + ue, list(M.phi1_gens) + list(M.phi1_ue)))
    for b in _candidate_exponents(base):
        desc = (b, b)[:base.f]
        Nb = replace(N0, descent=[desc])
        if mode == "quotient":
            entries = _unknown_entries(M, Nb)
            if not entries:
                continue
            fil = [N0.fil_defects(np.stack([_apply(base, en, h, 1) for en in entries])) for h in M.fil_gens]
            C_fil = np.concatenate(fil, axis=1).T if fil else np.zeros((0, len(entries)), dtype=np.int64)
            X1 = np.stack([np.stack([_apply(base, en, img, 1) for en in entries]) for _, img in pairs])
            X2 = np.stack([N0.phi1(np.stack([_apply(base, en, t, 1) for en in entries])) for t, _ in pairs])
        else:
            entries = _unknown_entries(Nb, M)
            if not entries:
                continue
            V = np.stack([_apply(base, en, N0.basis(0), M.rank) for en in entries])
            C_fil = M.fil_defects(V).T
            # beta v = phi_1(v) and 0 = phi_1(u^e v)
            X1 = np.stack([M.phi1(V), M.phi1(np.stack([M.scale(base.u_power(base.e), v) for v in V]))])
            X2 = np.stack([V, np.zeros_like(V)])
        # unknowns last, and only u-degrees where something happens
        X1 = np.moveaxis(X1, 1, -1)
        X2 = np.moveaxis(X2, 1, -1)
        keep = X1.any(axis=(-2, -1)) | X2.any(axis=(-2, -1))
        comp_of = np.nonzero(keep)[-2]
        X1, X2 = X1[keep], X2[keep]              # (npos, dA, nU)
        nU = len(entries)
        K = linalg.nullspace(C_fil, p) if C_fil.size else np.eye(nU, dtype=np.int64)
        if len(K) == 0:
            continue
        twisted = np.isin(comp_of, list(range(base.f) if blocks is None else blocks))
        fixed = ((X1[~twisted] - X2[~twisted]) % p).reshape(-1, nU)
        if len(fixed):
            K = linalg.nullspace(fixed @ K.T % p, p) @ K % p
            if len(K) == 0:
                continue
        nK = len(K)
        X1t = X1[twisted] @ K.T % p
        X2t = X2[twisted] @ K.T % p
        Y = np.einsum("ij,rjn->rin", tmat, X2t) % p
        H = np.concatenate([X1t, X2t, Y], axis=-1).reshape(-1, 3 * nK)
        H = _nonzero_rows(H, p) if len(H) else np.zeros((0, 3 * nK), dtype=np.int64)
        fixed = np.zeros((0, nK), dtype=np.int64)
        betas = kE.units()
        coeffs = np.array([kE.parts(beta) for beta in betas], dtype=np.int64)
        pencil = (H[None, :, :nK] - coeffs[:, 0, None, None] * H[None, :, nK:2 * nK]
                  - coeffs[:, 1, None, None] * H[None, :, 2 * nK:]) % p
        pencil = np.concatenate([pencil, np.broadcast_to(fixed, (len(betas),) + fixed.shape)], axis=1)
        ranks = linalg.batched_rank(pencil, p)
        for beta, rows, rk in zip(betas, pencil, ranks):
            if rk == nK:
                continue
            null = linalg.nullspace(rows, p) @ K % p
            if mode == "quotient":
                chi = _character_from_maximal(base, b, beta)
            else:
                chi = _character_from_minimal(base, b, beta)
            model = rank1_module(base, base.e if mode == "quotient" else 0,
                                 base.algebra.kE_element(beta) if blocks is None else
                                 [base.algebra.kE_element(beta), unit], desc)
            rin, rout = (M.rank, 1) if mode == "quotient" else (1, M.rank)
            stack = np.stack([_entry_matrix(base, en, rout, rin) for en in entries])
            maps = [np.tensordot(z, stack, axes=1) % p for z in null]
            found.append((chi, model, maps))
    return found


def _character_from_maximal(base: BreuilBase, b: int, gamma: int) -> CharacterDescriptor:
    p, kE = base.p, base.kE
    a = kE.inv(gamma)
    if base.f == 1:
        return CharacterDescriptor.make(p, "Qp", b + 1, a, kE.n)
    if base.has_gphi:
        return CharacterDescriptor.make(p, "Qp", b // (p + 1) + 1, a, kE.n)
    return CharacterDescriptor.make(p, "Qp2", b + p + 1, a, kE.n)


def _character_from_minimal(base: BreuilBase, a_exp: int, gamma: int) -> CharacterDescriptor:
    p, kE = base.p, base.kE
    a = kE.inv(gamma)
    if base.f == 1:
        return CharacterDescriptor.make(p, "Qp", a_exp, a, kE.n)
    if base.has_gphi:
        return CharacterDescriptor.make(p, "Qp", a_exp // (p + 1), a, kE.n)
    return CharacterDescriptor.make(p, "Qp2", a_exp, a, kE.n)


def character_of_rank1(M: BreuilModule) -> CharacterDescriptor:
    if M.rank != 1:
        raise NotRecognized("character lookup needs a rank-one module")
    found = scan_rank1(M, "quotient")
    chars = {c for c, _, _ in found}
    if len(chars) != 1:
        raise NotRecognized(f"rank-one module matched {len(chars)} standard characters")
    return chars.pop()
