"""Dense linear algebra over F_p on numpy integer arrays."""
from __future__ import annotations

import numpy as np


def _as_mod(A, p: int) -> np.ndarray:
    return np.array(A, dtype=np.int64) % p


def rref(A, p: int, track: bool = True) -> tuple[np.ndarray, list[int], np.ndarray | None]:
    """Reduced row echelon form R = T A together with pivot columns and T (None if not tracked)."""
    R = _as_mod(A, p)
    m, n = R.shape
    T = np.eye(m, dtype=np.int64) if track else np.zeros((m, 0), dtype=np.int64)
    pivots: list[int] = []
    row = 0
    for col in range(n):
        if row == m:
            break
        nz = np.nonzero(R[row:, col])[0]
        if len(nz) == 0:
            continue
        piv = row + int(nz[0])
        if piv != row:
            R[[row, piv]] = R[[piv, row]]
            T[[row, piv]] = T[[piv, row]]
        inv = pow(int(R[row, col]), -1, p)
        R[row] = (R[row] * inv) % p
        T[row] = (T[row] * inv) % p
        others = np.nonzero(R[:, col])[0]
        others = others[others != row]
        if len(others):
            f = R[others, col][:, None]
            R[others] = (R[others] - f * R[row]) % p
            T[others] = (T[others] - f * T[row]) % p
        pivots.append(col)
        row += 1
    return R, pivots, (T if track else None)


def rank(A, p: int) -> int:
    A = np.asarray(A)
    if A.size == 0:
        return 0
    # eliminate along the shorter side
    if A.shape[0] > A.shape[1]:
        A = A.T
    return len(_pivots_only(A, p))


def _pivots_only(A, p: int) -> list[int]:
    R = _as_mod(A, p)
    m, n = R.shape
    pivots, row = [], 0
    for col in range(n):
        if row == m:
            break
        nz = np.nonzero(R[row:, col])[0]
        if len(nz) == 0:
            continue
        piv = row + int(nz[0])
        if piv != row:
            R[[row, piv]] = R[[piv, row]]
        R[row] = (R[row] * pow(int(R[row, col]), -1, p)) % p
        below = row + 1 + np.nonzero(R[row + 1:, col])[0]
        if len(below):
            R[below] = (R[below] - R[below, col][:, None] * R[row]) % p
        pivots.append(col)
        row += 1
    return pivots


def nullspace(A, p: int) -> np.ndarray:
    """Rows form a basis of {x : A x = 0}."""
    A = _as_mod(A, p)
    m, n = A.shape
    if m == 0:
        return np.eye(n, dtype=np.int64)
    A = A[A.any(axis=1)]
    R, pivots, _ = rref(A, p, track=False)
    free = [c for c in range(n) if c not in set(pivots)]
    basis = np.zeros((len(free), n), dtype=np.int64)
    for k, fc in enumerate(free):
        basis[k, fc] = 1
        for r, pc in enumerate(pivots):
            basis[k, pc] = (-R[r, fc]) % p
    return basis


def left_nullspace(A, p: int) -> np.ndarray:
    """Rows l with l A = 0."""
    return nullspace(np.asarray(A).T, p)


class ImageSolver:
    """Fixed linear right inverse of A on its column space.

    For y in the image, A (solve(y)) = y; membership is tested through a
    basis of the left null space.
    """

    def __init__(self, A, p: int):
        A = _as_mod(A, p)
        self.p = p
        self.shape = A.shape
        R, pivots, T = rref(A, p)
        self.pivots = pivots
        r = len(pivots)
        # x[pivot_k] = (T y)[k]
        S = np.zeros((A.shape[1], A.shape[0]), dtype=np.int64)
        for k, col in enumerate(pivots):
            S[col] = T[k]
        self.right_inverse = S
        self.obstruction = T[r:]          # rows annihilating the image

    def solve(self, y) -> np.ndarray:
        return (self.right_inverse @ (np.asarray(y) % self.p)) % self.p

    def contains(self, y) -> bool:
        if len(self.obstruction) == 0:
            return True
        return not np.any((self.obstruction @ (np.asarray(y) % self.p)) % self.p)

    def defect(self, y) -> np.ndarray:
        return (self.obstruction @ (np.asarray(y) % self.p)) % self.p


def batched_rank(A, p: int) -> np.ndarray:
    """Ranks of a stack of matrices A[b] over F_p, eliminated side by side."""
    A = np.array(A, dtype=np.int64) % p
    B, m, n = A.shape
    rank = np.zeros(B, dtype=np.int64)
    if m == 0 or n == 0:
        return rank
    inv = np.array([0] + [pow(x, -1, p) for x in range(1, p)], dtype=np.int64)
    rows = np.arange(m)
    for col in range(n):
        cand = (A[:, :, col] != 0) & (rows[None, :] >= rank[:, None])
        has = cand.any(axis=1)
        if not has.any():
            continue
        b = np.nonzero(has)[0]
        r = rank[b]
        pr = np.argmax(cand[b], axis=1)
        top = A[b, pr].copy()
        A[b, pr] = A[b, r]
        top = (top * inv[top[:, col]][:, None]) % p
        A[b, r] = top
        fac = A[b, :, col].copy()
        fac[rows[None, :] <= r[:, None]] = 0
        A[b] = (A[b] - fac[:, :, None] * top[:, None, :]) % p
        rank[b] += 1
    return rank
