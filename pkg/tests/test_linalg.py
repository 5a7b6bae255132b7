import numpy as np
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from breuil_tame import linalg

P = st.sampled_from([2, 3, 5, 7])


@st.composite
def matrices(draw, max_side=7):
    p = draw(P)
    m = draw(st.integers(1, max_side))
    n = draw(st.integers(1, max_side))
    A = draw(arrays(np.int64, (m, n), elements=st.integers(0, p - 1)))
    return A, p


@given(matrices())
def test_rank_nullity(data):
    A, p = data
    N = linalg.nullspace(A, p)
    assert linalg.rank(A, p) + len(N) == A.shape[1]
    assert not ((A @ N.T) % p).any()


@given(matrices())
def test_rank_of_transpose(data):
    A, p = data
    assert linalg.rank(A, p) == linalg.rank(A.T, p)


@given(matrices(), st.data())
def test_image_solver(data, d):
    A, p = data
    S = linalg.ImageSolver(A, p)
    x = d.draw(arrays(np.int64, A.shape[1], elements=st.integers(0, p - 1)))
    y = (A @ x) % p
    assert S.contains(y)
    assert np.array_equal((A @ S.solve(y)) % p, y)


@given(st.lists(matrices(5), min_size=1, max_size=6))
def test_batched_rank(mats):
    p = mats[0][1]
    shape = mats[0][0].shape
    stack = [A % p for A, _ in mats if A.shape == shape]
    got = linalg.batched_rank(np.array(stack), p)
    assert list(got) == [linalg.rank(A, p) for A in stack]
