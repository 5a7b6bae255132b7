import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

# criterion number -> (passed, description); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, desc = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {desc}")


def algebra_hom(A, B, images: dict) -> np.ndarray:
    """F_p matrix of the k_E-algebra map A -> B sending each variable of A to images[name]."""
    cols = []
    for idx in range(A.dim):
        mono, a = divmod(idx, A.n)
        scal = B.kE_element(A.kE.make(*([1, 0] if a == 0 else [0, 1])))
        cols.append(scal if mono == 0 else B.mul(scal, images[A.names[mono - 1]]))
    return np.array(cols, dtype=np.int64).T


@pytest.fixture
def acceptance():
    def record(n: int, ok: bool, desc: str):
        ACCEPTANCE[n] = (bool(ok), desc)
        assert ok, desc
    return record
