import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from wavedecay.nonlinearity import CubicTensor, QuadraticTensor

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

values = st.floats(-3.0, 3.0, allow_nan=False).filter(lambda v: abs(v) > 1e-3)


@st.composite
def quadratic_tensors(draw, n=None):
    n = n or draw(st.integers(1, 3))
    idx = st.tuples(
        st.integers(1, n), st.integers(1, n), st.integers(1, n), st.integers(0, 2), st.integers(0, 2)
    )
    rows = draw(st.lists(st.tuples(idx, values), max_size=8))
    return QuadraticTensor(n, tuple(rows))


@st.composite
def cubic_tensors(draw, n=None):
    n = n or draw(st.integers(1, 3))
    idx = st.tuples(*[st.integers(1, n)] * 4, *[st.integers(0, 2)] * 3)
    rows = draw(st.lists(st.tuples(idx, values), max_size=8))
    return CubicTensor(n, tuple(rows))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance outcomes, printed once at the end of the session
_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    def _record(number: int, ok: bool, detail: str) -> bool:
        _CRITERIA[number] = (bool(ok), detail)
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
