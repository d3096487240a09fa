import os
from pathlib import Path

import pytest
from gmpy2 import mpq
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from capwave.fourier import CoeffGrid, Frequency, NormWeights

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA_DIR = Path(os.environ.get("CAPWAVE_DATA_DIR", Path(__file__).parent / "data" / "supplement"))


@pytest.fixture
def freq():
    return Frequency(34, 20)


@pytest.fixture
def weights():
    return NormWeights.default()


rationals = st.builds(
    lambda n, d: mpq(n, d), st.integers(-40, 40), st.integers(1, 12)
)


@st.composite
def grids(draw, max_m=3, max_n=3):
    M = draw(st.integers(1, max_m))
    N = draw(st.integers(1, max_n))
    rows = [[draw(rationals) for _ in range(N)] for _ in range(M)]
    return CoeffGrid(rows)


weight_choices = st.sampled_from(
    [NormWeights.default(), NormWeights.uniform(mpq(11, 10)), NormWeights(mpq(3, 2), mpq(5, 4))]
)


# ---------------------------------------------------------------- criterion summary

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


def _skip_reason(excinfo) -> str:
    return str(excinfo.value.msg) if hasattr(excinfo.value, "msg") else ""


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    if call.when not in ("setup", "call"):
        return
    if call.excinfo is None:
        if call.when == "call":
            _CRITERIA[n] = (title, "PASS", "")
    elif call.excinfo.errisinstance(pytest.skip.Exception):
        _CRITERIA[n] = (title, "SKIP", _skip_reason(call.excinfo))
    else:
        _CRITERIA[n] = (title, "FAIL", "")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, kind, note = _CRITERIA[n]
        line = f"criterion {n}: {kind}  {title}"
        terminalreporter.write_line(f"{line}  ({note})" if note else line)
