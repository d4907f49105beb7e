import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")

# acceptance verdicts, printed once at the end of the session
_VERDICTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def verdict():
    """Record ``(criterion, ok, detail)`` for the end-of-run acceptance summary."""
    def record(number: int, ok: bool, detail: str) -> bool:
        _VERDICTS[number] = (bool(ok), detail)
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        ok, detail = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
