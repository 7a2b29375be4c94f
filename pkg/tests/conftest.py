import numpy as np
import pytest

from vwbeam import kernels

BACKENDS = [kernels.numpy_impl, kernels.numba_impl]


@pytest.fixture(params=BACKENDS, ids=lambda k: k.name)
def impl(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, with the measured numbers."""
    lines = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if "test_acceptance.py" not in rep.nodeid or rep.when not in ("call", "setup"):
                continue
            if rep.when == "setup" and rep.passed:
                continue
            props = dict(rep.user_properties)
            num = props.get("criterion")
            if num is None:
                continue
            verdict = "PASS" if rep.passed else "FAIL"
            lines.append((num, f"criterion {num:>2} {verdict}  {props.get('title', '')}: "
                               f"{props.get('detail', '')}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
