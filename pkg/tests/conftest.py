import pytest

from ranknorm import _backend

KERNELS = ("logistic", "qnorm_map", "softsort_column", "sinkhorn_column")


@pytest.fixture(params=["cython", "numpy"])
def backend(request, monkeypatch):
    """Route operator kernels through one specific backend."""
    try:
        mod = _backend.load(request.param)
    except ImportError:
        pytest.skip("compiled kernels not built")
    for name in KERNELS:
        monkeypatch.setattr(_backend, name, getattr(mod, name))
    return mod


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
