import pytest


def pytest_configure(config):
    config._acceptance = []


@pytest.fixture
def verdict(request, capsys):
    """Record (and echo) one PASS/FAIL line for an acceptance criterion."""
    def record(num, ok, detail):
        line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config._acceptance.append((num, line))
        with capsys.disabled():
            print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda t: t[0]):
            terminalreporter.write_line(line)
