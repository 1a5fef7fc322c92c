from pathlib import Path

import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """``report(n, ok, detail)`` records one acceptance line and returns ``ok``."""
    lines = request.config.stash.setdefault(_LINES, [])

    def add(n, ok, detail):
        line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((n, line))
        print(line)
        return ok

    return add


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    text = [line for _, line in sorted(lines, key=lambda p: p[0])]
    for line in text:
        terminalreporter.write_line(line)
    Path(config.rootpath, "acceptance_results.txt").write_text("\n".join(text) + "\n")
