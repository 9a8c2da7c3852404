import os

import matplotlib

matplotlib.use("Agg")

from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

import pytest

ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def accept(request):
    """Record one acceptance verdict line; the lines are repeated in the terminal summary."""
    log = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(key, name, passed, obtained, target, seconds=None):
        took = f" [{seconds:.1f} s]" if seconds is not None else ""
        line = f"criterion {key:>2} {'PASS' if passed else 'FAIL'}  {name}: obtained {obtained}; target {target}{took}"
        log.append((key, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _key, line in sorted(lines):
            terminalreporter.write_line(line)
