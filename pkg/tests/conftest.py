import functools
import os

import pytest

from mdmp import CostModel, World

# acceptance lines collected during the run, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def world2():
    return World(2, CostModel(), timeout=30.0)


def run2(fn, *args, _cost=None, _timeout=30.0, **kw):
    """Run ``fn(endpoint, *args, **kw)`` on two in-process ranks."""
    body = functools.partial(fn, **kw) if kw else fn
    return World(2, _cost or CostModel(), timeout=_timeout).run(body, [args, args])


@pytest.fixture(autouse=True)
def _default_accessor_env(monkeypatch):
    # tests choose the accessor path explicitly when it matters
    if "MDMP_FAST_ACCESSORS" in os.environ:
        monkeypatch.delenv("MDMP_FAST_ACCESSORS")
