import os

import pytest
from hypothesis import HealthCheck, settings

from locklab.circuits import locked_majority, majority

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def maj():
    return majority()


@pytest.fixture
def locked_maj():
    return locked_majority()


def pytest_terminal_summary(terminalreporter):
    # one verdict line per acceptance criterion, recorded via record_property("verdict", ...)
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call" or "test_acceptance" not in rep.nodeid:
                continue
            got = [v for k, v in rep.user_properties if k == "verdict"]
            crit = rep.nodeid.split("::")[-1].split("_")[1].upper()
            lines.append(got[0] if got else f"FAIL {crit} crashed before reaching a verdict")
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1][1:])):
            terminalreporter.write_line(line)
