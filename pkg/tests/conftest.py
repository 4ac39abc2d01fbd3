from collections import OrderedDict

import numpy as np
import pytest

_criteria = OrderedDict()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _tag_criterion(request):
    mark = request.node.get_closest_marker("acceptance")
    if mark is not None and mark.args:
        request.node.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    if report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.outcome == "passed":
        return
    props = dict(report.user_properties)
    crit = props.get("criterion")
    if crit is None:
        return
    entry = _criteria.setdefault(crit, [])
    name = report.nodeid.split("::")[-1]
    entry.append((name, report.outcome, props.get("measured", "")))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_criteria):
        parts = _criteria[crit]
        ok = all(outcome == "passed" for _, outcome, _ in parts)
        terminalreporter.write_line(f"ACCEPTANCE {crit:>2} {'PASS' if ok else 'FAIL'}")
        for name, outcome, measured in parts:
            terminalreporter.write_line(f"    {outcome:<7} {name}  {measured}")
