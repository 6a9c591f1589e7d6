"""Collects the acceptance criteria outcomes and prints one line per criterion."""

import pytest

_OUTCOMES: dict[int, list[bool]] = {}
_TITLES: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            n, title = mark.args
            _TITLES[n] = title
            item.user_properties.append(("criterion", n))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    n = dict(item.user_properties).get("criterion")
    if n is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _OUTCOMES.setdefault(n, []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_TITLES):
        res = _OUTCOMES.get(n)
        if not res:
            status = "NOT RUN"
        else:
            status = "PASS" if all(res) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status}  {_TITLES[n]}")
