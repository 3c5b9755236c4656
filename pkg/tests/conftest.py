import numpy as np
import pytest


_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(cid, title): exit criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    cid, title = marker.args
    if rep.when in ("setup", "call"):
        _, ok, secs = _ACCEPTANCE.get(cid, (title, True, 0.0))
        _ACCEPTANCE[cid] = (title, ok and not rep.failed, secs + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE):
        title, ok, secs = _ACCEPTANCE[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {cid}  {title}  ({secs:.1f}s)")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
