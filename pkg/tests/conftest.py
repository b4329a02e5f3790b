import numpy as np
import pytest

from identlink.poisson import PoissonData
from identlink.prior import GaussianPrior

_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(cid, title): acceptance criterion test")
    config.stash[_CRITERIA] = {}


@pytest.fixture
def criterion_detail(request):
    """Lets an acceptance test attach a one-line measurement to its result."""
    store = request.config.stash[_CRITERIA]
    key = request.node.nodeid

    def record(text):
        store.setdefault(key, {})["detail"] = text

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    entry = item.config.stash[_CRITERIA].setdefault(item.nodeid, {})
    entry["cid"], entry["title"] = mark.args
    if rep.skipped:
        entry["status"] = "SKIP"
    elif rep.failed:
        entry["status"] = "FAIL"
    elif rep.when == "call" and "status" not in entry:
        entry["status"] = "PASS"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    entries = [e for e in config.stash.get(_CRITERIA, {}).values() if "cid" in e]
    if not entries:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    def order(e):
        digits = "".join(ch for ch in e["cid"] if ch.isdigit())
        return int(digits), e["cid"]

    for e in sorted(entries, key=order):
        detail = f"  [{e['detail']}]" if e.get("detail") else ""
        terminalreporter.write_line(f"{e.get('status', 'FAIL'):4s}  C{e['cid']:<4s} {e['title']}{detail}")


@pytest.fixture
def small_poisson():
    X = np.array([[1.0, -0.5], [1.0, 0.3], [1.0, 1.1], [1.0, 2.0]])
    return PoissonData(X, np.array([1, 0, 3, 2]))


@pytest.fixture
def unit_prior():
    return GaussianPrior.isotropic(2)
