import numpy as np
import pytest

from cochist.data import tree_from_sizes

# criterion number -> (title, cases run, cases failed)
_acceptance: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number, title = mark.args
        entry = _acceptance.setdefault(number, [title, 0, 0])
        entry[1] += 1
        entry[2] += report.outcome != "passed"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, (title, runs, failed) in sorted(_acceptance.items()):
        status = "FAIL" if failed else "PASS"
        cases = f" ({runs - failed}/{runs} cases)" if runs > 1 else ""
        terminalreporter.write_line(f"criterion {number:2d} [{status}] {title}{cases}")


def random_tree(gen: np.random.Generator, depth: int, fanout: int, groups: int,
                max_size: int = 60, outliers: int = 0, outlier_max: int = 500):
    """Random hierarchy with ``fanout`` children per internal node."""
    paths = [("R",)]
    for level in range(1, depth):
        paths = [p + (f"{p[-1]}.{j}",) for p in paths for j in range(fanout)]
    sizes = np.minimum(gen.geometric(0.35, groups) - 1, max_size)
    if outliers:
        sizes[gen.choice(groups, outliers, replace=False)] = gen.integers(1, outlier_max + 1,
                                                                          outliers)
    leaf = gen.integers(0, len(paths), groups)
    return tree_from_sizes(sizes, leaf, paths)


@pytest.fixture
def gen():
    return np.random.default_rng(12345)
